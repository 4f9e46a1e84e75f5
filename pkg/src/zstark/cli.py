"""Command-line interface.

Subcommands cover the full pipeline: `synth` or `ingest` produce a
zones file, `build-tables` discretizes it, `eval` runs the accuracy
sweep, `prove`/`verify` exercise one proof, and `bench` times the whole
proving path.  Exit codes: 0 success, 1 a proof failed verification,
2 bad input or usage.
"""

from __future__ import annotations

import argparse
import glob
import json
import logging
import os
import sys

from .air import AirConfig, build_trace
from .corpus import load_zones, save_zones, synth_corpus
from .discretize import (
    CENTER,
    SDF,
    GridSpec,
    accuracy_eval,
    build_bundle,
    load_table,
    save_table,
    voting,
)
from .geometry import BoundingBox
from .harness import (
    ACCURACY_RESOLUTIONS,
    now_iso,
    BENCH_RESOLUTIONS,
    DEFAULT_BATCH,
    DEFAULT_SAMPLE_COUNT,
    ReportRow,
    emit_report,
    ingest,
    run_accuracy_sweep,
    run_proof_bench,
    sample_queries,
    strategy_label,
)
from .stark import ACCEPT, StarkProof, prove, verify

log = logging.getLogger("zstark")

EXIT_OK = 0
EXIT_REJECT = 1
EXIT_INPUT = 2


def _strategy_from(name: str, tau: float | None):
    if name == "center":
        return CENTER
    if name == "sdf":
        return SDF
    if name == "voting":
        return voting(0.5 if tau is None else tau)
    raise ValueError(f"unknown strategy {name!r}")


def _parse_bbox(text: str) -> BoundingBox:
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 4:
        raise ValueError(f"bbox needs 4 comma-separated numbers, got {text!r}")
    return BoundingBox(*parts)


def _parse_origin(text: str) -> tuple[float, float]:
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 2:
        raise ValueError(f"origin needs 'lon,lat', got {text!r}")
    return (parts[0], parts[1])


def _parse_resolutions(text: str) -> tuple[int, ...]:
    values = tuple(int(v) for v in text.split(","))
    if not values or any(v < 1 for v in values):
        raise ValueError(f"bad resolution list {text!r}")
    return values


def _parse_strategies(text: str, tau: float | None):
    return tuple(_strategy_from(name.strip(), tau) for name in text.split(","))


# ---------------------------------------------------------------------------
# Subcommand bodies
# ---------------------------------------------------------------------------

def _cmd_ingest(args) -> int:
    zones = ingest(args.geojson, _parse_bbox(args.bbox), _parse_origin(args.origin))
    save_zones(zones, args.out)
    log.info("wrote %d zones to %s", len(zones), args.out)
    return EXIT_OK


def _cmd_synth(args) -> int:
    zones = synth_corpus(args.seed)
    save_zones(zones, args.out)
    log.info("wrote %d synthetic zones to %s", len(zones), args.out)
    return EXIT_OK


def _cmd_build_tables(args) -> int:
    zones = load_zones(args.zones)
    strategy = _strategy_from(args.strategy, args.tau)
    grid = GridSpec(zones.bbox, args.r)
    bundle = build_bundle(strategy, zones, grid)
    save_table(bundle, args.out)
    log.info("wrote %s table r=%d (%d zones) to %s, root %s",
             strategy.name, args.r, len(zones), args.out,
             bundle.commitment_root.hex()[:16])
    return EXIT_OK


def _cmd_eval(args) -> int:
    zones = load_zones(args.zones)
    sample = sample_queries(zones.bbox, args.samples, args.seed)
    if args.tables:
        paths = sorted(glob.glob(os.path.join(args.tables, "*.ztbl")))
        if not paths:
            raise ValueError(f"no .ztbl files under {args.tables}")
        rows = []
        for path in paths:
            bundle = load_table(path)
            acc = accuracy_eval(zones, bundle, sample.points())
            rows.append(ReportRow(strategy_label(bundle.strategy),
                                  bundle.grid.r, accuracy=acc, timestamp=now_iso()))
            log.info("accuracy %s r=%d: %.4f (from %s)",
                     bundle.strategy.name, bundle.grid.r, acc, path)
    else:
        strategies = _parse_strategies(args.strategies, None)
        rows = run_accuracy_sweep(zones, strategies,
                                  _parse_resolutions(args.resolutions), sample)
    emit_report(rows, args.out)
    log.info("wrote %d report rows to %s", len(rows), args.out)
    return EXIT_OK


def _read_queries(path, bbox):
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if "points" in doc:
        queries = [(float(x), float(y)) for x, y in doc["points"]]
    elif "count" in doc:
        qs = sample_queries(bbox, int(doc["count"]), int(doc.get("seed", 0)))
        queries = qs.points()
    else:
        raise ValueError(f"{path}: need either 'points' or 'count'")
    zone_indices = doc.get("zones")
    if zone_indices is not None:
        zone_indices = [int(z) for z in zone_indices]
        if len(zone_indices) != len(queries):
            raise ValueError(f"{path}: 'zones' length differs from points")
    return queries, zone_indices


def _cmd_prove(args) -> int:
    bundle = load_table(args.table)
    queries, zone_indices = _read_queries(args.queries, bundle.grid.bbox)
    rows = args.rows or max(8, 1 << (len(queries) - 1).bit_length())
    cfg = AirConfig(bundle.strategy, bundle.grid.r, rows)
    trace, statement = build_trace(queries, bundle, cfg, zone_indices)
    proof = prove(trace, statement, cfg)
    proof.save(args.out)
    log.info("wrote proof (%d queries, %d bytes) to %s",
             len(queries), len(proof.to_bytes()), args.out)
    return EXIT_OK


def _cmd_verify(args) -> int:
    proof = StarkProof.load(args.proof)
    result = verify(proof)
    if result.reason == ACCEPT:
        print(f"ACCEPT ({result.lookup_path_checks} lookup paths, "
              f"{result.query_path_checks} query paths)")
        return EXIT_OK
    print(f"REJECT {result.reason}")
    return EXIT_REJECT


def _cmd_bench(args) -> int:
    zones = load_zones(args.zones)
    strategies = _parse_strategies(args.strategies, None)
    sample = sample_queries(zones.bbox, args.samples, args.seed)
    rows = run_proof_bench(zones, strategies,
                           _parse_resolutions(args.resolutions),
                           batch=args.batch, seed=args.seed, sample=sample)
    emit_report(rows, args.out)
    log.info("wrote %d bench rows to %s", len(rows), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="zstark",
        description="Grid-discretized zone membership with STARK-backed lookups")
    top.add_argument("-v", "--verbose", action="store_true",
                     help="debug-level logging")
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="project and clip geographic GeoJSON")
    p.add_argument("--geojson", required=True)
    p.add_argument("--bbox", required=True, help='"xmin,ymin,xmax,ymax" meters')
    p.add_argument("--origin", required=True, help='"lon,lat" projection origin')
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_ingest)

    p = sub.add_parser("synth", help="write the deterministic synthetic corpus")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_synth)

    p = sub.add_parser("build-tables", help="discretize zones into a table file")
    p.add_argument("--zones", required=True)
    p.add_argument("--strategy", required=True, choices=("center", "voting", "sdf"))
    p.add_argument("--tau", type=float, default=None,
                   help="area threshold for voting (default 0.5)")
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_build_tables)

    p = sub.add_parser("eval", help="accuracy sweep to CSV + JSON")
    p.add_argument("--zones", required=True)
    p.add_argument("--tables", default=None,
                   help="directory of prebuilt .ztbl files (else build in-process)")
    p.add_argument("--samples", type=int, default=DEFAULT_SAMPLE_COUNT)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--strategies", default="center,voting,sdf")
    p.add_argument("--resolutions",
                   default=",".join(str(r) for r in ACCURACY_RESOLUTIONS))
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("prove", help="prove one query batch against a table")
    p.add_argument("--table", required=True)
    p.add_argument("--queries", required=True,
                   help='JSON: {"points": [[x,y],...], "zones": [i,...]} or '
                        '{"count": N, "seed": S}')
    p.add_argument("--rows", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_prove)

    p = sub.add_parser("verify", help="verify a proof file")
    p.add_argument("--proof", required=True)
    p.set_defaults(fn=_cmd_verify)

    p = sub.add_parser("bench", help="prove/verify timing sweep to CSV + JSON")
    p.add_argument("--zones", required=True)
    p.add_argument("--resolutions",
                   default=",".join(str(r) for r in BENCH_RESOLUTIONS))
    p.add_argument("--strategies", default="center,voting,sdf")
    p.add_argument("--batch", type=int, default=DEFAULT_BATCH)
    p.add_argument("--samples", type=int, default=DEFAULT_SAMPLE_COUNT)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_bench)

    return top


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(message)s")
    try:
        out = getattr(args, "out", None)
        if out and os.path.dirname(out):
            os.makedirs(os.path.dirname(out), exist_ok=True)
        return args.fn(args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
