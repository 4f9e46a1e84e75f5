"""Experiment orchestration: ingestion, sweeps, benchmarks, reports.

The accuracy sweep and the proof benchmark both emit ReportRow records
with a fixed seven-column CSV schema,

    strategy,r,accuracy,prove_ms,verify_ms,proof_bytes,trace_rows

where cells a phase does not measure stay empty.  The JSON mirror
additionally carries a timestamp per row.  One seeded query sample is
shared across every sweep cell, so differences between rows isolate the
encoding rather than sampling noise (the trade-off is that per-cell
errors are correlated across resolutions, which is what we want when
comparing strategies).

Timings use a monotonic clock with one discarded warm-up run and the
mean of three measured runs.  Reported prove_ms covers trace plus
statement construction and proof generation; verify_ms covers
end-to-end proof validation.  ZSTARK_THREADS caps how many sweep cells
run concurrently (default 1, fully sequential).
"""

from __future__ import annotations

import csv
import gc
import json
import logging
import os
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from datetime import datetime, timezone

import numpy as np

from .air import AirConfig, build_trace
from .corpus import load_zones
from .discretize import (
    CENTER,
    SDF,
    GridSpec,
    StrategyKind,
    accuracy_eval,
    build_bundle,
    voting,
)
from .geometry import (
    CATEGORIES,
    BoundingBox,
    ZonePolygon,
    ZoneSet,
    build_zone,
    clip_polygon_to_rect,
    project_lonlat,
)
from .stark import ACCEPT, prove, verify

log = logging.getLogger("zstark")

DEFAULT_STRATEGIES = (CENTER, voting(), SDF)
ACCURACY_RESOLUTIONS = (2, 3, 4, 8, 16, 32, 64, 128, 256)
BENCH_RESOLUTIONS = (8, 16, 32, 64, 128)
DEFAULT_SAMPLE_COUNT = 4000
DEFAULT_BATCH = 64
VERIFY_INNER_LOOP = 5  # verify calls per timed run; a single call is ~2 ms

CSV_HEADER = ["strategy", "r", "accuracy", "prove_ms", "verify_ms",
              "proof_bytes", "trace_rows"]

# Common OSM-ish category spellings accepted on ingest.
_CATEGORY_ALIASES = {
    "forest": "park", "grass": "park", "garden": "park", "meadow": "park",
    "university": "campus", "college": "campus", "school": "campus",
    "highway": "road", "motorway": "road", "street": "road",
    "house": "building", "apartments": "building", "retail": "commercial",
    "factory": "industrial", "warehouse": "industrial",
    "pitch": "leisure", "playground": "leisure", "stadium": "leisure",
    "riverbank": "water", "reservoir": "water", "basin": "water",
}


def max_workers() -> int:
    raw = os.environ.get("ZSTARK_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        log.warning("ignoring non-integer ZSTARK_THREADS=%r", raw)
        return 1


# ---------------------------------------------------------------------------
# Ingestion
# ---------------------------------------------------------------------------

def _resolve_category(props: dict) -> str | None:
    raw = str(props.get("category", "")).strip().lower()
    if raw in CATEGORIES:
        return raw
    return _CATEGORY_ALIASES.get(raw)


def _project_ring(ring, origin):
    return [project_lonlat(float(lon), float(lat), origin) for lon, lat in ring]


def ingest(path, bbox: BoundingBox, origin: tuple[float, float]) -> ZoneSet:
    """Geographic GeoJSON -> projected, clipped, validated ZoneSet.

    Features that fail validation (bad category, self-intersection,
    degenerate after clipping) are skipped with a diagnostic; an empty
    final set is an error.
    """
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("type") != "FeatureCollection":
        raise ValueError(f"{path}: not a GeoJSON FeatureCollection")

    zones: list[ZonePolygon] = []
    seen_ids: set[str] = set()
    for pos, feat in enumerate(doc.get("features", [])):
        props = feat.get("properties") or {}
        geom = feat.get("geometry") or {}
        fid = str(props.get("id", f"feature-{pos}"))
        category = _resolve_category(props)
        if category is None:
            log.warning("ingest: %s: unknown category %r, skipped",
                        fid, props.get("category"))
            continue
        gtype = geom.get("type")
        if gtype == "Polygon":
            polys = [geom.get("coordinates") or []]
        elif gtype == "MultiPolygon":
            polys = geom.get("coordinates") or []
        else:
            log.warning("ingest: %s: unsupported geometry %r, skipped", fid, gtype)
            continue

        for part_no, poly in enumerate(polys):
            part_id = fid if gtype == "Polygon" else f"{fid}#{part_no}"
            if not poly:
                continue
            try:
                exterior = _project_ring(_drop_closure(poly[0]), origin)
                holes = [_project_ring(_drop_closure(h), origin) for h in poly[1:]]
                pieces = clip_polygon_to_rect(
                    build_zone(part_id, category, exterior, holes), bbox)
            except (ValueError, TypeError) as exc:
                log.warning("ingest: %s: rejected (%s)", part_id, exc)
                continue
            if not pieces:
                log.info("ingest: %s: outside bbox after clipping", part_id)
                continue
            ext, piece_holes = pieces[0], pieces[1:]
            try:
                zone = build_zone(part_id, category, ext, piece_holes)
            except ValueError as exc:
                log.warning("ingest: %s: rejected after clip (%s)", part_id, exc)
                continue
            if zone.zone_id in seen_ids:
                log.warning("ingest: duplicate id %s, skipped", zone.zone_id)
                continue
            seen_ids.add(zone.zone_id)
            zones.append(zone)

    if not zones:
        raise ValueError(f"{path}: no usable zones inside the bbox")
    hist = Counter(z.category for z in zones)
    log.info("ingest: %d zones (%s)", len(zones),
             ", ".join(f"{k}={v}" for k, v in sorted(hist.items())))
    return ZoneSet(zones, bbox)


def _drop_closure(ring):
    pts = [(float(x), float(y)) for x, y in ring]
    if len(pts) > 1 and pts[0] == pts[-1]:
        pts.pop()
    return pts


# ---------------------------------------------------------------------------
# Query sampling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuerySample:
    seed: int
    xs: np.ndarray
    ys: np.ndarray

    @property
    def count(self) -> int:
        return self.xs.shape[0]

    def points(self):
        return list(zip(self.xs.tolist(), self.ys.tolist()))


def sample_queries(bbox: BoundingBox, count: int = DEFAULT_SAMPLE_COUNT,
                   seed: int = 0) -> QuerySample:
    """Uniform points over the bbox from a seeded PCG64 generator."""
    rng = np.random.default_rng(seed)
    xs = rng.uniform(bbox.xmin, bbox.xmax, count)
    ys = rng.uniform(bbox.ymin, bbox.ymax, count)
    return QuerySample(seed, xs, ys)


# ---------------------------------------------------------------------------
# Report rows
# ---------------------------------------------------------------------------

@dataclass
class ReportRow:
    strategy: str
    r: int
    accuracy: float | None = None
    prove_ms: float | None = None
    verify_ms: float | None = None
    proof_bytes: int | None = None
    trace_rows: int | None = None
    timestamp: str = ""

    def csv_cells(self) -> list[str]:
        def fmt(v, spec):
            return "" if v is None else format(v, spec)
        return [self.strategy, str(self.r), fmt(self.accuracy, ".4f"),
                fmt(self.prove_ms, ".3f"), fmt(self.verify_ms, ".3f"),
                "" if self.proof_bytes is None else str(self.proof_bytes),
                "" if self.trace_rows is None else str(self.trace_rows)]


def now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _sort_rows(rows):
    return sorted(rows, key=lambda row: (row.strategy, row.r))


def emit_report(rows, csv_path, json_path=None) -> None:
    """Write the CSV report and its JSON mirror (deterministic order)."""
    rows = _sort_rows(rows)
    if not rows:
        raise ValueError("refusing to write an empty report")
    if json_path is None:
        base, _ = os.path.splitext(str(csv_path))
        json_path = base + ".json"
    try:
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_HEADER)
            for row in rows:
                writer.writerow(row.csv_cells())
        with open(json_path, "w", encoding="utf-8") as fh:
            json.dump({"rows": [asdict(r) for r in rows]}, fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"writing report to {csv_path}: {exc}") from exc


def parse_report(csv_path) -> list[ReportRow]:
    rows = []
    with open(csv_path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != CSV_HEADER:
            raise ValueError(f"{csv_path}: unexpected header {header}")
        for cells in reader:
            rows.append(ReportRow(
                strategy=cells[0], r=int(cells[1]),
                accuracy=float(cells[2]) if cells[2] else None,
                prove_ms=float(cells[3]) if cells[3] else None,
                verify_ms=float(cells[4]) if cells[4] else None,
                proof_bytes=int(cells[5]) if cells[5] else None,
                trace_rows=int(cells[6]) if cells[6] else None))
    return rows


def strategy_label(s: StrategyKind) -> str:
    return s.name


# ---------------------------------------------------------------------------
# Accuracy sweep
# ---------------------------------------------------------------------------

def run_accuracy_sweep(zones: ZoneSet, strategies=DEFAULT_STRATEGIES,
                       resolutions=ACCURACY_RESOLUTIONS,
                       sample: QuerySample | None = None) -> list[ReportRow]:
    if sample is None:
        sample = sample_queries(zones.bbox)
    pts = sample.points()

    def cell(job):
        strategy, r = job
        grid = GridSpec(zones.bbox, r)
        bundle = build_bundle(strategy, zones, grid)
        acc = accuracy_eval(zones, bundle, pts)
        log.info("accuracy %s r=%d: %.4f", strategy.name, r, acc)
        return ReportRow(strategy_label(strategy), r, accuracy=acc,
                         timestamp=now_iso())

    jobs = [(s, r) for s in strategies for r in resolutions]
    workers = max_workers()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(cell, jobs))
    else:
        rows = [cell(job) for job in jobs]
    return _sort_rows(rows)


# ---------------------------------------------------------------------------
# Proof benchmark
# ---------------------------------------------------------------------------

def bench_one(zones: ZoneSet, strategy: StrategyKind, r: int, *,
              batch: int = DEFAULT_BATCH, rows: int | None = None,
              seed: int = 7, repeats: int = 3,
              sample: QuerySample | None = None) -> ReportRow:
    """Timings for one (strategy, r) cell: 1 warm-up + `repeats` runs.

    Each run times one prove and a short inner loop of verifies
    (VERIFY_INNER_LOOP calls, averaged): a lone verify finishes in a
    couple of milliseconds, the same scale as scheduler jitter.
    """
    trace_rows = rows if rows is not None else max(_next_pow2(batch), 8)
    if batch > trace_rows:
        raise ValueError(f"batch {batch} exceeds trace rows {trace_rows}")
    grid = GridSpec(zones.bbox, r)
    bundle = build_bundle(strategy, zones, grid)
    cfg = AirConfig(strategy, r, trace_rows)

    rng = np.random.default_rng(seed + r)
    qs = sample_queries(zones.bbox, batch, seed=seed * 1000 + r)
    queries = qs.points()
    zone_idx = rng.integers(0, len(zones.zones), batch)

    acc = None
    if sample is not None:
        acc = accuracy_eval(zones, bundle, sample.points())

    prove_times, verify_times, proof_bytes = [], [], 0
    gc_was_enabled = gc.isenabled()
    gc.collect()
    gc.disable()  # same policy as timeit: no collector pauses inside runs
    try:
        for run in range(repeats + 1):
            t0 = time.perf_counter()
            trace, statement = build_trace(queries, bundle, cfg, zone_idx)
            proof = prove(trace, statement, cfg)
            t1 = time.perf_counter()
            for _ in range(VERIFY_INNER_LOOP):
                result = verify(proof)
            t2 = time.perf_counter()
            if result.reason != ACCEPT:
                raise RuntimeError(
                    f"benchmark proof rejected ({result.reason}) at "
                    f"{strategy.name} r={r}")
            if run == 0:
                proof_bytes = len(proof.to_bytes())
                continue  # warm-up discarded
            prove_times.append((t1 - t0) * 1000.0)
            verify_times.append((t2 - t1) * 1000.0 / VERIFY_INNER_LOOP)
    finally:
        if gc_was_enabled:
            gc.enable()

    row = ReportRow(strategy_label(strategy), r,
                    accuracy=acc,
                    prove_ms=sum(prove_times) / len(prove_times),
                    verify_ms=sum(verify_times) / len(verify_times),
                    proof_bytes=proof_bytes, trace_rows=trace_rows,
                    timestamp=now_iso())
    log.info("bench %s r=%d: prove %.1f ms, verify %.1f ms, %d bytes",
             strategy.name, r, row.prove_ms, row.verify_ms, proof_bytes)
    return row


def run_proof_bench(zones: ZoneSet, strategies=DEFAULT_STRATEGIES,
                    resolutions=BENCH_RESOLUTIONS, *, batch: int = DEFAULT_BATCH,
                    rows: int | None = None, seed: int = 7,
                    sample: QuerySample | None = None) -> list[ReportRow]:
    out = []
    for strategy in strategies:
        for r in resolutions:
            out.append(bench_one(zones, strategy, r, batch=batch, rows=rows,
                                 seed=seed, sample=sample))
    return _sort_rows(out)


def _next_pow2(n: int) -> int:
    return 1 << max(n - 1, 0).bit_length() if n > 1 else 1


def load_zones_file(path) -> ZoneSet:
    """Shared loader with a friendlier error for geographic input."""
    try:
        return load_zones(path)
    except KeyError as exc:
        raise ValueError(f"{path}: malformed zones file ({exc})") from exc
