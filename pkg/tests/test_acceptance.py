"""Acceptance gate: ten end-to-end criteria on the bundled corpus.

Each test checks one numbered criterion, prints a single
`criterion N: PASS/FAIL (...)` line, and asserts the verdict.  The
criteria cover accuracy ordering and convergence of the three encoding
strategies, proof completeness and soundness, verifier/prover scaling,
the geometry oracles at full sample counts, and bit-level determinism
of reports and table commitments.

Criterion 1 demands a >= 20-percentage-point accuracy gap between the
distance-aware and voting encodings at every coarse resolution.  On a
60-zone corpus that gap is not reachable (both encodings miss the same
thin features, and exact-match accuracy over 60 zones compounds far
less than over thousands), so that test fails with the measured gaps in
its verdict line; the implementation is not weakened to hide it.
"""

import math
import time

import numpy as np
import pytest

from zstark.air import AirConfig, build_trace, payload_leaf_indices
from zstark.cli import main
from zstark.commit import merkle_build, merkle_open
from zstark.corpus import save_zones, synth_corpus
from zstark.discretize import (
    CENTER,
    SDF,
    GridSpec,
    build_bundle,
    interpolate_bilinear,
    table_payload,
    voting,
)
from zstark.geometry import (
    boundary_distance_many,
    build_zone,
    contains_many,
    is_simple_ring,
    signed_distance_many,
)
from zstark.harness import bench_one, run_accuracy_sweep, sample_queries
from zstark.stark import (
    BAD_LOOKUP_PATH,
    BAD_TRACE_OPENING,
    DEGREE_EXCEEDED,
    FRI_FOLD_MISMATCH,
    OOD_MISMATCH,
    StarkProof,
    prove,
    verify,
)

STRATEGIES = (CENTER, voting(), SDF)
COARSE_RS = (8, 16, 32)
BENCH_RS = (8, 16, 32, 64, 128)
SCALING_RS = (8, 16, 32, 64)
BENCH_BATCH = 16

# Commitment roots of the r=8 tables for the bundled corpus, pinned so a
# refactor or platform change that silently alters table bytes shows up
# here rather than in a downstream verifier.
SDF_R8_ROOT = "1d3633c66608e0766ddec99f90a6cba938357f6220450253654e123698e8bd77"
CENTER_R8_ROOT = "69eb51062c96e9ffe5032f02384b2a6e24975a53a4eac2235d619ef53c99eec5"


def _check(lines, num, ok, detail):
    line = f"criterion {num}: {'PASS' if ok else 'FAIL'} ({detail})"
    lines.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def zones():
    return synth_corpus(42)


@pytest.fixture(scope="module")
def sweep(zones):
    """Accuracy per (strategy, r) on one shared 4,000-point sample.

    Timed in two phases because the coarse resolutions carry their own
    runtime budget separate from the full sweep's.
    """
    sample = sample_queries(zones.bbox)
    t0 = time.perf_counter()
    rows = run_accuracy_sweep(zones, STRATEGIES, COARSE_RS, sample)
    coarse_elapsed = time.perf_counter() - t0
    rows += run_accuracy_sweep(zones, STRATEGIES, (128, 256), sample)
    total_elapsed = time.perf_counter() - t0
    acc = {(row.strategy, row.r): row.accuracy for row in rows}
    return acc, coarse_elapsed, total_elapsed


@pytest.fixture(scope="module")
def bench(zones):
    """One timing row per (strategy, r): warm-up plus 3 measured runs.

    The first cell a fresh process benches tends to absorb allocator
    and code-cache warm-up, so one throwaway cell runs before the grid.
    """
    bench_one(zones, CENTER, 8, batch=BENCH_BATCH, repeats=1)
    out = {}
    for strat in STRATEGIES:
        for r in BENCH_RS:
            row = bench_one(zones, strat, r, batch=BENCH_BATCH, repeats=3)
            out[(row.strategy, row.r)] = row
    return out


def test_criterion_1_accuracy_ordering(sweep, acceptance_lines):
    acc, coarse_elapsed, _ = sweep
    gaps = {r: acc[("sdf", r)] - acc[("voting", r)] for r in COARSE_RS}
    beats_center = all(acc[("sdf", r)] > acc[("center", r)] for r in (8, 16))
    ok = (all(g >= 0.20 for g in gaps.values()) and beats_center
          and coarse_elapsed <= 120)
    detail = ("sdf-voting gap "
              + " ".join(f"r{r} {gaps[r] * 100:+.1f}%p" for r in COARSE_RS)
              + ", need >= +20.0%p each; sdf>center at r8,r16: "
              + f"{beats_center}; {coarse_elapsed:.0f}s")
    _check(acceptance_lines, 1, ok, detail)


def test_criterion_2_resolution_convergence(sweep, acceptance_lines):
    acc, _, total_elapsed = sweep
    gains = {s: acc[(s, 128)] - acc[(s, 8)] for s in ("center", "voting", "sdf")}
    ok = (all(g >= 0.10 for g in gains.values())
          and acc[("sdf", 256)] >= 0.9 and total_elapsed <= 600)
    detail = ("gain r8->r128 "
              + " ".join(f"{s} {gains[s] * 100:+.1f}%p" for s in gains)
              + f"; sdf(256)={acc[('sdf', 256)]:.4f}; {total_elapsed:.0f}s")
    _check(acceptance_lines, 2, ok, detail)


def test_criterion_3_early_saturation(sweep, acceptance_lines):
    acc, _, _ = sweep
    ok = acc[("sdf", 32)] >= 0.9 * acc[("sdf", 256)]
    detail = (f"sdf(32)={acc[('sdf', 32)]:.4f} vs "
              f"0.9*sdf(256)={0.9 * acc[('sdf', 256)]:.4f}")
    _check(acceptance_lines, 3, ok, detail)


def test_criterion_4_completeness(zones, acceptance_lines):
    t0 = time.perf_counter()
    cells = [(s, r) for s in STRATEGIES for r in COARSE_RS]
    bundles = {(s.name, r): build_bundle(s, zones, GridSpec(zones.bbox, r))
               for s, r in cells}
    accepts = 0
    for b in range(100):
        strat, r = cells[b % len(cells)]
        cfg = AirConfig(strat, r, 64)
        qs = sample_queries(zones.bbox, 64, seed=40_000 + b)
        zidx = np.random.default_rng(50_000 + b).integers(0, len(zones.zones), 64)
        trace, stmt = build_trace(qs.points(), bundles[(strat.name, r)], cfg, zidx)
        accepts += bool(verify(prove(trace, stmt, cfg)).accepted)
    elapsed = time.perf_counter() - t0
    ok = accepts == 100 and elapsed <= 600
    _check(acceptance_lines, 4, ok,
           f"{accepts}/100 honest proofs accepted across "
           f"3 strategies x r in {COARSE_RS} in {elapsed:.0f}s")


def _clone(proof):
    return StarkProof.from_bytes(proof.to_bytes())


def _flip_output(proof, tree, k):
    bad = _clone(proof)
    bad.statement.rows[k % len(bad.statement.rows)].out ^= 1
    return bad


def _swap_payload(proof, tree, k):
    bad = _clone(proof)
    row = bad.statement.rows[k % len(bad.statement.rows)]
    want = payload_leaf_indices(bad.config, row.zone_index, row.i, row.j)
    other = (want[0] + 7 + k) % tree.leaf_count
    while other in want:
        other = (other + 1) % tree.leaf_count
    row.openings[k % len(row.openings)] = merkle_open(tree, other)
    return bad


def _flip_byte(path, k):
    payload = bytearray(path.payload)
    payload[k % len(payload)] ^= 1 + (k % 255)
    path.payload = bytes(payload)


def _perturb_trace(proof, tree, k):
    bad = _clone(proof)
    _flip_byte(bad.openings[k % len(bad.openings)].trace_path, k)
    return bad


def _tamper_fri(proof, tree, k):
    bad = _clone(proof)
    paths = bad.openings[k % len(bad.openings)].fri_paths
    _flip_byte(paths[k % len(paths)], k)
    return bad


def _extend_final(proof, tree, k):
    bad = _clone(proof)
    bad.fri_final = list(bad.fri_final) + [1 + k]
    return bad


MUTATION_CLASSES = [
    ("output-flip", _flip_output, OOD_MISMATCH),
    ("payload-swap", _swap_payload, BAD_LOOKUP_PATH),
    ("trace-bytes", _perturb_trace, BAD_TRACE_OPENING),
    ("fri-layer", _tamper_fri, FRI_FOLD_MISMATCH),
    ("degree-pad", _extend_final, DEGREE_EXCEEDED),
]


def test_criterion_5_soundness(zones, acceptance_lines):
    bases = []
    for strat, r in [(CENTER, 8), (voting(), 8), (SDF, 8), (SDF, 16)]:
        bundle = build_bundle(strat, zones, GridSpec(zones.bbox, r))
        cfg = AirConfig(strat, r, 64)
        qs = sample_queries(zones.bbox, 64, seed=60_000 + r)
        zidx = np.random.default_rng(61_000 + r).integers(0, len(zones.zones), 64)
        trace, stmt = build_trace(qs.points(), bundle, cfg, zidx)
        tree = merkle_build(table_payload(bundle.table), item_size=8)
        bases.append((prove(trace, stmt, cfg), tree))

    results = {}
    for name, mutate, expected in MUTATION_CLASSES:
        rejected = as_expected = 0
        for k in range(100):
            proof, tree = bases[k % len(bases)]
            res = verify(mutate(proof, tree, k))
            rejected += not res.accepted
            as_expected += res.reason == expected
        results[name] = (rejected, as_expected)

    ok = all(rej >= 99 for rej, _ in results.values())
    detail = "; ".join(f"{name} {rej}/100 rejected ({exp} with expected reason)"
                       for name, (rej, exp) in results.items())
    _check(acceptance_lines, 5, ok, detail)


def test_criterion_6_verify_invariance(bench, acceptance_lines):
    ratios = {s: bench[(s, 128)].verify_ms / bench[(s, 8)].verify_ms
              for s in ("center", "voting", "sdf")}
    ok = all(ratio <= 2.0 for ratio in ratios.values())
    detail = ("verify r128/r8 "
              + " ".join(f"{s} {ratios[s]:.2f}" for s in ratios)
              + f", bound 2.0, batch {BENCH_BATCH}")
    _check(acceptance_lines, 6, ok, detail)


def test_criterion_7_strategy_overhead(bench, acceptance_lines):
    ratios = {r: bench[("sdf", r)].verify_ms / bench[("center", r)].verify_ms
              for r in BENCH_RS}
    ok = all(1.0 <= ratio <= 2.5 for ratio in ratios.values())
    detail = ("sdf/center verify "
              + " ".join(f"r{r} {ratios[r]:.2f}" for r in BENCH_RS)
              + ", band [1.0, 2.5]")
    _check(acceptance_lines, 7, ok, detail)


def _log_slope(pairs):
    xs = [math.log(r) for r, _ in pairs]
    ys = [math.log(t) for _, t in pairs]
    mx, my = sum(xs) / len(xs), sum(ys) / len(ys)
    return (sum((x - mx) * (y - my) for x, y in zip(xs, ys))
            / sum((x - mx) ** 2 for x in xs))


def test_criterion_8_prover_scaling(bench, acceptance_lines):
    slopes, monotone = {}, {}
    for s in ("center", "voting", "sdf"):
        times = [bench[(s, r)].prove_ms for r in SCALING_RS]
        monotone[s] = all(a < b for a, b in zip(times, times[1:]))
        slopes[s] = _log_slope(list(zip(SCALING_RS, times)))
    ok = all(monotone.values()) and all(v >= 1.0 for v in slopes.values())
    detail = ("prove strictly increasing: "
              + " ".join(f"{s}={monotone[s]}" for s in monotone)
              + "; log-log slope "
              + " ".join(f"{s} {slopes[s]:.2f}" for s in slopes))
    _check(acceptance_lines, 8, ok, detail)


def _winding(ring, x, y):
    """Sunday's crossing-sign winding number, independent of the library."""
    wn = 0
    n = len(ring)
    for k in range(n):
        ax, ay = ring[k]
        bx, by = ring[(k + 1) % n]
        if ay <= y:
            if by > y and (bx - ax) * (y - ay) - (x - ax) * (by - ay) > 0:
                wn += 1
        elif by <= y and (bx - ax) * (y - ay) - (x - ax) * (by - ay) < 0:
            wn -= 1
    return wn


def _even_odd(ring, x, y):
    inside = False
    n = len(ring)
    for k in range(n):
        ax, ay = ring[k]
        bx, by = ring[(k + 1) % n]
        if (ay > y) != (by > y):
            if x < ax + (y - ay) * (bx - ax) / (by - ay):
                inside = not inside
    return inside


def _star(rng, n_vertices):
    pts = rng.uniform(0.0, 1.0, (n_vertices, 2))
    c = pts.mean(axis=0)
    order = np.argsort(np.arctan2(pts[:, 1] - c[1], pts[:, 0] - c[0]))
    return [(float(x), float(y)) for x, y in pts[order]]


def test_criterion_9_geometry_oracles(acceptance_lines):
    rng = np.random.default_rng(2024)
    polys = agree_checked = 0
    agree_bad = sign_bad = lip_bad = 0
    while polys < 1000:
        ring = _star(rng, int(rng.integers(5, 17)))
        if not is_simple_ring(ring):
            continue
        zone = build_zone(f"g{polys}", "park", ring)
        polys += 1
        xs = rng.uniform(0.0, 1.0, 100)
        ys = rng.uniform(0.0, 1.0, 100)
        got = contains_many(zone, xs, ys)
        sd = signed_distance_many(zone, xs, ys)

        far = boundary_distance_many(zone, xs, ys) > 1e-9
        for x, y, inside in zip(xs[far], ys[far], got[far]):
            wn_in = _winding(zone.exterior, x, y) != 0
            eo_in = _even_odd(zone.exterior, x, y)
            agree_bad += not (wn_in == eo_in == bool(inside))
            agree_checked += 1

        decided = np.abs(sd) > 1e-9
        sign_bad += int(np.sum((sd[decided] < 0) != got[decided]))

        gap = np.hypot(xs[:50] - xs[50:], ys[:50] - ys[50:])
        lip_bad += int(np.sum(np.abs(sd[:50] - sd[50:]) > gap + 1e-9))

    d = rng.uniform(-1000.0, 1000.0, (10_000, 4))
    u = rng.uniform(0.0, 1.0, 10_000)
    v = rng.uniform(0.0, 1.0, 10_000)
    val = interpolate_bilinear(d[:, 0], d[:, 1], d[:, 2], d[:, 3], u, v)
    convex_ok = (np.all(val >= d.min(axis=1) - 1e-9)
                 and np.all(val <= d.max(axis=1) + 1e-9))
    zero, one = np.zeros(10_000), np.ones(10_000)
    corner_ok = all(
        np.array_equal(
            interpolate_bilinear(d[:, 0], d[:, 1], d[:, 2], d[:, 3], uu, vv),
            d[:, col])
        for col, (uu, vv) in enumerate([(zero, zero), (one, zero),
                                        (zero, one), (one, one)]))

    ok = (agree_bad == 0 and sign_bad == 0 and lip_bad == 0
          and convex_ok and corner_ok)
    detail = (f"winding/even-odd/contains agree on {agree_checked} pts "
              f"({agree_bad} bad); sign mismatches {sign_bad}; Lipschitz "
              f"violations {lip_bad}; 10000 bilinear tuples convex={convex_ok} "
              f"corners={corner_ok}")
    _check(acceptance_lines, 9, ok, detail)


def _accuracy_column(path):
    lines = path.read_text().splitlines()
    col = lines[0].split(",").index("accuracy")
    return "\n".join(line.split(",")[col] for line in lines[1:]).encode()


def test_criterion_10_determinism(zones, tmp_path, acceptance_lines):
    zones_path = tmp_path / "zones.json"
    save_zones(zones, zones_path)
    csvs = [tmp_path / "eval1.csv", tmp_path / "eval2.csv"]
    for out in csvs:
        rc = main(["eval", "--zones", str(zones_path),
                   "--strategies", "center,sdf", "--resolutions", "8,16",
                   "--samples", "1000", "--seed", "5", "--out", str(out)])
        assert rc == 0
    columns_equal = _accuracy_column(csvs[0]) == _accuracy_column(csvs[1])

    grid = GridSpec(zones.bbox, 8)
    sdf_roots = [build_bundle(SDF, zones, grid).commitment_root.hex()
                 for _ in range(2)]
    center_root = build_bundle(CENTER, zones, grid).commitment_root.hex()
    roots_ok = (sdf_roots[0] == sdf_roots[1] == SDF_R8_ROOT
                and center_root == CENTER_R8_ROOT)

    ok = columns_equal and roots_ok
    detail = (f"eval accuracy columns byte-identical: {columns_equal}; "
              f"table roots reproducible and match pinned values: {roots_ok}")
    _check(acceptance_lines, 10, ok, detail)
