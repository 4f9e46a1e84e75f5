"""End-to-end proof tests: completeness, serialization, and one
deterministic instance of every rejection class.

The bulk statistical soundness runs (99/100 per mutation class) live in
test_acceptance; here each class is exercised once with a hand-built
mutation so failures point at the exact broken check.
"""

import numpy as np
import pytest

from zstark.air import AirConfig, build_trace, payload_leaf_indices
from zstark.commit import merkle_build, merkle_open
from zstark.discretize import (
    CENTER,
    SDF,
    GridSpec,
    build_bundle,
    table_payload,
    voting,
)
from zstark.field import P
from zstark.geometry import BoundingBox, ZoneSet, build_zone
from zstark.stark import (
    ACCEPT,
    BAD_LOOKUP_PATH,
    BAD_TRACE_OPENING,
    DEGREE_EXCEEDED,
    FRI_FOLD_MISMATCH,
    OOD_MISMATCH,
    REJECT_REASONS,
    StarkProof,
    prove,
    verify,
)

UNIT = BoundingBox(0.0, 0.0, 1.0, 1.0)


@pytest.fixture(scope="module")
def zones():
    a = build_zone("a", "park", [(0.1, 0.1), (0.6, 0.1), (0.6, 0.6), (0.1, 0.6)])
    b = build_zone("b", "building", [(0.5, 0.5), (0.9, 0.5), (0.9, 0.95), (0.5, 0.95)])
    return ZoneSet([a, b], UNIT)


def make_proof(zones, strategy, r=4, rows=16, n_queries=10, seed=0, **cfg_kw):
    cfg = AirConfig(strategy, r, rows, **cfg_kw)
    bundle = build_bundle(strategy, zones, GridSpec(UNIT, r))
    rng = np.random.default_rng(seed)
    queries = [tuple(p) for p in rng.uniform(0.02, 0.98, (n_queries, 2))]
    zidx = rng.integers(0, 2, n_queries)
    trace, statement = build_trace(queries, bundle, cfg, zone_indices=zidx)
    return prove(trace, statement, cfg), bundle


def clone(proof):
    """Deep copy through the wire format, so mutations never alias."""
    return StarkProof.from_bytes(proof.to_bytes())


@pytest.mark.parametrize("strategy", [CENTER, voting(0.5), SDF])
def test_completeness(zones, strategy):
    proof, _ = make_proof(zones, strategy)
    res = verify(proof)
    assert res.accepted and res.reason == ACCEPT
    assert bool(res)


def test_completeness_zero_fold_edge(zones):
    # rows == final degree: FRI sends the polynomial in the clear
    proof, _ = make_proof(zones, CENTER, rows=8, n_queries=8)
    assert verify(proof).accepted


def test_check_counters(zones):
    # rows=16, final degree 8 -> 1 fold, 0 committed layers, 2 Merkle
    # checks per query (trace + composition)
    proof, _ = make_proof(zones, CENTER, rows=16)
    res = verify(proof)
    assert res.query_path_checks == proof.config.fri_query_count * 2
    assert res.lookup_path_checks == len(proof.statement.rows)

    # rows=64 -> 3 folds, 2 committed layers, 4 checks per query
    big, _ = make_proof(zones, SDF, rows=64)
    assert len(big.fri_roots) == 2
    res = verify(big)
    assert res.query_path_checks == big.config.fri_query_count * 4
    assert res.lookup_path_checks == 4 * len(big.statement.rows)


def test_proof_determinism(zones):
    p1, _ = make_proof(zones, SDF, seed=9)
    p2, _ = make_proof(zones, SDF, seed=9)
    assert p1.to_bytes() == p2.to_bytes()


def test_serialization_round_trip(zones):
    proof, _ = make_proof(zones, SDF, rows=64)
    blob = proof.to_bytes()
    parsed = StarkProof.from_bytes(blob)
    assert parsed.to_bytes() == blob
    assert verify(parsed).accepted


def test_serialization_rejects_garbage(zones):
    proof, _ = make_proof(zones, CENTER)
    blob = proof.to_bytes()
    with pytest.raises(ValueError):
        StarkProof.from_bytes(blob + b"\x00")
    with pytest.raises(ValueError):
        StarkProof.from_bytes(blob[:-5])
    with pytest.raises(ValueError):
        StarkProof.from_bytes(b"nope" + blob[4:])


def test_save_load(zones, tmp_path):
    proof, _ = make_proof(zones, CENTER)
    path = tmp_path / "p.zpf"
    proof.save(path)
    assert verify(StarkProof.load(path)).accepted


def test_prove_refuses_invalid_trace(zones):
    cfg = AirConfig(CENTER, 4, 16)
    bundle = build_bundle(CENTER, zones, GridSpec(UNIT, 4))
    rng = np.random.default_rng(1)
    queries = [tuple(p) for p in rng.uniform(0.05, 0.95, (5, 2))]
    trace, statement = build_trace(queries, bundle, cfg)
    trace.columns["u"][2] = (int(trace.columns["u"][2]) + 1) % P
    with pytest.raises(ValueError, match="sum_u|decomp"):
        prove(trace, statement, cfg)


# ---------------------------------------------------------------------------
# One deterministic rejection per mutation class
# ---------------------------------------------------------------------------


def test_reject_output_flip(zones):
    proof, _ = make_proof(zones, SDF, rows=64)
    bad = clone(proof)
    bad.statement.rows[3].out ^= 1
    res = verify(bad)
    assert not res.accepted and res.reason == OOD_MISMATCH


def test_reject_payload_swap(zones):
    """Valid Merkle path, wrong table cell for the claimed query."""
    proof, bundle = make_proof(zones, SDF, rows=64)
    tree = merkle_build(table_payload(bundle.table), item_size=8)
    bad = clone(proof)
    row = bad.statement.rows[0]
    want = payload_leaf_indices(proof.config, row.zone_index, row.i, row.j)
    other = (want[0] + 7) % tree.leaf_count
    assert other not in want
    row.openings[0] = merkle_open(tree, other)
    res = verify(bad)
    assert not res.accepted and res.reason == BAD_LOOKUP_PATH


def test_reject_corrupt_lookup_payload(zones):
    proof, _ = make_proof(zones, CENTER)
    bad = clone(proof)
    path = bad.statement.rows[1].openings[0]
    path.payload = bytes(8)  # zero out the committed bit
    if bad.statement.rows[1].out == 0:
        path.payload = (1).to_bytes(8, "little")
    res = verify(bad)
    assert not res.accepted and res.reason == BAD_LOOKUP_PATH


def test_reject_trace_opening_tamper(zones):
    proof, _ = make_proof(zones, SDF, rows=64)
    bad = clone(proof)
    payload = bytearray(bad.openings[5].trace_path.payload)
    payload[0] ^= 1
    bad.openings[5].trace_path.payload = bytes(payload)
    res = verify(bad)
    assert not res.accepted and res.reason == BAD_TRACE_OPENING


def test_reject_fri_layer_tamper(zones):
    proof, _ = make_proof(zones, SDF, rows=64)
    assert proof.fri_roots, "need at least one committed fold layer"
    bad = clone(proof)
    payload = bytearray(bad.openings[0].fri_paths[0].payload)
    payload[3] ^= 0x10
    bad.openings[0].fri_paths[0].payload = bytes(payload)
    res = verify(bad)
    assert not res.accepted and res.reason == FRI_FOLD_MISMATCH


def test_reject_ood_tamper(zones):
    proof, _ = make_proof(zones, CENTER, rows=64)
    bad = clone(proof)
    bad.ood_witness[2] = (bad.ood_witness[2] + 1) % P
    res = verify(bad)
    assert not res.accepted and res.reason == OOD_MISMATCH

    bad2 = clone(proof)
    bad2.ood_composition = (bad2.ood_composition + 1) % P
    assert verify(bad2).reason == OOD_MISMATCH


def test_reject_degree_excess(zones):
    proof, _ = make_proof(zones, CENTER, rows=64)
    bad = clone(proof)
    bad.fri_final = list(bad.fri_final) + [1]
    res = verify(bad)
    assert not res.accepted and res.reason == DEGREE_EXCEEDED


def test_reject_reasons_catalog():
    assert set(REJECT_REASONS) == {BAD_LOOKUP_PATH, DEGREE_EXCEEDED, OOD_MISMATCH,
                                   BAD_TRACE_OPENING, FRI_FOLD_MISMATCH}


def test_prove_time_grows_with_rows(zones):
    import time
    cfg_small = AirConfig(CENTER, 4, 32)
    cfg_big = AirConfig(CENTER, 4, 128)
    bundle = build_bundle(CENTER, zones, GridSpec(UNIT, 4))
    rng = np.random.default_rng(2)
    queries = [tuple(p) for p in rng.uniform(0.05, 0.95, (16, 2))]

    def t(cfg):
        trace, statement = build_trace(queries, bundle, cfg)
        start = time.perf_counter()
        prove(trace, statement, cfg)
        return time.perf_counter() - start

    t(cfg_small)  # warm caches
    assert t(cfg_big) > t(cfg_small)
