"""Merkle tree and transcript tests against hand-rolled SHA-256 oracles."""

import hashlib
import struct

import pytest

from zstark.commit import (
    DIGEST_SIZE,
    MerklePath,
    Transcript,
    merkle_build,
    merkle_open,
    merkle_verify,
)
from zstark.field import P


def ref_root(leaves):
    """Independent reference: 0x00-prefixed leaves, 0x01-prefixed nodes,
    padded to a power of two (minimum 2) with the empty-payload leaf digest."""
    digests = [hashlib.sha256(b"\x00" + x).digest() for x in leaves]
    pad = hashlib.sha256(b"\x00").digest()
    size = 2
    while size < len(digests):
        size *= 2
    digests += [pad] * (size - len(digests))
    while len(digests) > 1:
        digests = [hashlib.sha256(b"\x01" + digests[k] + digests[k + 1]).digest()
                   for k in range(0, len(digests), 2)]
    return digests[0]


def test_root_matches_reference_five_leaves():
    leaves = [bytes([k]) * 8 for k in range(5)]
    tree = merkle_build(leaves)
    assert tree.root == ref_root(leaves)
    assert tree.leaf_count == 5
    assert tree.depth == 3  # padded to 8


def test_root_matches_reference_various_sizes():
    for n in (1, 2, 3, 4, 7, 8, 9):
        leaves = [k.to_bytes(4, "little") for k in range(n)]
        assert merkle_build(leaves).root == ref_root(leaves)


def test_flat_buffer_equals_leaf_list():
    leaves = [bytes([k, k + 1]) for k in range(6)]
    a = merkle_build(leaves)
    b = merkle_build(b"".join(leaves), item_size=2)
    assert a.root == b.root
    assert b.payload(3) == leaves[3]


def test_build_rejects_bad_input():
    with pytest.raises(ValueError):
        merkle_build([])
    with pytest.raises(ValueError):
        merkle_build([b"ab", b"abc"])
    with pytest.raises(ValueError):
        merkle_build(b"abcde", item_size=2)


def test_open_verify_all_indices():
    leaves = [bytes([k]) * 3 for k in range(9)]
    tree = merkle_build(leaves)
    for k in range(9):
        path = merkle_open(tree, k)
        assert path.payload == leaves[k]
        assert merkle_verify(tree.root, path)


def test_verify_rejects_tampering():
    leaves = [bytes([k]) * 4 for k in range(8)]
    tree = merkle_build(leaves)
    good = merkle_open(tree, 5)

    bad_payload = MerklePath(5, b"\xff" * 4, list(good.siblings))
    assert not merkle_verify(tree.root, bad_payload)

    sibs = list(good.siblings)
    sibs[1] = bytes(DIGEST_SIZE)
    assert not merkle_verify(tree.root, MerklePath(5, good.payload, sibs))

    # valid path presented under the wrong index
    assert not merkle_verify(tree.root, MerklePath(4, good.payload, good.siblings))
    # index outside the tree (extra high bit)
    assert not merkle_verify(tree.root, MerklePath(5 + 8, good.payload, good.siblings))


def test_path_serialization_round_trip():
    leaves = [bytes([k]) * 4 for k in range(8)]
    tree = merkle_build(leaves)
    path = merkle_open(tree, 6)
    buf = path.to_bytes()
    parsed, off = MerklePath.read_from(buf, 0)
    assert off == len(buf)
    assert parsed == path
    assert merkle_verify(tree.root, parsed)


# ---------------------------------------------------------------------------
# Transcript
# ---------------------------------------------------------------------------


def test_transcript_deterministic():
    a, b = Transcript(), Transcript()
    for t in (a, b):
        t.absorb(b"config", b"xyz")
        t.absorb(b"root", b"\x01" * 32)
    assert a.challenge_field() == b.challenge_field()
    assert a.challenge_indices(4, 100) == b.challenge_indices(4, 100)


def test_transcript_diverges_on_different_absorbs():
    a, b = Transcript(), Transcript()
    a.absorb(b"root", b"\x01" * 32)
    b.absorb(b"root", b"\x02" * 32)
    assert a.challenge_field() != b.challenge_field()


def test_transcript_label_data_framing():
    # absorb("ab", "c") must differ from absorb("a", "bc"): lengths are framed
    a, b = Transcript(), Transcript()
    a.absorb(b"ab", b"c")
    b.absorb(b"a", b"bc")
    assert a.challenge_field() != b.challenge_field()


def test_transcript_golden_vector():
    """Recompute the first field challenge with raw hashlib."""
    t = Transcript()
    t.absorb(b"lbl", b"data")
    state = hashlib.sha256(b"zstark-transcript-v1").digest()
    frame = struct.pack("<I", 3) + b"lbl" + struct.pack("<I", 4) + b"data"
    state = hashlib.sha256(state + frame).digest()
    block = hashlib.sha256(state + b"fe" + struct.pack("<Q", 0)).digest()
    assert t.challenge_field() == int.from_bytes(block[:8], "little") % P


def test_challenge_field_in_range():
    t = Transcript()
    t.absorb(b"x", b"y")
    for _ in range(100):
        assert 0 <= t.challenge_field() < P


def test_challenge_indices_distinct_and_bounded():
    t = Transcript()
    t.absorb(b"seed", b"0")
    idx = t.challenge_indices(32, 1024)
    assert len(idx) == 32
    assert len(set(idx)) == 32
    assert all(0 <= k < 1024 for k in idx)
    # tight bound forces the dedupe path to draw many blocks
    t2 = Transcript()
    t2.absorb(b"seed", b"0")
    tight = t2.challenge_indices(32, 32)
    assert sorted(tight) == list(range(32))


def test_challenge_indices_count_above_bound_rejected():
    with pytest.raises(ValueError):
        Transcript().challenge_indices(33, 32)


def test_rejection_sampling_mode_in_range():
    t = Transcript(use_rejection=True)
    t.absorb(b"a", b"b")
    vals = [t.challenge_field() for _ in range(50)]
    assert all(0 <= v < P for v in vals)
