"""SHA-256 Merkle commitments and the Fiat-Shamir transcript.

Merkle trees use domain-separated hashing: leaf digests are
SHA256(0x00 || payload), inner nodes SHA256(0x01 || left || right).
The leaf layer is padded with SHA256(0x00) (the empty-payload leaf) up
to the next power of two, so a single-leaf tree still has one level of
structure.  All leaves of one tree carry equal-sized payloads, which
keeps the storage a flat buffer even for million-leaf tables.

Transcript framing (needed to reproduce challenge streams externally):

    state_0 = SHA256(b"zstark-transcript-v1")
    absorb(label, data):  state = SHA256(state || LE32(len(label)) || label
                                         || LE32(len(data)) || data)
    challenge block k:    SHA256(state || tag || LE64(k))   with a global
                          counter k and tag b"fe" (field) or b"ix" (index)

Field challenges take the first 8 bytes of a block as a little-endian
integer reduced mod p; the bias is below 2^-32.  With use_rejection
set, blocks are instead discarded until the integer is already < p.
Index challenges fold 4 indices out of each block and re-draw on
duplicates, so the returned indices are distinct.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

from .field import P

DIGEST_SIZE = 32
_LEAF_PREFIX = b"\x00"
_NODE_PREFIX = b"\x01"


def _leaf_digest(payload: bytes) -> bytes:
    return hashlib.sha256(_LEAF_PREFIX + payload).digest()


@dataclass
class MerkleTree:
    """Committed leaf payloads plus every digest level, root last."""

    leaf_count: int
    item_size: int
    payload_buf: bytes
    levels: list[bytes]

    @property
    def root(self) -> bytes:
        return self.levels[-1]

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    def payload(self, index: int) -> bytes:
        off = index * self.item_size
        return self.payload_buf[off:off + self.item_size]


@dataclass
class MerklePath:
    """Opening of one leaf: payload plus bottom-up sibling digests."""

    leaf_index: int
    payload: bytes
    siblings: list[bytes]

    def to_bytes(self) -> bytes:
        out = [struct.pack("<II", self.leaf_index, len(self.payload)), self.payload,
               struct.pack("<B", len(self.siblings))]
        out.extend(self.siblings)
        return b"".join(out)

    @classmethod
    def read_from(cls, buf: bytes, off: int) -> tuple["MerklePath", int]:
        index, plen = struct.unpack_from("<II", buf, off)
        off += 8
        payload = bytes(buf[off:off + plen])
        off += plen
        (count,) = struct.unpack_from("<B", buf, off)
        off += 1
        siblings = []
        for _ in range(count):
            siblings.append(bytes(buf[off:off + DIGEST_SIZE]))
            off += DIGEST_SIZE
        return cls(index, payload, siblings), off


def merkle_build(leaves, item_size: int | None = None) -> MerkleTree:
    """Build a tree over equal-sized leaf payloads.

    `leaves` is either a sequence of bytes objects or a single flat
    buffer with `item_size` set.
    """
    if item_size is None:
        leaves = list(leaves)
        if not leaves:
            raise ValueError("cannot commit to zero leaves")
        item_size = len(leaves[0])
        if any(len(x) != item_size for x in leaves):
            raise ValueError("leaf payloads must share one size")
        buf = b"".join(leaves)
        count = len(leaves)
    else:
        buf = bytes(leaves)
        if item_size <= 0 or len(buf) % item_size:
            raise ValueError("buffer is not a whole number of leaves")
        count = len(buf) // item_size
        if count == 0:
            raise ValueError("cannot commit to zero leaves")

    padded = 1
    while padded < max(count, 2):
        padded *= 2

    sha = hashlib.sha256
    level = bytearray()
    for k in range(count):
        level += sha(_LEAF_PREFIX + buf[k * item_size:(k + 1) * item_size]).digest()
    if padded > count:
        level += sha(_LEAF_PREFIX).digest() * (padded - count)

    levels = [bytes(level)]
    while len(levels[-1]) > DIGEST_SIZE:
        prev = levels[-1]
        nxt = bytearray()
        for k in range(0, len(prev), 2 * DIGEST_SIZE):
            nxt += sha(_NODE_PREFIX + prev[k:k + 2 * DIGEST_SIZE]).digest()
        levels.append(bytes(nxt))
    return MerkleTree(count, item_size, buf, levels)


def merkle_open(tree: MerkleTree, index: int) -> MerklePath:
    if not 0 <= index < tree.leaf_count:
        raise IndexError(f"leaf {index} out of range")
    siblings = []
    k = index
    for level in tree.levels[:-1]:
        sib = k ^ 1
        siblings.append(level[sib * DIGEST_SIZE:(sib + 1) * DIGEST_SIZE])
        k >>= 1
    return MerklePath(index, tree.payload(index), siblings)


def merkle_verify(root: bytes, path: MerklePath) -> bool:
    node = _leaf_digest(path.payload)
    k = path.leaf_index
    if k < 0:
        return False
    for sib in path.siblings:
        if len(sib) != DIGEST_SIZE:
            return False
        if k & 1:
            node = hashlib.sha256(_NODE_PREFIX + sib + node).digest()
        else:
            node = hashlib.sha256(_NODE_PREFIX + node + sib).digest()
        k >>= 1
    return k == 0 and node == root


# ---------------------------------------------------------------------------
# Fiat-Shamir transcript
# ---------------------------------------------------------------------------

class Transcript:
    """Deterministic challenge stream over absorbed, length-prefixed messages."""

    def __init__(self, use_rejection: bool = False):
        self._state = hashlib.sha256(b"zstark-transcript-v1").digest()
        self._counter = 0
        self.use_rejection = use_rejection

    def absorb(self, label: bytes, data: bytes) -> None:
        frame = struct.pack("<I", len(label)) + label + struct.pack("<I", len(data)) + data
        self._state = hashlib.sha256(self._state + frame).digest()

    def _block(self, tag: bytes) -> bytes:
        h = hashlib.sha256(self._state + tag + struct.pack("<Q", self._counter)).digest()
        self._counter += 1
        return h

    def challenge_field(self) -> int:
        if self.use_rejection:
            while True:
                v = int.from_bytes(self._block(b"fe")[:8], "little")
                if v < P:
                    return v
        return int.from_bytes(self._block(b"fe")[:8], "little") % P

    def challenge_indices(self, count: int, bound: int) -> list[int]:
        """`count` distinct indices in [0, bound); duplicates are re-drawn."""
        if count > bound:
            raise ValueError(f"cannot draw {count} distinct indices below {bound}")
        seen: set[int] = set()
        out: list[int] = []
        while len(out) < count:
            block = self._block(b"ix")
            for k in range(0, 32, 8):
                idx = int.from_bytes(block[k:k + 8], "little") % bound
                if idx not in seen:
                    seen.add(idx)
                    out.append(idx)
                    if len(out) == count:
                        break
        return out


def transcript_absorb(t: Transcript, label: bytes, data: bytes) -> None:
    t.absorb(label, data)


def transcript_challenge_field(t: Transcript) -> int:
    return t.challenge_field()


def transcript_challenge_indices(t: Transcript, count: int, bound: int) -> list[int]:
    return t.challenge_indices(count, bound)
