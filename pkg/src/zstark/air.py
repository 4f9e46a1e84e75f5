"""Algebraic constraint system for table-lookup membership claims.

Each trace row proves one claim "point -> cell (i, j) -> decision out"
against a committed table.  All constraints are row-local and have
algebraic degree at most 2:

  C1  every bit column b satisfies b(b-1) = 0
  C2  u, v, i, j match their bit decompositions
  C3  gx = i * 2^16 + u and gy = j * 2^16 + v  (gx, gy are the grid
      coordinates of the hidden point at sub-cell scale 2^16)
  C4  boolean tables: out = t and t is a bit
  C5  distance tables: bilinear weights m1..m4 are products of u, v
      complements, and interp * 2^32 + rem equals the weighted payload
      sum, with rem range-bound by 32 bits
  C6  interp = (1 - 2*out) * mag with mag range-bound below 2^62, which
      pins out to the sign of the interpolated distance

The cell indices, the decision bits and the table payload openings are
public; everything else (the point, offsets, decompositions) stays in
the witness.  Table payloads are stored at scale 2^32 and enter the
trace right-shifted by 16 bits (floor), so in-trace distances live at
scale 2^16 and all intermediate products stay far below p.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field as dc_field

import numpy as np

from .commit import MerklePath, merkle_build, merkle_open
from .discretize import (
    STRATEGY_SDF,
    STRATEGY_VOTING,
    StrategyKind,
    TableBundle,
    table_payload,
)
from .field import P, decode_signed, mod_sum_rows, v_add, v_mul, v_sub

TRACE_SCALE_BITS = 16
_SHIFT_DOWN = 16  # 2^32 storage scale down to 2^16 trace scale
_MAX_TRACE_PAYLOAD = 1 << 45  # sanity bound keeping C5 sums below p/2


@dataclass(frozen=True)
class AirConfig:
    strategy: StrategyKind
    r: int
    rows: int
    blowup: int = 8
    fri_query_count: int = 32
    trace_scale_bits: int = TRACE_SCALE_BITS
    fri_final_degree: int = 8

    def __post_init__(self):
        if self.r < 1 or self.r & (self.r - 1):
            raise ValueError("r must be a power of two on the proof path")
        if self.rows < 1 or self.rows & (self.rows - 1):
            raise ValueError("rows must be a power of two")
        if self.blowup < 4 or self.blowup & (self.blowup - 1):
            raise ValueError("blowup must be a power of two >= 4")
        if self.rows * self.blowup > 1 << 32:
            raise ValueError("evaluation domain exceeds the field's two-adicity")
        if self.fri_final_degree < 1 or self.fri_final_degree & (self.fri_final_degree - 1):
            raise ValueError("final degree must be a power of two")
        if self.rows < self.fri_final_degree:
            raise ValueError("rows below the FRI final degree")
        if self.trace_scale_bits != TRACE_SCALE_BITS:
            raise ValueError("only trace scale 2^16 is supported")

    @property
    def index_bits(self) -> int:
        return (self.r - 1).bit_length()

    @property
    def is_sdf(self) -> bool:
        return self.strategy.name == STRATEGY_SDF

    def to_bytes(self) -> bytes:
        from .discretize import _STRATEGY_TAGS  # stable numeric tags
        tau_fp = round(self.strategy.tau * (1 << 32)) if self.strategy.tau else 0
        return struct.pack("<BQIIIIII", _STRATEGY_TAGS[self.strategy.name], tau_fp,
                           self.r, self.rows, self.blowup, self.fri_query_count,
                           self.trace_scale_bits, self.fri_final_degree)

    @classmethod
    def read_from(cls, buf: bytes, off: int) -> tuple["AirConfig", int]:
        from .discretize import _TAG_STRATEGIES
        tag, tau_fp, r, rows, blowup, fqc, tsb, ffd = struct.unpack_from("<BQIIIIII", buf, off)
        if tag not in _TAG_STRATEGIES:
            raise ValueError(f"unknown strategy tag {tag}")
        name = _TAG_STRATEGIES[tag]
        tau = tau_fp / (1 << 32) if name == STRATEGY_VOTING else None
        return cls(StrategyKind(name, tau), r, rows, blowup, fqc, tsb, ffd), off + 33


def public_columns(cfg: AirConfig) -> list[str]:
    cols = ["i", "j", "out"]
    if cfg.is_sdf:
        cols += ["d00", "d10", "d01", "d11"]
    else:
        cols += ["t"]
    return cols


def witness_columns(cfg: AirConfig) -> list[str]:
    lg = cfg.index_bits
    cols = ["gx", "gy", "u", "v"]
    cols += [f"ub{k}" for k in range(16)]
    cols += [f"vb{k}" for k in range(16)]
    cols += [f"ib{k}" for k in range(lg)]
    cols += [f"jb{k}" for k in range(lg)]
    if cfg.is_sdf:
        cols += ["m1", "m2", "m3", "m4", "interp", "rem"]
        cols += [f"rb{k}" for k in range(32)]
        cols += ["mag"]
        cols += [f"mb{k}" for k in range(62)]
    return cols


# ---------------------------------------------------------------------------
# Constraints, evaluable on scalars or numpy lanes
# ---------------------------------------------------------------------------

class _ScalarOps:
    @staticmethod
    def add(a, b):
        return (a + b) % P

    @staticmethod
    def sub(a, b):
        return (a - b) % P

    @staticmethod
    def mul(a, b):
        return a * b % P

    @staticmethod
    def const(k):
        return k % P

    @staticmethod
    def wsum(weights, values):
        return sum(w * v for w, v in zip(weights, values)) % P


class _VecOps:
    add = staticmethod(v_add)
    sub = staticmethod(v_sub)
    mul = staticmethod(v_mul)

    @staticmethod
    def const(k):
        return np.uint64(k % P)

    @staticmethod
    def wsum(weights, values):
        # One stacked multiply instead of a call chain per term; on the
        # short lanes the prover works with, call overhead dominates.
        if not values:
            return np.uint64(0)
        w = np.array([w % P for w in weights], dtype=np.uint64).reshape(-1, 1)
        return mod_sum_rows(v_mul(w, np.stack(values)))


@dataclass(frozen=True)
class Constraint:
    name: str
    degree: int
    fn: object  # callable(cols, ops) -> value
    bit_col: str | None = None  # set when fn is the booleanness check of one column

    def evaluate(self, cols, vectorized: bool = False):
        return self.fn(cols, _VecOps if vectorized else _ScalarOps)


def _bitness(name):
    return lambda c, o: o.mul(c[name], o.sub(c[name], o.const(1)))


def _bit_sum(target, prefix, width):
    weights = [1 << k for k in range(width)]

    def fn(c, o):
        bits = [c[f"{prefix}{k}"] for k in range(width)]
        return o.sub(c[target], o.wsum(weights, bits))
    return fn


def constraint_set(cfg: AirConfig) -> list[Constraint]:
    lg = cfg.index_bits
    two16 = 1 << 16
    cons: list[Constraint] = []

    bit_cols = [f"ub{k}" for k in range(16)] + [f"vb{k}" for k in range(16)]
    bit_cols += [f"ib{k}" for k in range(lg)] + [f"jb{k}" for k in range(lg)]
    bit_cols += ["out"]
    if cfg.is_sdf:
        bit_cols += [f"rb{k}" for k in range(32)] + [f"mb{k}" for k in range(62)]
    else:
        bit_cols += ["t"]
    for name in bit_cols:
        cons.append(Constraint(f"bit_{name}", 2, _bitness(name), bit_col=name))

    cons.append(Constraint("sum_u", 1, _bit_sum("u", "ub", 16)))
    cons.append(Constraint("sum_v", 1, _bit_sum("v", "vb", 16)))
    cons.append(Constraint("sum_i", 1, _bit_sum("i", "ib", lg)))
    cons.append(Constraint("sum_j", 1, _bit_sum("j", "jb", lg)))

    cons.append(Constraint("decomp_gx", 1, lambda c, o: o.sub(
        c["gx"], o.add(o.mul(o.const(two16), c["i"]), c["u"]))))
    cons.append(Constraint("decomp_gy", 1, lambda c, o: o.sub(
        c["gy"], o.add(o.mul(o.const(two16), c["j"]), c["v"]))))

    if not cfg.is_sdf:
        cons.append(Constraint("link_out", 1, lambda c, o: o.sub(c["out"], c["t"])))
        return cons

    def cu(c, o):  # 2^16 - u
        return o.sub(o.const(two16), c["u"])

    def cv(c, o):
        return o.sub(o.const(two16), c["v"])

    cons.append(Constraint("m1_def", 2, lambda c, o: o.sub(c["m1"], o.mul(cu(c, o), cv(c, o)))))
    cons.append(Constraint("m2_def", 2, lambda c, o: o.sub(c["m2"], o.mul(c["u"], cv(c, o)))))
    cons.append(Constraint("m3_def", 2, lambda c, o: o.sub(c["m3"], o.mul(cu(c, o), c["v"]))))
    cons.append(Constraint("m4_def", 2, lambda c, o: o.sub(c["m4"], o.mul(c["u"], c["v"]))))

    cons.append(Constraint("sum_rem", 1, _bit_sum("rem", "rb", 32)))
    cons.append(Constraint("sum_mag", 1, _bit_sum("mag", "mb", 62)))

    def interp_div(c, o):
        lhs = o.add(o.mul(o.const(1 << 32), c["interp"]), c["rem"])
        rhs = o.add(o.add(o.mul(c["m1"], c["d00"]), o.mul(c["m2"], c["d10"])),
                    o.add(o.mul(c["m3"], c["d01"]), o.mul(c["m4"], c["d11"])))
        return o.sub(lhs, rhs)

    cons.append(Constraint("interp_div", 2, interp_div))

    cons.append(Constraint("sign_link", 2, lambda c, o: o.sub(
        c["interp"],
        o.mul(o.sub(o.const(1), o.mul(o.const(2), c["out"])), c["mag"]))))
    return cons


# ---------------------------------------------------------------------------
# Public statement
# ---------------------------------------------------------------------------

@dataclass
class PublicRow:
    zone_index: int
    i: int
    j: int
    out: int
    openings: list[MerklePath] = dc_field(default_factory=list)


@dataclass
class PublicStatement:
    table_root: bytes
    rows: list[PublicRow]

    def to_bytes(self) -> bytes:
        parts = [self.table_root, struct.pack("<I", len(self.rows))]
        for row in self.rows:
            parts.append(struct.pack("<IIIBB", row.zone_index, row.i, row.j,
                                     row.out, len(row.openings)))
            for path in row.openings:
                parts.append(path.to_bytes())
        return b"".join(parts)

    @classmethod
    def read_from(cls, buf: bytes, off: int) -> tuple["PublicStatement", int]:
        root = bytes(buf[off:off + 32])
        off += 32
        (count,) = struct.unpack_from("<I", buf, off)
        off += 4
        rows = []
        for _ in range(count):
            z, i, j, out, n_open = struct.unpack_from("<IIIBB", buf, off)
            off += 14
            openings = []
            for _ in range(n_open):
                path, off = MerklePath.read_from(buf, off)
                openings.append(path)
            rows.append(PublicRow(z, i, j, out, openings))
        return cls(root, rows), off


def payload_leaf_indices(cfg: AirConfig, zone_index: int, i: int, j: int) -> list[int]:
    """Table leaf indices a row must open, in d00/d10/d01/d11 order."""
    if not (0 <= i < cfg.r and 0 <= j < cfg.r) or zone_index < 0:
        raise ValueError(f"cell ({i}, {j}) or zone {zone_index} out of range")
    if cfg.is_sdf:
        w = cfg.r + 1
        base = zone_index * w * w
        return [base + j * w + i, base + j * w + i + 1,
                base + (j + 1) * w + i, base + (j + 1) * w + i + 1]
    base = zone_index * cfg.r * cfg.r
    return [base + j * cfg.r + i]


def payload_trace_values(cfg: AirConfig, payloads: list[bytes]) -> list[int]:
    """Field-encoded trace-scale payload values derived from opened leaves."""
    out = []
    for raw in payloads:
        if len(raw) != 8:
            raise ValueError("table leaf payload must be 8 bytes")
        enc = int.from_bytes(raw, "little")
        if enc >= P:
            raise ValueError("table leaf payload is not a field element")
        if cfg.is_sdf:
            shifted = decode_signed(enc) >> _SHIFT_DOWN
            if abs(shifted) >= _MAX_TRACE_PAYLOAD:
                raise ValueError("table payload magnitude out of range")
            out.append(shifted % P)
        else:
            if enc > 1:
                raise ValueError("boolean table leaf must be 0 or 1")
            out.append(enc)
    return out


def public_column_arrays(cfg: AirConfig, statement: PublicStatement) -> dict[str, np.ndarray]:
    """Public columns over the full trace length (padding repeats the last row)."""
    if not statement.rows:
        raise ValueError("statement has no rows")
    if len(statement.rows) > cfg.rows:
        raise ValueError("more public rows than trace rows")
    cols = {name: np.zeros(cfg.rows, dtype=np.uint64) for name in public_columns(cfg)}
    for k in range(cfg.rows):
        row = statement.rows[min(k, len(statement.rows) - 1)]
        cols["i"][k] = row.i
        cols["j"][k] = row.j
        cols["out"][k] = row.out
        values = payload_trace_values(cfg, [p.payload for p in row.openings])
        if cfg.is_sdf:
            if len(values) != 4:
                raise ValueError("distance rows need 4 payload openings")
            for name, val in zip(("d00", "d10", "d01", "d11"), values):
                cols[name][k] = val
        else:
            if len(values) != 1:
                raise ValueError("boolean rows need 1 payload opening")
            cols["t"][k] = values[0]
    return cols


# ---------------------------------------------------------------------------
# Trace construction
# ---------------------------------------------------------------------------

@dataclass
class TraceTable:
    """Witness columns only; public columns live in the statement."""

    cfg: AirConfig
    columns: dict[str, np.ndarray]
    query_count: int


def _decompose_bits(value: int, width: int) -> list[int]:
    return [(value >> k) & 1 for k in range(width)]


def build_trace(queries, bundle: TableBundle, cfg: AirConfig,
                zone_indices=None) -> tuple[TraceTable, PublicStatement]:
    """Execution trace plus public statement for a batch of lookups.

    Builds the table Merkle tree to extract authenticated openings, so
    its cost scales with the table size.  Query points map to grid
    coordinates gx = round(fx * 2^16) clamped to r * 2^16 - 1, which
    matches `locate` up to half a unit at the finest sub-cell scale.
    """
    queries = list(queries)
    q = len(queries)
    if q == 0:
        raise ValueError("empty query batch")
    if q > cfg.rows:
        raise ValueError(f"{q} queries exceed {cfg.rows} trace rows")
    if bundle.strategy != cfg.strategy:
        raise ValueError("bundle strategy does not match config")
    if bundle.grid.r != cfg.r:
        raise ValueError("bundle resolution does not match config")
    if zone_indices is None:
        zone_indices = [0] * q
    zone_indices = [int(z) for z in zone_indices]
    if len(zone_indices) != q:
        raise ValueError("one zone index per query required")
    for z in zone_indices:
        if not 0 <= z < len(bundle.zone_ids):
            raise ValueError(f"zone index {z} out of range")

    tree = merkle_build(table_payload(bundle.table), item_size=8)
    if tree.root != bundle.commitment_root:
        raise ValueError("table payload does not match its commitment root")

    grid = bundle.grid
    lg = cfg.index_bits
    names = witness_columns(cfg)
    cols = {name: np.zeros(cfg.rows, dtype=np.uint64) for name in names}
    pub_rows: list[PublicRow] = []

    for k, (p, z) in enumerate(zip(queries, zone_indices)):
        if not grid.bbox.contains_point(p):
            raise ValueError(f"query {p} outside the grid bbox")
        fx = (p[0] - grid.bbox.xmin) / grid.cell_w
        fy = (p[1] - grid.bbox.ymin) / grid.cell_h
        gx = min(round(fx * 65536), cfg.r * 65536 - 1)
        gy = min(round(fy * 65536), cfg.r * 65536 - 1)
        i, u = gx >> 16, gx & 0xFFFF
        j, v = gy >> 16, gy & 0xFFFF

        row = {"gx": gx, "gy": gy, "u": u, "v": v}
        for b, bit in enumerate(_decompose_bits(u, 16)):
            row[f"ub{b}"] = bit
        for b, bit in enumerate(_decompose_bits(v, 16)):
            row[f"vb{b}"] = bit
        for b, bit in enumerate(_decompose_bits(i, lg)):
            row[f"ib{b}"] = bit
        for b, bit in enumerate(_decompose_bits(j, lg)):
            row[f"jb{b}"] = bit

        leaf_indices = payload_leaf_indices(cfg, z, i, j)
        openings = [merkle_open(tree, li) for li in leaf_indices]
        values = payload_trace_values(cfg, [o.payload for o in openings])

        if cfg.is_sdf:
            d = [decode_signed(val) for val in values]
            m1 = (65536 - u) * (65536 - v)
            m2 = u * (65536 - v)
            m3 = (65536 - u) * v
            m4 = u * v
            total = m1 * d[0] + m2 * d[1] + m3 * d[2] + m4 * d[3]
            interp, rem = total >> 32, total & 0xFFFFFFFF
            out = 1 if interp <= 0 else 0
            mag = -interp if interp < 0 else interp
            row.update({"m1": m1, "m2": m2, "m3": m3, "m4": m4,
                        "interp": interp % P, "rem": rem, "mag": mag})
            for b, bit in enumerate(_decompose_bits(rem, 32)):
                row[f"rb{b}"] = bit
            for b, bit in enumerate(_decompose_bits(mag, 62)):
                row[f"mb{b}"] = bit
        else:
            out = values[0]

        for name, val in row.items():
            cols[name][k] = val
        pub_rows.append(PublicRow(z, i, j, out, openings))

    for k in range(q, cfg.rows):  # padding repeats the last real row
        for name in names:
            cols[name][k] = cols[name][q - 1]

    trace = TraceTable(cfg, cols, q)
    statement = PublicStatement(tree.root, pub_rows)
    return trace, statement


def check_trace(trace: TraceTable, statement: PublicStatement) -> list[str]:
    """Names of constraints violated on any row (empty when satisfied)."""
    cfg = trace.cfg
    cols = dict(trace.columns)
    cols.update(public_column_arrays(cfg, statement))
    cons = constraint_set(cfg)
    bit_bad = _bit_violations(cons, cols)
    bad = []
    for con in cons:
        if con.bit_col is not None:
            if con.name in bit_bad:
                bad.append(con.name)
        elif np.any(con.evaluate(cols, vectorized=True) != 0):
            bad.append(con.name)
    return bad


def _bit_violations(cons, cols) -> set[str]:
    """Names of booleanness constraints with a non-bit value somewhere."""
    bits = [con for con in cons if con.bit_col is not None]
    if not bits:
        return set()
    b = np.stack([cols[con.bit_col] for con in bits])
    nonzero = np.any(v_mul(b, v_sub(b, np.uint64(1))) != 0, axis=1)
    return {con.name for con, flag in zip(bits, nonzero) if flag}


def combine_constraints(cons, cols, weights) -> np.ndarray:
    """Sum of weight_k * constraint_k over vectorized columns.

    Booleanness constraints are evaluated as one stacked matrix product;
    everything else goes through its own evaluate().  Termwise equal to
    the naive weighted loop.
    """
    bit_idx = [k for k, con in enumerate(cons) if con.bit_col is not None]
    rest_idx = [k for k, con in enumerate(cons) if con.bit_col is None]
    acc = None
    if bit_idx:
        b = np.stack([cols[cons[k].bit_col] for k in bit_idx])
        w = np.array([weights[k] for k in bit_idx], dtype=np.uint64).reshape(-1, 1)
        acc = mod_sum_rows(v_mul(w, v_mul(b, v_sub(b, np.uint64(1)))))
    for k in rest_idx:
        term = v_mul(np.uint64(weights[k]),
                     cons[k].evaluate(cols, vectorized=True))
        acc = term if acc is None else v_add(acc, term)
    return acc
