"""Grid discretization of zones into lookup tables.

A uniform r x r grid over the public bounding box turns each zone into
either a boolean membership table (one bit per cell) or a signed
distance table sampled at the (r+1) x (r+1) cell vertices.  Three
strategies are supported:

* center:  bit = containment of the cell center
* voting:  bit = 1 when the covered area fraction is >= tau (inclusive)
* sdf:     bilinear interpolation of vertex signed distances, a point
           is inside when the interpolated value is <= 0

Distances are stored as fixed point at scale 2^32, clamped to
+/-(2^31 - 1) * 2^32, and committed cell-by-cell into one Merkle tree
per table (zone-major, row-major over (j, i)).  The on-disk container
is the ZTBL format documented in `save_table`.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .commit import merkle_build
from .field import P
from .geometry import (
    BoundingBox,
    Point2D,
    ZonePolygon,
    ZoneSet,
    contains_many,
    intersection_area,
    signed_distance_many,
)

STORAGE_SCALE_BITS = 32
_STORAGE_SCALE = 1 << STORAGE_SCALE_BITS
_CLAMP_RAW = ((1 << 31) - 1) << STORAGE_SCALE_BITS
_EPSILON = (1 << 32) - 1  # 2^64 - p

STRATEGY_CENTER = "center"
STRATEGY_VOTING = "voting"
STRATEGY_SDF = "sdf"
_STRATEGY_TAGS = {STRATEGY_CENTER: 0, STRATEGY_VOTING: 1, STRATEGY_SDF: 2}
_TAG_STRATEGIES = {v: k for k, v in _STRATEGY_TAGS.items()}


@dataclass(frozen=True)
class StrategyKind:
    name: str
    tau: float | None = None

    def __post_init__(self):
        if self.name not in _STRATEGY_TAGS:
            raise ValueError(f"unknown strategy {self.name!r}")
        if self.name == STRATEGY_VOTING:
            if self.tau is None or not (0.0 < self.tau <= 1.0):
                raise ValueError("voting needs tau in (0, 1]")
        elif self.tau is not None:
            raise ValueError(f"{self.name} takes no tau")


CENTER = StrategyKind(STRATEGY_CENTER)
SDF = StrategyKind(STRATEGY_SDF)


def voting(tau: float = 0.5) -> StrategyKind:
    return StrategyKind(STRATEGY_VOTING, tau)


@dataclass(frozen=True)
class GridSpec:
    bbox: BoundingBox
    r: int

    def __post_init__(self):
        if self.r < 1:
            raise ValueError("resolution must be positive")

    @property
    def cell_w(self) -> float:
        return self.bbox.width / self.r

    @property
    def cell_h(self) -> float:
        return self.bbox.height / self.r

    def cell_rect(self, i: int, j: int) -> BoundingBox:
        x0 = self.bbox.xmin + i * self.cell_w
        y0 = self.bbox.ymin + j * self.cell_h
        return BoundingBox(x0, y0, x0 + self.cell_w, y0 + self.cell_h)

    def vertex(self, i: int, j: int) -> Point2D:
        return (self.bbox.xmin + i * self.cell_w, self.bbox.ymin + j * self.cell_h)


CellCoord = tuple[int, int]
LocalOffset = tuple[float, float]


def locate(grid: GridSpec, p: Point2D) -> tuple[CellCoord, LocalOffset]:
    """Cell index and in-cell offset for a point inside the bbox.

    Offsets are in [0, 1); points on the far x/y edge clamp into the
    last cell with offset exactly 1.
    """
    if not grid.bbox.contains_point(p):
        raise ValueError(f"point {p} outside grid bbox")
    fx = (p[0] - grid.bbox.xmin) / grid.cell_w
    fy = (p[1] - grid.bbox.ymin) / grid.cell_h
    i, j = int(fx), int(fy)
    u, v = fx - i, fy - j
    if i >= grid.r:
        i, u = grid.r - 1, 1.0
    if j >= grid.r:
        j, v = grid.r - 1, 1.0
    return (i, j), (u, v)


def locate_many(grid: GridSpec, xs: np.ndarray, ys: np.ndarray):
    fx = (xs - grid.bbox.xmin) / grid.cell_w
    fy = (ys - grid.bbox.ymin) / grid.cell_h
    iv = np.minimum(fx.astype(np.int64), grid.r - 1)
    jv = np.minimum(fy.astype(np.int64), grid.r - 1)
    return iv, jv, fx - iv, fy - jv


# ---------------------------------------------------------------------------
# Tables
# ---------------------------------------------------------------------------

@dataclass
class BoolTable:
    """Per-zone membership bits, indexed bits[zone, j, i]."""

    r: int
    bits: np.ndarray  # uint8, shape (zones, r, r)


@dataclass
class SdfTable:
    """Per-zone vertex signed distances at scale 2^32, values[zone, j, i]."""

    r: int
    values: np.ndarray  # int64, shape (zones, r+1, r+1)


@dataclass
class TableBundle:
    strategy: StrategyKind
    grid: GridSpec
    zone_ids: list[str]
    table: BoolTable | SdfTable
    commitment_root: bytes

    @property
    def leaf_width(self) -> int:
        """Cells per table row: r for boolean tables, r+1 for vertex tables."""
        return self.grid.r + 1 if self.strategy.name == STRATEGY_SDF else self.grid.r


def _cell_window(zone: ZonePolygon, grid: GridSpec) -> tuple[int, int, int, int]:
    """Inclusive (i0, i1, j0, j1) range of cells touching the zone bounds."""
    minx, miny, maxx, maxy = zone.bounds()
    i0 = max(0, min(grid.r - 1, int((minx - grid.bbox.xmin) / grid.cell_w)))
    i1 = max(0, min(grid.r - 1, int((maxx - grid.bbox.xmin) / grid.cell_w)))
    j0 = max(0, min(grid.r - 1, int((miny - grid.bbox.ymin) / grid.cell_h)))
    j1 = max(0, min(grid.r - 1, int((maxy - grid.bbox.ymin) / grid.cell_h)))
    return i0, i1, j0, j1


def build_center_table(zones: ZoneSet, grid: GridSpec) -> BoolTable:
    """bit = contains(zone, cell center).  Cells beyond a zone's bounds stay 0."""
    r = grid.r
    bits = np.zeros((len(zones.zones), r, r), dtype=np.uint8)
    for z, zone in enumerate(zones.zones):
        i0, i1, j0, j1 = _cell_window(zone, grid)
        ii, jj = np.meshgrid(np.arange(i0, i1 + 1), np.arange(j0, j1 + 1))
        cx = grid.bbox.xmin + (ii + 0.5) * grid.cell_w
        cy = grid.bbox.ymin + (jj + 0.5) * grid.cell_h
        inside = contains_many(zone, cx.ravel(), cy.ravel()).reshape(cx.shape)
        bits[z, j0:j1 + 1, i0:i1 + 1] = inside.astype(np.uint8)
    return BoolTable(r, bits)


def build_voting_table(zones: ZoneSet, grid: GridSpec, tau: float = 0.5) -> BoolTable:
    """bit = 1 iff area(cell intersect zone) / area(cell) >= tau.

    Cells whose center is farther from the boundary than half the cell
    diagonal are entirely inside or outside, so only boundary cells pay
    for exact polygon clipping.
    """
    if not (0.0 < tau <= 1.0):
        raise ValueError("tau must be in (0, 1]")
    r = grid.r
    bits = np.zeros((len(zones.zones), r, r), dtype=np.uint8)
    cell_area = grid.cell_w * grid.cell_h
    half_diag = 0.5 * math.hypot(grid.cell_w, grid.cell_h)
    for z, zone in enumerate(zones.zones):
        i0, i1, j0, j1 = _cell_window(zone, grid)
        ii, jj = np.meshgrid(np.arange(i0, i1 + 1), np.arange(j0, j1 + 1))
        cx = grid.bbox.xmin + (ii.ravel() + 0.5) * grid.cell_w
        cy = grid.bbox.ymin + (jj.ravel() + 0.5) * grid.cell_h
        sdf = signed_distance_many(zone, cx, cy)
        for i, j, s in zip(ii.ravel(), jj.ravel(), sdf):
            if s <= -half_diag:
                bits[z, j, i] = 1  # cell fully covered, fraction is 1 >= tau
            elif s >= half_diag:
                continue
            else:
                frac = intersection_area(zone, grid.cell_rect(int(i), int(j))) / cell_area
                if frac >= tau:
                    bits[z, j, i] = 1
    return BoolTable(r, bits)


def build_sdf_table(zones: ZoneSet, grid: GridSpec) -> SdfTable:
    """Signed distance at each grid vertex, fixed point at scale 2^32."""
    r = grid.r
    gx = grid.bbox.xmin + np.arange(r + 1) * grid.cell_w
    gy = grid.bbox.ymin + np.arange(r + 1) * grid.cell_h
    vx, vy = np.meshgrid(gx, gy)  # vy varies along axis 0 (j)
    out = np.empty((len(zones.zones), r + 1, r + 1), dtype=np.int64)
    for z, zone in enumerate(zones.zones):
        sdf = signed_distance_many(zone, vx.ravel(), vy.ravel()).reshape(vx.shape)
        scaled = sdf * float(_STORAGE_SCALE)
        scaled = np.clip(scaled, -float(_CLAMP_RAW), float(_CLAMP_RAW))
        raw = np.where(scaled >= 0, np.floor(scaled + 0.5), -np.floor(-scaled + 0.5))
        out[z] = np.clip(raw.astype(np.int64), -_CLAMP_RAW, _CLAMP_RAW)
    return SdfTable(r, out)


def interpolate_bilinear(d00: float, d10: float, d01: float, d11: float,
                         u: float, v: float) -> float:
    """Bilinear blend of cell-corner values at offset (u, v) in [0, 1]^2."""
    return ((1 - u) * (1 - v) * d00 + u * (1 - v) * d10
            + (1 - u) * v * d01 + u * v * d11)


def classify(bundle: TableBundle, p: Point2D, zone_index: int) -> bool:
    """Table-based membership decision for one point and one zone."""
    (i, j), (u, v) = locate(bundle.grid, p)
    if bundle.strategy.name == STRATEGY_SDF:
        vals = bundle.table.values[zone_index]
        value = interpolate_bilinear(
            vals[j, i] / _STORAGE_SCALE, vals[j, i + 1] / _STORAGE_SCALE,
            vals[j + 1, i] / _STORAGE_SCALE, vals[j + 1, i + 1] / _STORAGE_SCALE,
            u, v)
        return value <= 0.0
    return bool(bundle.table.bits[zone_index, j, i])


def classify_many(bundle: TableBundle, xs: np.ndarray, ys: np.ndarray,
                  zone_index: int) -> np.ndarray:
    iv, jv, uv, vv = locate_many(bundle.grid, xs, ys)
    if bundle.strategy.name == STRATEGY_SDF:
        vals = bundle.table.values[zone_index].astype(np.float64) / _STORAGE_SCALE
        value = ((1 - uv) * (1 - vv) * vals[jv, iv] + uv * (1 - vv) * vals[jv, iv + 1]
                 + (1 - uv) * vv * vals[jv + 1, iv] + uv * vv * vals[jv + 1, iv + 1])
        return value <= 0.0
    return bundle.table.bits[zone_index, jv, iv].astype(bool)


def accuracy_eval(zones: ZoneSet, bundle: TableBundle, queries) -> float:
    """Fraction of queries classified correctly for every zone at once."""
    pts = np.asarray(queries, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("queries must be an (n, 2) array of points")
    xs, ys = pts[:, 0], pts[:, 1]
    ok = np.ones(len(pts), dtype=bool)
    for z, zone in enumerate(zones.zones):
        truth = contains_many(zone, xs, ys)
        ok &= classify_many(bundle, xs, ys, z) == truth
    return float(ok.mean())


# ---------------------------------------------------------------------------
# Commitment and the ZTBL container
# ---------------------------------------------------------------------------

def table_payload(table: BoolTable | SdfTable) -> bytes:
    """Canonical leaf buffer: little-endian u64 field encodings, (zone, j, i) order."""
    if isinstance(table, BoolTable):
        return table.bits.astype("<u8").tobytes()
    raw = table.values
    raw_u = raw.view(np.uint64)  # two's complement bits
    enc = np.where(raw < 0, raw_u - np.uint64(_EPSILON), raw_u)
    return enc.astype("<u8").tobytes()


def commit_table(table: BoolTable | SdfTable) -> bytes:
    return merkle_build(table_payload(table), item_size=8).root


def build_bundle(strategy: StrategyKind, zones: ZoneSet, grid: GridSpec) -> TableBundle:
    if strategy.name == STRATEGY_CENTER:
        table: BoolTable | SdfTable = build_center_table(zones, grid)
    elif strategy.name == STRATEGY_VOTING:
        table = build_voting_table(zones, grid, strategy.tau)
    else:
        table = build_sdf_table(zones, grid)
    return TableBundle(strategy, grid, [z.zone_id for z in zones.zones],
                       table, commit_table(table))


_MAGIC = b"ZTBL"
_VERSION = 1


def save_table(bundle: TableBundle, path: str) -> None:
    """ZTBL layout: magic, u16 version, u8 strategy tag, u64 tau (voting
    only, fixed point at 2^32), u32 r, u32 zone count, zone ids (u16
    length + utf8 each), bbox as 4 little-endian f64, payload u64s in
    (zone, j, i) order, then the 32-byte commitment root."""
    parts = [_MAGIC, struct.pack("<H", _VERSION),
             struct.pack("<B", _STRATEGY_TAGS[bundle.strategy.name])]
    if bundle.strategy.name == STRATEGY_VOTING:
        parts.append(struct.pack("<Q", round(bundle.strategy.tau * (1 << 32))))
    parts.append(struct.pack("<II", bundle.grid.r, len(bundle.zone_ids)))
    for zid in bundle.zone_ids:
        raw = zid.encode("utf-8")
        parts.append(struct.pack("<H", len(raw)) + raw)
    b = bundle.grid.bbox
    parts.append(struct.pack("<dddd", b.xmin, b.ymin, b.xmax, b.ymax))
    parts.append(table_payload(bundle.table))
    parts.append(bundle.commitment_root)
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def load_table(path: str) -> TableBundle:
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:4] != _MAGIC:
        raise ValueError(f"{path}: not a ZTBL file")
    (version,) = struct.unpack_from("<H", buf, 4)
    if version != _VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    (tag,) = struct.unpack_from("<B", buf, 6)
    off = 7
    if tag not in _TAG_STRATEGIES:
        raise ValueError(f"{path}: unknown strategy tag {tag}")
    name = _TAG_STRATEGIES[tag]
    tau = None
    if name == STRATEGY_VOTING:
        (tau_fp,) = struct.unpack_from("<Q", buf, off)
        off += 8
        tau = tau_fp / (1 << 32)
    r, zone_count = struct.unpack_from("<II", buf, off)
    off += 8
    zone_ids = []
    for _ in range(zone_count):
        (n,) = struct.unpack_from("<H", buf, off)
        off += 2
        zone_ids.append(buf[off:off + n].decode("utf-8"))
        off += n
    xmin, ymin, xmax, ymax = struct.unpack_from("<dddd", buf, off)
    off += 32
    grid = GridSpec(BoundingBox(xmin, ymin, xmax, ymax), r)
    width = r + 1 if name == STRATEGY_SDF else r
    count = zone_count * width * width
    payload = np.frombuffer(buf, dtype="<u8", count=count, offset=off)
    off += count * 8
    root = buf[off:off + 32]
    if len(root) != 32:
        raise ValueError(f"{path}: truncated file")

    if name == STRATEGY_SDF:
        enc = payload.astype(np.uint64)
        neg = enc > np.uint64(P // 2)
        raw = np.where(neg, enc + np.uint64(_EPSILON), enc).view(np.int64)
        table: BoolTable | SdfTable = SdfTable(r, raw.reshape(zone_count, width, width))
    else:
        bits = payload.astype(np.uint8)
        if np.any(payload > 1):
            raise ValueError(f"{path}: boolean table with non-bit payload")
        table = BoolTable(r, bits.reshape(zone_count, width, width))

    if commit_table(table) != root:
        raise ValueError(f"{path}: commitment root mismatch, file corrupt")
    strategy = StrategyKind(name, tau)
    return TableBundle(strategy, grid, zone_ids, table, root)
