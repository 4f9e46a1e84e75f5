"""Planar polygon primitives: containment, distances, clipping, projection.

Zones are simple polygons with optional holes, kept in projected meter
coordinates.  Containment follows the even-odd rule across all rings,
with points exactly on any ring boundary counting as inside.  The
signed distance to a zone is the distance to the nearest boundary
segment, negative inside.

Scalar functions are the reference implementations; the *_many variants
are numpy translations used by the table builders, which agree with the
scalar path except possibly for points sitting exactly on an edge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

Point2D = tuple[float, float]
Ring = list[Point2D]

EARTH_RADIUS_M = 6_371_000.0
BOUNDARY_EPS = 1e-9

CATEGORIES = (
    "building", "campus", "commercial", "industrial", "leisure",
    "park", "residential", "road", "water",
)


@dataclass(frozen=True)
class BoundingBox:
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self):
        if not (self.xmin < self.xmax and self.ymin < self.ymax):
            raise ValueError("degenerate bounding box")

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin

    def contains_point(self, p: Point2D) -> bool:
        return self.xmin <= p[0] <= self.xmax and self.ymin <= p[1] <= self.ymax

    def as_ring(self) -> Ring:
        return [(self.xmin, self.ymin), (self.xmax, self.ymin),
                (self.xmax, self.ymax), (self.xmin, self.ymax)]


@dataclass
class ZonePolygon:
    """One zone: exterior ring (CCW) plus zero or more hole rings (CW)."""

    zone_id: str
    category: str
    exterior: Ring
    holes: list[Ring] = field(default_factory=list)

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category {self.category!r} for zone {self.zone_id}")
        if len(self.exterior) < 3:
            raise ValueError(f"zone {self.zone_id}: exterior needs >= 3 vertices")
        for h in self.holes:
            if len(h) < 3:
                raise ValueError(f"zone {self.zone_id}: hole needs >= 3 vertices")

    def rings(self) -> list[Ring]:
        return [self.exterior] + self.holes

    def area(self) -> float:
        return abs(signed_area(self.exterior)) - sum(abs(signed_area(h)) for h in self.holes)

    def bounds(self) -> tuple[float, float, float, float]:
        xs = [p[0] for p in self.exterior]
        ys = [p[1] for p in self.exterior]
        return min(xs), min(ys), max(xs), max(ys)


@dataclass
class ZoneSet:
    zones: list[ZonePolygon]
    bbox: BoundingBox

    def __post_init__(self):
        seen = set()
        for z in self.zones:
            if z.zone_id in seen:
                raise ValueError(f"duplicate zone id {z.zone_id}")
            seen.add(z.zone_id)
            for ring in z.rings():
                for p in ring:
                    if not self.bbox.contains_point(p):
                        raise ValueError(f"zone {z.zone_id} vertex {p} outside bbox")

    def __len__(self) -> int:
        return len(self.zones)


# ---------------------------------------------------------------------------
# Scalar predicates
# ---------------------------------------------------------------------------

def signed_area(ring: Ring) -> float:
    """Shoelace sum; positive for counter-clockwise rings."""
    acc = 0.0
    n = len(ring)
    for k in range(n):
        ax, ay = ring[k]
        bx, by = ring[(k + 1) % n]
        acc += ax * by - bx * ay
    return 0.5 * acc


def ring_area(ring: Ring) -> float:
    return abs(signed_area(ring))


def segment_distance(p: Point2D, a: Point2D, b: Point2D) -> float:
    """Euclidean distance from p to the closed segment ab."""
    px, py = p
    ax, ay = a
    bx, by = b
    dx, dy = bx - ax, by - ay
    len2 = dx * dx + dy * dy
    if len2 == 0.0:
        return math.hypot(px - ax, py - ay)
    t = ((px - ax) * dx + (py - ay) * dy) / len2
    if t < 0.0:
        t = 0.0
    elif t > 1.0:
        t = 1.0
    return math.hypot(px - (ax + t * dx), py - (ay + t * dy))


def contains(zone: ZonePolygon, p: Point2D) -> bool:
    """Even-odd containment over all rings; boundary points count as inside."""
    x, y = p
    inside = False
    for ring in zone.rings():
        n = len(ring)
        for k in range(n):
            a = ring[k]
            b = ring[(k + 1) % n]
            if segment_distance(p, a, b) <= BOUNDARY_EPS:
                return True
            ay, by = a[1], b[1]
            if (ay > y) != (by > y):
                xi = a[0] + (y - ay) / (by - ay) * (b[0] - a[0])
                if x < xi:
                    inside = not inside
    return inside


def boundary_distance(zone: ZonePolygon, p: Point2D) -> float:
    best = math.inf
    for ring in zone.rings():
        n = len(ring)
        for k in range(n):
            d = segment_distance(p, ring[k], ring[(k + 1) % n])
            if d < best:
                best = d
    return best


def signed_distance(zone: ZonePolygon, p: Point2D) -> float:
    """Distance to the zone boundary, negative if p is inside (or on it)."""
    d = boundary_distance(zone, p)
    return -d if contains(zone, p) else d


# ---------------------------------------------------------------------------
# Clipping and areas
# ---------------------------------------------------------------------------

def _clip_halfplane(pts: Ring, axis: int, bound: float, keep_below: bool) -> Ring:
    """One Sutherland-Hodgman pass against coordinate[axis] <=/>= bound."""
    if not pts:
        return []
    out: Ring = []
    n = len(pts)
    for k in range(n):
        cur = pts[k]
        prev = pts[k - 1]
        cur_in = (cur[axis] <= bound) if keep_below else (cur[axis] >= bound)
        prev_in = (prev[axis] <= bound) if keep_below else (prev[axis] >= bound)
        if cur_in != prev_in:
            t = (bound - prev[axis]) / (cur[axis] - prev[axis])
            if axis == 0:
                out.append((bound, prev[1] + t * (cur[1] - prev[1])))
            else:
                out.append((prev[0] + t * (cur[0] - prev[0]), bound))
        if cur_in:
            out.append(cur)
    return out


def clip_ring_to_rect(ring: Ring, rect: BoundingBox) -> Ring:
    """Clip one ring to an axis-aligned rectangle; [] when nothing is left."""
    pts = _clip_halfplane(ring, 0, rect.xmin, keep_below=False)
    pts = _clip_halfplane(pts, 0, rect.xmax, keep_below=True)
    pts = _clip_halfplane(pts, 1, rect.ymin, keep_below=False)
    pts = _clip_halfplane(pts, 1, rect.ymax, keep_below=True)
    cleaned: Ring = []
    for p in pts:
        if not cleaned or (p[0] != cleaned[-1][0] or p[1] != cleaned[-1][1]):
            cleaned.append(p)
    while len(cleaned) > 1 and cleaned[0] == cleaned[-1]:
        cleaned.pop()
    if len(cleaned) < 3 or ring_area(cleaned) == 0.0:
        return []
    return cleaned


def clip_polygon_to_rect(zone: ZonePolygon, rect: BoundingBox) -> list[Ring]:
    """Clipped exterior first, then any surviving clipped holes."""
    out = []
    ext = clip_ring_to_rect(zone.exterior, rect)
    if not ext:
        return []
    out.append(ext)
    for h in zone.holes:
        ch = clip_ring_to_rect(h, rect)
        if ch:
            out.append(ch)
    return out


def intersection_area(zone: ZonePolygon, rect: BoundingBox) -> float:
    """Area of zone intersected with rect (hole areas subtracted)."""
    rings = clip_polygon_to_rect(zone, rect)
    if not rings:
        return 0.0
    return ring_area(rings[0]) - sum(ring_area(r) for r in rings[1:])


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def _orient(ax, ay, bx, by, cx, cy) -> float:
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def _segments_cross(a, b, c, d) -> bool:
    """Proper or touching intersection between non-adjacent segments."""
    o1 = _orient(*a, *b, *c)
    o2 = _orient(*a, *b, *d)
    o3 = _orient(*c, *d, *a)
    o4 = _orient(*c, *d, *b)
    if ((o1 > 0) != (o2 > 0)) and ((o3 > 0) != (o4 > 0)) and o1 != 0 and o2 != 0 and o3 != 0 and o4 != 0:
        return True

    def on(p, q, r):  # r collinear with pq and within its bbox
        return (min(p[0], q[0]) <= r[0] <= max(p[0], q[0])
                and min(p[1], q[1]) <= r[1] <= max(p[1], q[1]))

    if o1 == 0 and on(a, b, c):
        return True
    if o2 == 0 and on(a, b, d):
        return True
    if o3 == 0 and on(c, d, a):
        return True
    if o4 == 0 and on(c, d, b):
        return True
    return False


def is_simple_ring(ring: Ring) -> bool:
    """True when no two non-adjacent edges intersect or touch."""
    n = len(ring)
    if n < 3:
        return False
    edges = [(ring[k], ring[(k + 1) % n]) for k in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            if _segments_cross(*edges[i], *edges[j]):
                return False
    return True


def normalize_ring(ring: Ring, clockwise: bool = False) -> Ring:
    """Drop repeated consecutive vertices and fix the winding direction."""
    cleaned: Ring = []
    for p in ring:
        if not cleaned or p != cleaned[-1]:
            cleaned.append(p)
    while len(cleaned) > 1 and cleaned[0] == cleaned[-1]:
        cleaned.pop()
    if len(cleaned) < 3:
        raise ValueError("ring degenerates to fewer than 3 vertices")
    area = signed_area(cleaned)
    if area == 0.0:
        raise ValueError("ring has zero area")
    if (area > 0) == clockwise:
        cleaned.reverse()
    return cleaned


def build_zone(zone_id: str, category: str, exterior: Ring,
               holes: list[Ring] | None = None) -> ZonePolygon:
    """Validated constructor: normalizes winding and rejects self-intersection."""
    ext = normalize_ring(exterior, clockwise=False)
    if not is_simple_ring(ext):
        raise ValueError(f"zone {zone_id}: exterior self-intersects")
    fixed_holes = []
    for h in holes or []:
        hh = normalize_ring(h, clockwise=True)
        if not is_simple_ring(hh):
            raise ValueError(f"zone {zone_id}: hole self-intersects")
        fixed_holes.append(hh)
    return ZonePolygon(zone_id, category, ext, fixed_holes)


# ---------------------------------------------------------------------------
# Equirectangular projection
# ---------------------------------------------------------------------------

def project_lonlat(lon: float, lat: float, origin: tuple[float, float]) -> Point2D:
    """Equirectangular lon/lat (degrees) -> local meters around origin."""
    lon0, lat0 = origin
    sx = EARTH_RADIUS_M * math.cos(math.radians(lat0)) * math.pi / 180.0
    sy = EARTH_RADIUS_M * math.pi / 180.0
    return ((lon - lon0) * sx, (lat - lat0) * sy)


def unproject_xy(x: float, y: float, origin: tuple[float, float]) -> tuple[float, float]:
    lon0, lat0 = origin
    sx = EARTH_RADIUS_M * math.cos(math.radians(lat0)) * math.pi / 180.0
    sy = EARTH_RADIUS_M * math.pi / 180.0
    return (lon0 + x / sx, lat0 + y / sy)


# ---------------------------------------------------------------------------
# Vectorized variants (generic-position points)
# ---------------------------------------------------------------------------

def _ring_edges(ring: Ring):
    arr = np.asarray(ring, dtype=np.float64)
    return arr[:, 0], arr[:, 1], np.roll(arr[:, 0], -1), np.roll(arr[:, 1], -1)


def contains_many(zone: ZonePolygon, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Even-odd containment for many points at once (no boundary epsilon)."""
    inside = np.zeros(xs.shape, dtype=bool)
    for ring in zone.rings():
        ax, ay, bx, by = _ring_edges(ring)
        for k in range(len(ax)):
            cross = (ay[k] > ys) != (by[k] > ys)
            if not cross.any():
                continue
            xi = ax[k] + (ys - ay[k]) / (by[k] - ay[k]) * (bx[k] - ax[k])
            inside ^= cross & (xs < xi)
    return inside


def boundary_distance_many(zone: ZonePolygon, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    best = np.full(xs.shape, np.inf)
    for ring in zone.rings():
        ax, ay, bx, by = _ring_edges(ring)
        for k in range(len(ax)):
            dx, dy = bx[k] - ax[k], by[k] - ay[k]
            len2 = dx * dx + dy * dy
            if len2 == 0.0:
                d = np.hypot(xs - ax[k], ys - ay[k])
            else:
                t = np.clip(((xs - ax[k]) * dx + (ys - ay[k]) * dy) / len2, 0.0, 1.0)
                d = np.hypot(xs - (ax[k] + t * dx), ys - (ay[k] + t * dy))
            np.minimum(best, d, out=best)
    return best


def signed_distance_many(zone: ZonePolygon, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    d = boundary_distance_many(zone, xs, ys)
    return np.where(contains_many(zone, xs, ys), -d, d)
