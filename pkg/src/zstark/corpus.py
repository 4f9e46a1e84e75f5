"""Deterministic synthetic zone corpus and the zones file format.

The generator fills a 2 km x 2 km box with three shape families chosen
to stress discretization differently:

  * 30 small axis-aligned "building" rectangles (sides 8-40 m), far
    below coarse cell sizes,
  * 20 long thin "road" strips (5-12 m wide, 200-1500 m long) at
    arbitrary orientations,
  * 10 large star-shaped "park"/"campus" polygons (up to 600 m across,
    14 vertices) whose long, nearly straight edges separate
    interpolating classifiers from area-voting ones.

Placement shrinks the admissible center range by each shape's rotated
bounding box, so every vertex lands inside the box and the zone count
is always exactly 60.  All coordinates are rounded to millimeters,
which makes GeoJSON exports byte-stable.

Zones files are GeoJSON FeatureCollections in local meter coordinates
(marker property "zstark:crs": "local-meters") with a top-level bbox.
`ingest` produces the same format from geographic input, so every
downstream command reads one kind of file.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .geometry import BoundingBox, ZonePolygon, ZoneSet, build_zone

_BOX_SIZE = 2000.0

_N_BUILDINGS = 30
_N_ROADS = 20
_N_PARKS = 10

# Tunable shape distributions (kept inside the ranges documented above).
# Buildings sit at the large end of their range so coarse grids miss them
# but fine grids recover them; parks are nearly convex (shallow teeth)
# because straight edges are where interpolation beats voting hardest.
_BUILDING_SIDE = (24.0, 40.0)
_ROAD_WIDTH = (5.0, 7.0)
_ROAD_LENGTH = (200.0, 600.0)
_PARK_OUTER_RADIUS = (280.0, 300.0)
_PARK_INNER_RATIO = (0.84, 0.93)
_PARK_POINTS = 7  # star points; 2 * points vertices total
_PARK_RADIAL_JITTER = 0.04

CRS_KEY = "zstark:crs"
CRS_VALUE = "local-meters"


def _round3(ring):
    return [(round(x, 3), round(y, 3)) for x, y in ring]


def _star_ring(cx: float, cy: float, r_out: float, r_in: float,
               phase: float, jitter: np.ndarray) -> list[tuple[float, float]]:
    pts = []
    n = 2 * _PARK_POINTS
    for k in range(n):
        ang = phase + 2.0 * math.pi * k / n
        base = r_out if k % 2 == 0 else r_in
        rad = base * (1.0 + jitter[k])
        pts.append((cx + rad * math.cos(ang), cy + rad * math.sin(ang)))
    return pts


def synth_corpus(seed: int = 42) -> ZoneSet:
    """Deterministic 60-zone set on a 2000 m x 2000 m box."""
    rng = np.random.default_rng(seed)
    bbox = BoundingBox(0.0, 0.0, _BOX_SIZE, _BOX_SIZE)
    zones: list[ZonePolygon] = []

    for k in range(_N_BUILDINGS):
        w = rng.uniform(*_BUILDING_SIDE)
        h = rng.uniform(*_BUILDING_SIDE)
        cx = rng.uniform(w / 2, _BOX_SIZE - w / 2)
        cy = rng.uniform(h / 2, _BOX_SIZE - h / 2)
        ring = [(cx - w / 2, cy - h / 2), (cx + w / 2, cy - h / 2),
                (cx + w / 2, cy + h / 2), (cx - w / 2, cy + h / 2)]
        zones.append(build_zone(f"building-{k:03d}", "building", _round3(ring)))

    for k in range(_N_ROADS):
        width = rng.uniform(*_ROAD_WIDTH)
        length = rng.uniform(*_ROAD_LENGTH)
        theta = rng.uniform(0.0, math.pi)
        dx, dy = math.cos(theta), math.sin(theta)
        nx, ny = -dy, dx
        hx = abs(dx) * length / 2 + abs(nx) * width / 2
        hy = abs(dy) * length / 2 + abs(ny) * width / 2
        cx = rng.uniform(hx, _BOX_SIZE - hx)
        cy = rng.uniform(hy, _BOX_SIZE - hy)
        ring = [(cx - dx * length / 2 - nx * width / 2, cy - dy * length / 2 - ny * width / 2),
                (cx + dx * length / 2 - nx * width / 2, cy + dy * length / 2 - ny * width / 2),
                (cx + dx * length / 2 + nx * width / 2, cy + dy * length / 2 + ny * width / 2),
                (cx - dx * length / 2 + nx * width / 2, cy - dy * length / 2 + ny * width / 2)]
        zones.append(build_zone(f"road-{k:03d}", "road", _round3(ring)))

    for k in range(_N_PARKS):
        r_out = rng.uniform(*_PARK_OUTER_RADIUS)
        r_in = r_out * rng.uniform(*_PARK_INNER_RATIO)
        phase = rng.uniform(0.0, 2.0 * math.pi)
        jitter = rng.uniform(-_PARK_RADIAL_JITTER, _PARK_RADIAL_JITTER,
                             2 * _PARK_POINTS)
        reach = r_out * (1.0 + _PARK_RADIAL_JITTER)
        cx = rng.uniform(reach, _BOX_SIZE - reach)
        cy = rng.uniform(reach, _BOX_SIZE - reach)
        ring = _star_ring(cx, cy, r_out, r_in, phase, jitter)
        category = "park" if k % 2 == 0 else "campus"
        zones.append(build_zone(f"park-{k:03d}", category, _round3(ring)))

    return ZoneSet(zones, bbox)


# ---------------------------------------------------------------------------
# Zones file I/O (GeoJSON in local meter coordinates)
# ---------------------------------------------------------------------------

def zones_to_geojson(zs: ZoneSet) -> dict:
    features = []
    for zone in zs.zones:
        coords = [[list(p) for p in ring] + [list(ring[0])]
                  for ring in zone.rings()]
        features.append({
            "type": "Feature",
            "properties": {"id": zone.zone_id, "category": zone.category,
                           CRS_KEY: CRS_VALUE},
            "geometry": {"type": "Polygon", "coordinates": coords},
        })
    return {
        "type": "FeatureCollection",
        "bbox": [zs.bbox.xmin, zs.bbox.ymin, zs.bbox.xmax, zs.bbox.ymax],
        "features": features,
    }


def dumps_zones(zs: ZoneSet) -> str:
    return json.dumps(zones_to_geojson(zs), sort_keys=True, separators=(",", ":"))


def save_zones(zs: ZoneSet, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_zones(zs))
        fh.write("\n")


def load_zones(path) -> ZoneSet:
    """Read a local-meters zones file written by save_zones or ingest."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("type") != "FeatureCollection":
        raise ValueError(f"{path}: not a FeatureCollection")
    if "bbox" not in doc or len(doc["bbox"]) != 4:
        raise ValueError(f"{path}: missing 4-element top-level bbox")
    bbox = BoundingBox(*(float(v) for v in doc["bbox"]))
    zones = []
    for feat in doc.get("features", []):
        props = feat.get("properties") or {}
        if props.get(CRS_KEY) != CRS_VALUE:
            raise ValueError(
                f"{path}: feature {props.get('id')!r} lacks the local-meters "
                f"marker; raw geographic GeoJSON must go through ingest first")
        geom = feat.get("geometry") or {}
        if geom.get("type") != "Polygon":
            raise ValueError(f"{path}: unsupported geometry {geom.get('type')!r}")
        rings = [[(float(x), float(y)) for x, y in ring] for ring in geom["coordinates"]]
        rings = [_strip_closure(r) for r in rings]
        zones.append(build_zone(str(props["id"]), str(props["category"]),
                                rings[0], rings[1:]))
    return ZoneSet(zones, bbox)


def _strip_closure(ring):
    if len(ring) > 1 and ring[0] == ring[-1]:
        return ring[:-1]
    return ring
