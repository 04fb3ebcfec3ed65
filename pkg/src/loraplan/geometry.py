"""Ray geometry against obstruction footprints.

A link a -> b is a straight 3D ray whose height varies linearly with the
fraction ``t`` travelled along it (flat earth). Obstructions are vertical
prisms: a simple polygon footprint extruded from z = 0 up to ``height_m``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DomainError

# first-Fresnel clearance below this fraction of the zone radius counts as intrusion
FRESNEL_CLEARANCE_FRACTION = 0.6
KNIFE_EDGE_V_THRESHOLD = -FRESNEL_CLEARANCE_FRACTION * math.sqrt(2.0)

WALL, FLOOR, VEGETATION_CROSSING, KNIFE_EDGE = 0, 1, 2, 3
KIND_NAMES = {WALL: "wall", FLOOR: "floor", VEGETATION_CROSSING: "vegetation", KNIFE_EDGE: "knife_edge"}

KIND_BUILDING, KIND_VEGETATION = 0, 1

_MIN_INTERVAL = 1e-12


def polygon_area(points) -> float:
    """Signed shoelace area (positive for counterclockwise)."""
    n = len(points)
    s = 0.0
    for k in range(n):
        p, q = points[k], points[(k + 1) % n]
        s += p.x * q.y - q.x * p.y
    return 0.5 * s


def _orient(ax, ay, bx, by, cx, cy):
    v = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    return (v > 0) - (v < 0)


def _on_segment(ax, ay, bx, by, cx, cy):
    return min(ax, bx) <= cx <= max(ax, bx) and min(ay, by) <= cy <= max(ay, by)


def segments_intersect(p1, p2, p3, p4) -> bool:
    """Closed-segment intersection test, collinear overlaps included."""
    o1 = _orient(*p1, *p2, *p3)
    o2 = _orient(*p1, *p2, *p4)
    o3 = _orient(*p3, *p4, *p1)
    o4 = _orient(*p3, *p4, *p2)
    if o1 != o2 and o3 != o4:
        return True
    return ((o1 == 0 and _on_segment(*p1, *p2, *p3)) or (o2 == 0 and _on_segment(*p1, *p2, *p4))
            or (o3 == 0 and _on_segment(*p3, *p4, *p1)) or (o4 == 0 and _on_segment(*p3, *p4, *p2)))


def polygon_is_simple(points) -> bool:
    n = len(points)
    pts = [(p.x, p.y) for p in points]
    if len(set(pts)) != n:
        return False
    for a in range(n):
        a1, a2 = pts[a], pts[(a + 1) % n]
        for b in range(a + 1, n):
            if b == a + 1 or (a == 0 and b == n - 1):
                continue
            if segments_intersect(a1, a2, pts[b], pts[(b + 1) % n]):
                return False
    return True


def point_in_polygon(x: float, y: float, xs, ys) -> bool:
    """Even-odd rule."""
    inside = False
    n = len(xs)
    j = n - 1
    for i in range(n):
        yi, yj = ys[i], ys[j]
        if (yi > y) != (yj > y):
            xi = xs[i] + (y - yi) * (xs[j] - xs[i]) / (yj - yi)
            if x < xi:
                inside = not inside
        j = i
    return inside


class PackedObstructions(NamedTuple):
    """Structure-of-arrays view of a site's obstructions.

    ``py`` mirrors the arrays as plain lists for the pure-Python tracer.
    """

    kind: np.ndarray       # int32, KIND_BUILDING / KIND_VEGETATION
    height: np.ndarray     # float64
    wall_db: np.ndarray    # float64, per-wall loss for buildings, 0 for vegetation
    floors: np.ndarray     # int32
    vstart: np.ndarray     # int32 offset into vx/vy
    vcount: np.ndarray     # int32
    vx: np.ndarray
    vy: np.ndarray
    bbox: np.ndarray       # (n, 4) xmin, xmax, ymin, ymax
    py: "_ListView"

    @property
    def n(self) -> int:
        return len(self.kind)


class _ListView(NamedTuple):
    kind: list
    height: list
    wall_db: list
    floors: list
    vstart: list
    vcount: list
    vx: list
    vy: list
    bbox: list


def pack_obstructions(site) -> PackedObstructions:
    from .site import BUILDING

    table = site.config.material_loss_table
    kinds, heights, walls, floors, starts, counts, xs, ys, boxes = [], [], [], [], [], [], [], [], []
    for ob in site.obstructions:
        kinds.append(KIND_BUILDING if ob.kind == BUILDING else KIND_VEGETATION)
        heights.append(ob.height_m)
        walls.append(float(table.get(ob.material, 0.0)) if ob.kind == BUILDING else 0.0)
        floors.append(ob.floor_count if ob.kind == BUILDING else 0)
        starts.append(len(xs))
        counts.append(len(ob.footprint))
        px = [p.x for p in ob.footprint]
        py = [p.y for p in ob.footprint]
        xs.extend(px)
        ys.extend(py)
        boxes.append((min(px), max(px), min(py), max(py)) if px else (0.0, 0.0, 0.0, 0.0))
    arrays = dict(
        kind=np.asarray(kinds, dtype=np.int32),
        height=np.asarray(heights, dtype=np.float64),
        wall_db=np.asarray(walls, dtype=np.float64),
        floors=np.asarray(floors, dtype=np.int32),
        vstart=np.asarray(starts, dtype=np.int32),
        vcount=np.asarray(counts, dtype=np.int32),
        vx=np.asarray(xs, dtype=np.float64),
        vy=np.asarray(ys, dtype=np.float64),
        bbox=np.asarray(boxes, dtype=np.float64).reshape(-1, 4),
    )
    lists = _ListView(**{k: v.tolist() for k, v in arrays.items()})
    return PackedObstructions(py=lists, **arrays)


def knife_edge_t_star(az: float, dz: float, top: float) -> float:
    """Fraction along the ray where a flat top at height ``top`` maximises v.

    v(t) is proportional to (top - z(t)) / sqrt(t (1 - t)); setting its
    derivative to zero gives t = (z(0) - top) / (dz + 2 (z(0) - top)).
    """
    alpha = az - top
    den = dz + 2.0 * alpha
    if den == 0.0:
        return math.nan
    return alpha / den


def fresnel_v(h: float, t: float, length3: float, wavelength: float) -> float:
    """Fresnel-Kirchhoff parameter for an edge ``h`` above the ray at fraction ``t``."""
    w = t * (1.0 - t)
    if w <= 0.0:
        return -math.inf if h <= 0.0 else math.inf
    return h * math.sqrt(2.0 / (wavelength * length3 * w))


def trace_link(ax, ay, az, bx, by, bz, packed: PackedObstructions, wavelength: float):
    """Raw crossings of the ray a -> b.

    Returns ``(kind, t, obstruction_index, value)`` tuples, unsorted, where
    ``value`` is the wall loss for walls, the 2D depth for vegetation, v for
    knife edges and 0 for floors.
    """
    dx, dy, dz = bx - ax, by - ay, bz - az
    length2 = math.sqrt(dx * dx + dy * dy)
    length3 = math.sqrt(dx * dx + dy * dy + dz * dz)
    sxmin, sxmax = min(ax, bx), max(ax, bx)
    symin, symax = min(ay, by), max(ay, by)

    p = packed.py
    kinds = p.kind
    heights = p.height
    vx, vy = p.vx, p.vy
    out = []
    for o in range(len(kinds)):
        bxmin, bxmax, bymin, bymax = p.bbox[o]
        if bxmax < sxmin or bxmin > sxmax or bymax < symin or bymin > symax:
            continue
        top = heights[o]
        is_building = kinds[o] == KIND_BUILDING
        s, n = p.vstart[o], p.vcount[o]
        xs = vx[s:s + n]
        ys = vy[s:s + n]

        hits = []
        for k in range(n):
            x0, y0 = xs[k], ys[k]
            k1 = k + 1 if k + 1 < n else 0
            ex, ey = xs[k1] - x0, ys[k1] - y0
            den = dx * ey - dy * ex
            if den == 0.0:
                continue
            rx, ry = x0 - ax, y0 - ay
            t = (rx * ey - ry * ex) / den
            u = (rx * dy - ry * dx) / den
            if 0.0 <= t <= 1.0 and 0.0 <= u < 1.0:
                hits.append(t)

        # inside intervals of the footprint along the ray
        ts = sorted(set(hits) | {0.0, 1.0})
        intervals = []
        for t0, t1 in zip(ts, ts[1:]):
            if t1 - t0 <= _MIN_INTERVAL:
                continue
            tm = 0.5 * (t0 + t1)
            if point_in_polygon(ax + tm * dx, ay + tm * dy, xs, ys):
                # sub-epsilon gaps come from rounding at vertices; bridge them
                if intervals and t0 - intervals[-1][1] <= _MIN_INTERVAL:
                    intervals[-1][1] = t1
                else:
                    intervals.append([t0, t1])
        if not intervals:
            continue

        # walls sit where the ray enters or leaves the footprint, below the roof
        if is_building:
            for t0, t1 in intervals:
                if t0 > 0.0 and az + t0 * dz < top:
                    out.append((WALL, t0, o, p.wall_db[o]))
                if t1 < 1.0 and az + t1 * dz < top:
                    out.append((WALL, t1, o, p.wall_db[o]))

        blocked = False
        veg_depth = 0.0
        veg_start = math.inf
        for t0, t1 in intervals:
            z0 = az + t0 * dz
            z1 = az + t1 * dz
            zlo, zhi = (z0, z1) if z0 <= z1 else (z1, z0)
            if zlo < top:
                blocked = True
            if is_building:
                nf = p.floors[o]
                step = top / (nf + 1)
                for f in range(1, nf + 1):
                    zf = f * step
                    if zlo < zf < zhi:
                        out.append((FLOOR, (zf - az) / dz, o, 0.0))
            else:
                if z0 < top and z1 < top:
                    lo, hi = t0, t1
                elif z0 < top or z1 < top:
                    th = (top - az) / dz
                    lo, hi = (t0, th) if z0 < top else (th, t1)
                else:
                    continue
                veg_depth += (hi - lo) * length2
                veg_start = min(veg_start, lo)
        if not is_building and veg_start < math.inf:
            out.append((VEGETATION_CROSSING, veg_start, o, veg_depth))

        if not blocked:
            best_v, best_t = -math.inf, 0.0
            for t0, t1 in intervals:
                cands = [t0, t1]
                ts_ = knife_edge_t_star(az, dz, top)
                if t0 < ts_ < t1:
                    cands.append(ts_)
                for t in cands:
                    v = fresnel_v(top - (az + t * dz), t, length3, wavelength)
                    if v > best_v:
                        best_v, best_t = v, t
            if best_v > KNIFE_EDGE_V_THRESHOLD:
                out.append((KNIFE_EDGE, best_t, o, best_v))
    return out


@dataclass(frozen=True)
class Crossing:
    """One attenuating event along a link.

    ``kind`` is ``wall``, ``floor``, ``vegetation`` or ``knife_edge``;
    ``material`` is set for walls, ``depth_m`` for vegetation and ``v`` for
    knife edges.
    """

    kind: str
    along_m: float
    obstruction_id: str
    material: str | None = None
    depth_m: float = 0.0
    v: float = 0.0


def trace_crossings(a, b, site) -> list[Crossing]:
    """All crossings of the straight ray a -> b, ordered by distance from a."""
    if (a.x, a.y, a.z) == (b.x, b.y, b.z):
        raise DomainError("trace_crossings needs distinct endpoints")
    raw = trace_link(a.x, a.y, a.z, b.x, b.y, b.z, site.packed, site.config.wavelength_m)
    length3 = math.dist((a.x, a.y, a.z), (b.x, b.y, b.z))
    obs = site.obstructions
    crossings = []
    for kind, t, o, value in sorted(raw, key=lambda r: (r[1], r[0], obs[r[2]].id)):
        ob = obs[o]
        along = min(max(t, 0.0), 1.0) * length3
        if kind == WALL:
            crossings.append(Crossing("wall", along, ob.id, material=ob.material))
        elif kind == FLOOR:
            crossings.append(Crossing("floor", along, ob.id))
        elif kind == VEGETATION_CROSSING:
            crossings.append(Crossing("vegetation", along, ob.id, depth_m=value))
        else:
            crossings.append(Crossing("knife_edge", along, ob.id, v=value))
    return crossings
