import math
from collections import Counter

import pytest
from hypothesis import assume, given, settings, strategies as st

from loraplan.errors import DomainError
from loraplan.geometry import (knife_edge_t_star, point_in_polygon, polygon_area, polygon_is_simple,
                               segments_intersect, trace_crossings)
from loraplan.site import Point3, site_from_dict

from conftest import box


def site_with(obstructions, frequency_hz=868e6):
    return site_from_dict({
        "grid": {"cell_size_m": 10, "nx": 100, "ny": 100},
        "config": {"frequency_hz": frequency_hz},
        "gateways": [],
        "obstructions": obstructions,
    })


def building(oid, fp, h, material="concrete", floors=0):
    return {"id": oid, "kind": "building", "footprint": fp, "height_m": h, "material": material,
            "floor_count": floors}


def kinds(crossings):
    return [c.kind for c in crossings]


def test_ray_clears_building():
    site = site_with([building("b", box(40, -5, 60, 5), 10)])
    assert trace_crossings(Point3(0, 0, 30), Point3(100, 0, 30), site) == []


def test_low_ray_through_building():
    site = site_with([building("b", box(40, -5, 60, 5), 10)])
    out = trace_crossings(Point3(0, 0, 1.5), Point3(100, 0, 1.5), site)
    walls = [c for c in out if c.kind == "wall"]
    assert len(walls) == 2
    assert all(c.material == "concrete" and c.obstruction_id == "b" for c in walls)
    assert [c.along_m for c in walls] == pytest.approx([40.0, 60.0])
    assert kinds(out) == ["wall", "wall"]


def test_knife_edge_at_zero_clearance():
    # ridge under the midpoint of a level 1 km link, its top exactly at ray height
    site = site_with([building("ridge", box(495, -50, 505, 50), 20)])
    out = trace_crossings(Point3(0, 0, 20), Point3(1000, 0, 20), site)
    edges = [c for c in out if c.kind == "knife_edge"]
    assert len(edges) == 1
    assert edges[0].v == 0.0
    assert not [c for c in out if c.kind == "wall"]


def test_floor_crossings():
    # ray climbs from 1 m to 41 m through a 40 m tower with 3 floor planes at 10, 20, 30 m
    site = site_with([building("t", box(-10, -10, 110, 10), 40, floors=3)])
    out = trace_crossings(Point3(0, 0, 1), Point3(100, 0, 41), site)
    floors = [c for c in out if c.kind == "floor"]
    assert len(floors) == 3
    assert [c.along_m / math.dist((0, 0, 1), (100, 0, 41)) for c in floors] == pytest.approx(
        [9 / 40, 19 / 40, 29 / 40])


def test_vegetation_depth():
    site = site_with([{"id": "grove", "kind": "vegetation", "footprint": box(20, -30, 50, 30),
                       "height_m": 12}])
    out = trace_crossings(Point3(0, 0, 1.5), Point3(100, 0, 1.5), site)
    veg = [c for c in out if c.kind == "vegetation"]
    assert len(veg) == 1 and veg[0].depth_m == pytest.approx(30.0)


def test_identical_endpoints():
    with pytest.raises(DomainError):
        trace_crossings(Point3(1, 1, 1), Point3(1, 1, 1), site_with([]))


def test_concave_building_entered_twice():
    # U shape: the ray passes through both arms and the open courtyard between them
    u = [{"x": 0, "y": 0}, {"x": 60, "y": 0}, {"x": 60, "y": 40}, {"x": 40, "y": 40},
         {"x": 40, "y": 10}, {"x": 20, "y": 10}, {"x": 20, "y": 40}, {"x": 0, "y": 40}]
    site = site_with([building("u", u, 10, "brick")])
    out = trace_crossings(Point3(-10, 20, 1.5), Point3(70, 20, 1.5), site)
    assert kinds(out) == ["wall"] * 4


def test_knife_edge_t_star_is_argmax():
    # ray clears the flat top everywhere, so v < 0 and t* is its least negative point
    az, dz, top = 20.0, 10.0, 15.0
    t = knife_edge_t_star(az, dz, top)

    def score(s):
        return (top - az - s * dz) / math.sqrt(s * (1 - s))

    assert all(score(t) >= score(s) - 1e-12 for s in [k / 1000 for k in range(1, 1000)])


def test_polygon_helpers():
    sq = [Point3(*p) for p in ((0, 0), (4, 0), (4, 4), (0, 4))]
    assert polygon_area(sq) == 16
    assert polygon_area(sq[::-1]) == -16
    assert polygon_is_simple(sq)
    assert point_in_polygon(1, 1, [0, 4, 4, 0], [0, 0, 4, 4])
    assert not point_in_polygon(5, 1, [0, 4, 4, 0], [0, 0, 4, 4])
    assert segments_intersect((0, 0), (2, 2), (0, 2), (2, 0))
    assert not segments_intersect((0, 0), (1, 0), (0, 1), (1, 1))


SCENE = [
    building("a", box(100, 100, 180, 160), 18, "brick", 3),
    building("b", [{"x": 300, "y": 300}, {"x": 420, "y": 280}, {"x": 450, "y": 400},
                   {"x": 330, "y": 430}], 30, "concrete", 6),
    building("c", box(600, 150, 640, 700), 8, "wood"),
    {"id": "v", "kind": "vegetation", "footprint": box(200, 500, 500, 650), "height_m": 14},
]
pt = st.builds(Point3, st.floats(0, 800), st.floats(0, 800), st.floats(1, 40))


@settings(max_examples=200, deadline=None)
@given(pt, pt)
def test_reciprocity(a, b):
    assume(math.dist((a.x, a.y), (b.x, b.y)) > 1e-6)
    site = site_with(SCENE)
    ab = trace_crossings(a, b, site)
    ba = trace_crossings(b, a, site)
    assert Counter(kinds(ab)) == Counter(kinds(ba))


@settings(max_examples=150, deadline=None)
@given(pt, pt, st.integers(-5000, 5000), st.integers(-5000, 5000))
def test_translation_invariance(a, b, dx, dy):
    # integer offsets keep every coordinate exactly representable
    assume(math.dist((a.x, a.y), (b.x, b.y)) > 1e-6)
    a = Point3(round(a.x), round(a.y), a.z)
    b = Point3(round(b.x), round(b.y), b.z)
    assume((a.x, a.y) != (b.x, b.y))
    site = site_with(SCENE)
    moved = site.translated(dx, dy)
    ref = trace_crossings(a, b, site)
    out = trace_crossings(Point3(a.x + dx, a.y + dy, a.z), Point3(b.x + dx, b.y + dy, b.z), moved)
    assert kinds(out) == kinds(ref)
    assert [c.obstruction_id for c in out] == [c.obstruction_id for c in ref]
    for c, r in zip(out, ref):
        assert c.along_m == pytest.approx(r.along_m, abs=1e-6)
        assert c.depth_m == pytest.approx(r.depth_m, abs=1e-6)
        assert c.v == pytest.approx(r.v, abs=1e-6)


@settings(max_examples=150, deadline=None)
@given(pt, pt)
def test_vegetation_depth_bounded_and_convex_walls_even(a, b):
    assume(math.dist((a.x, a.y), (b.x, b.y)) > 1e-6)
    site = site_with(SCENE)
    out = trace_crossings(a, b, site)
    length2 = math.dist((a.x, a.y), (b.x, b.y))
    for c in out:
        if c.kind == "vegetation":
            assert 0 <= c.depth_m <= length2 + 1e-9


@settings(max_examples=150, deadline=None)
@given(st.floats(-1000, -1), st.floats(1801, 3000), st.floats(-50, 50), st.floats(-50, 50),
       st.floats(1, 9), st.floats(1, 9))
def test_pierced_convex_building_even_walls(x0, x1, y0, y1, z0, z1):
    # both endpoints outside, ray always below the roof: walls come in pairs
    site = site_with([building("box", box(0, -100, 800, 100), 10)])
    out = trace_crossings(Point3(x0, y0, z0), Point3(x1, y1, z1), site)
    assert len([c for c in out if c.kind == "wall"]) == 2
