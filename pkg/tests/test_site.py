import json
import math

import pytest
from hypothesis import given, settings, strategies as st

from loraplan.errors import SiteParseError
from loraplan.radio import default_tx_current_table
from loraplan.site import (Gateway, Obstruction, Point3, dumps_site, loads_site, parse_site,
                           site_from_dict, site_to_dict, validate_site, write_site)

from conftest import box, minimal_doc

# default table as documented in docs/site_schema.md, rounded to 4 decimals there
DOC_TABLE = {2: 24, 3: 24.3333, 4: 24.6667, 5: 25, 6: 26.6667, 7: 28.3333, 8: 30, 9: 32.6667,
             10: 35.3333, 11: 38, 12: 40.3333, 13: 42.6667, 14: 45, 15: 60, 16: 75, 17: 90,
             18: 100, 19: 110, 20: 120}


def test_minimal_file(tmp_path):
    path = tmp_path / "site.json"
    path.write_text(json.dumps(minimal_doc()), encoding="utf-8")
    site = parse_site(path)
    assert site.grid.n_cells == 100
    assert site.config.coding_rate == "4/5"
    assert site.config.environment == "suburban"
    assert site.grid.node_height_m == site.node_profile.antenna_height_m == 1.5
    assert validate_site(site) == []


def test_default_tx_table_applied():
    site = site_from_dict(minimal_doc(frequency_hz=866e6))
    assert site.config.frequency_hz == 866e6
    assert sorted(site.config.tx_current_table) == sorted(DOC_TABLE)
    for k, v in DOC_TABLE.items():
        assert site.config.tx_current_table[k] == pytest.approx(v, abs=5e-5)


def test_user_tx_table_verbatim():
    site = site_from_dict(minimal_doc(tx_current_table={"14": 44, "20": 125}))
    assert site.config.tx_current_table == {14: 44.0, 20: 125.0}


@pytest.mark.parametrize("text,line", [('{\n "grid": {\n  "nx": 3,,\n}}', 3), ("{", 1)])
def test_syntax_error_has_line(text, line):
    with pytest.raises(SiteParseError) as info:
        loads_site(text)
    assert info.value.line == line


@pytest.mark.parametrize("mutate,field", [
    (lambda d: d.pop("grid"), "grid"),
    (lambda d: d["grid"].update(nx="ten"), "grid.nx"),
    (lambda d: d["grid"].update(extra=1), "grid.extra"),
    (lambda d: d["config"].update(frequency=1), "config.frequency"),
    (lambda d: d["gateways"][0]["position"].pop("z"), "gateways[0].position.z"),
    (lambda d: d["gateways"][0].update(id=3), "gateways[0].id"),
])
def test_schema_errors_name_field(mutate, field):
    doc = minimal_doc()
    mutate(doc)
    with pytest.raises(SiteParseError) as info:
        site_from_dict(doc)
    assert field in str(info.value)


def test_gateway_height_zero_violation():
    doc = minimal_doc()
    doc["gateways"][0]["position"]["z"] = 0
    violations = validate_site(site_from_dict(doc))
    assert len(violations) == 1
    assert "Gateway.position.z" in violations[0]


def test_two_vertex_footprint():
    doc = minimal_doc()
    doc["obstructions"] = [{"id": "wall-1", "kind": "building", "height_m": 5, "material": "brick",
                            "footprint": [{"x": 0, "y": 0}, {"x": 5, "y": 0}]}]
    violations = validate_site(site_from_dict(doc))
    assert len(violations) == 1
    assert "footprint non-degenerate" in violations[0] and "wall-1" in violations[0]


@pytest.mark.parametrize("obstruction,needle", [
    ({"kind": "building", "height_m": 5, "material": "marble"}, "material"),
    ({"kind": "building", "height_m": 5}, "material"),
    ({"kind": "building", "height_m": 0, "material": "wood"}, "height_m"),
    ({"kind": "vegetation", "height_m": 5, "material": "wood"}, "vegetation"),
    ({"kind": "vegetation", "height_m": 5, "floor_count": 2}, "floor_count"),
    ({"kind": "bunker", "height_m": 5}, "kind"),
])
def test_obstruction_violations(obstruction, needle):
    doc = minimal_doc()
    doc["obstructions"] = [dict(id="o", footprint=box(0, 0, 5, 5), **obstruction)]
    violations = validate_site(site_from_dict(doc))
    assert violations and any(needle in v and "o" in v for v in violations)


def test_bowtie_is_not_simple():
    doc = minimal_doc()
    doc["obstructions"] = [{"id": "bow", "kind": "building", "height_m": 5, "material": "brick",
                            "footprint": [{"x": 0, "y": 0}, {"x": 10, "y": 5},
                                          {"x": 10, "y": 0}, {"x": 0, "y": 3}]}]
    assert any("bow" in v and "simple" in v for v in validate_site(site_from_dict(doc)))


def test_config_violations():
    bad = site_from_dict(minimal_doc(frequency_hz=50e6, duty_cycle_limit=0, link_margin_db=-1,
                                     shadowing_sigma_db=-2, environment="desert"))
    msgs = " ".join(validate_site(bad))
    for field in ("frequency_hz", "duty_cycle_limit", "link_margin_db", "shadowing_sigma_db",
                  "environment"):
        assert field in msgs


def test_demo_campus_valid(demo_site):
    assert validate_site(demo_site) == []
    assert demo_site.grid.n_cells == 10000


def test_demo_round_trip(demo_site, tmp_path):
    assert loads_site(dumps_site(demo_site)) == demo_site
    write_site(demo_site, tmp_path / "copy.json")
    assert parse_site(tmp_path / "copy.json") == demo_site


def test_unknown_gateway():
    site = site_from_dict(minimal_doc())
    assert site.gateway("gw").id == "gw"
    with pytest.raises(KeyError):
        site.gateway("nope")


def test_cell_of_clamps():
    grid = site_from_dict(minimal_doc()).grid
    assert grid.cell_of(15, 95) == (1, 9)
    assert grid.cell_of(-4, 1e6) == (0, 9)
    assert grid.cell_center(0, 0) == (5.0, 5.0)


coord = st.floats(-1e4, 1e4, allow_nan=False).map(lambda v: round(v, 3))


@st.composite
def sites(draw):
    doc = {
        "grid": {"cell_size_m": draw(st.floats(0.5, 100)), "nx": draw(st.integers(1, 50)),
                 "ny": draw(st.integers(1, 50))},
        "config": {"environment": draw(st.sampled_from(["open", "rural", "suburban", "urban"])),
                   "rng_seed": draw(st.integers(0, 2 ** 64 - 1)),
                   "shadowing_sigma_db": draw(st.floats(0, 10))},
        "node_profile": {"antenna_gain_dbi": draw(st.floats(-5, 10))},
        "gateways": [{"id": f"g{k}", "position": {"x": draw(coord), "y": draw(coord),
                                                  "z": draw(st.floats(1, 100))}}
                     for k in range(draw(st.integers(0, 3)))],
        "obstructions": [],
    }
    for k in range(draw(st.integers(0, 4))):
        x, y = draw(coord), draw(coord)
        w, h = draw(st.floats(1, 200)), draw(st.floats(1, 200))
        if draw(st.booleans()):
            doc["obstructions"].append({"id": f"b{k}", "kind": "building", "footprint": box(x, y, x + w, y + h),
                                        "height_m": draw(st.floats(1, 80)),
                                        "material": draw(st.sampled_from(["brick", "concrete", "wood", "glass"])),
                                        "floor_count": draw(st.integers(0, 20))})
        else:
            doc["obstructions"].append({"id": f"v{k}", "kind": "vegetation", "footprint": box(x, y, x + w, y + h),
                                        "height_m": draw(st.floats(1, 30))})
    return site_from_dict(doc)


@settings(max_examples=60, deadline=None)
@given(sites())
def test_round_trip_property(site):
    assert loads_site(dumps_site(site)) == site
    assert site_from_dict(site_to_dict(site)) == site


def test_footprint_ignores_z():
    doc = minimal_doc()
    doc["obstructions"] = [{"id": "o", "kind": "building", "height_m": 5, "material": "brick",
                            "footprint": [dict(p, z=3) for p in box(0, 0, 5, 5)]}]
    site = site_from_dict(doc)
    assert isinstance(site.obstructions[0], Obstruction)
    assert validate_site(site) == []
