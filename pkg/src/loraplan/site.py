"""Site data model: grid, obstructions, gateways and radio environment.

A site file is a JSON object with top-level keys ``grid``, ``config``,
``node_profile``, ``gateways``, ``obstructions`` and (optionally)
``regions``. Unknown keys are rejected. See ``docs/site_schema.md``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

from . import radio
from .errors import SiteParseError

BUILDING = "building"
VEGETATION = "vegetation"
OBSTRUCTION_KINDS = (BUILDING, VEGETATION)
MATERIALS = ("brick", "concrete", "wood", "glass")
ENVIRONMENTS = ("open", "rural", "suburban", "urban")

DEFAULT_MATERIAL_LOSS_DB = {"brick": 8.0, "concrete": 12.0, "wood": 4.0, "glass": 2.0}
DEFAULT_FLOOR_LOSS_DB = 15.0
DEFAULT_VEGETATION_LOSS_DB_PER_M = 0.5

MIN_FREQUENCY_HZ = 100e6
MAX_FREQUENCY_HZ = 6e9


@dataclass(frozen=True)
class Point3:
    x: float
    y: float
    z: float = 0.0

    def is_finite(self) -> bool:
        return all(math.isfinite(c) for c in (self.x, self.y, self.z))


@dataclass(frozen=True)
class GridSpec:
    cell_size_m: float
    nx: int
    ny: int
    node_height_m: float = 1.5

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    def cell_center(self, i: int, j: int) -> tuple[float, float]:
        return ((i + 0.5) * self.cell_size_m, (j + 0.5) * self.cell_size_m)

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        """Grid cell containing (x, y), clamped into the grid."""
        i = min(max(int(math.floor(x / self.cell_size_m)), 0), self.nx - 1)
        j = min(max(int(math.floor(y / self.cell_size_m)), 0), self.ny - 1)
        return i, j


@dataclass(frozen=True)
class Obstruction:
    id: str
    kind: str
    footprint: tuple[Point3, ...]
    height_m: float
    material: str | None = None
    floor_count: int = 0

    def floor_heights(self) -> list[float]:
        """Floor planes, evenly spaced between the ground and the roof."""
        step = self.height_m / (self.floor_count + 1)
        return [k * step for k in range(1, self.floor_count + 1)]


@dataclass(frozen=True)
class Gateway:
    id: str
    position: Point3
    antenna_gain_dbi: float = 0.0


@dataclass(frozen=True)
class NodeProfile:
    antenna_gain_dbi: float = 0.0
    antenna_height_m: float = 1.5


@dataclass(frozen=True)
class Region:
    id: str
    footprint: tuple[Point3, ...]


@dataclass(frozen=True)
class SiteConfig:
    frequency_hz: float = 865.5e6
    bandwidth_hz: int = 125000
    coding_rate: str = "4/5"
    environment: str = "suburban"
    duty_cycle_limit: float = 0.01
    link_margin_db: float = 3.0
    shadowing_sigma_db: float = 0.0
    rng_seed: int = 0
    noise_figure_db: float = 6.0
    material_loss_table: dict = field(default_factory=lambda: dict(DEFAULT_MATERIAL_LOSS_DB))
    floor_loss_db: float = DEFAULT_FLOOR_LOSS_DB
    vegetation_loss_db_per_m: float = DEFAULT_VEGETATION_LOSS_DB_PER_M
    supply_voltage_v: float = 3.3
    tx_current_table: dict = field(default_factory=radio.default_tx_current_table)

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.frequency_hz


SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class Site:
    grid: GridSpec
    config: SiteConfig
    node_profile: NodeProfile
    gateways: tuple[Gateway, ...] = ()
    obstructions: tuple[Obstruction, ...] = ()
    regions: tuple[Region, ...] = ()

    def gateway(self, gateway_id: str) -> Gateway:
        for gw in self.gateways:
            if gw.id == gateway_id:
                return gw
        raise KeyError(gateway_id)

    @cached_property
    def packed(self):
        """Flat obstruction arrays consumed by the loss kernels."""
        from .geometry import pack_obstructions
        return pack_obstructions(self)

    def translated(self, dx: float, dy: float) -> "Site":
        def mv(p):
            return Point3(p.x + dx, p.y + dy, p.z)
        return Site(
            grid=self.grid,
            config=self.config,
            node_profile=self.node_profile,
            gateways=tuple(Gateway(g.id, mv(g.position), g.antenna_gain_dbi) for g in self.gateways),
            obstructions=tuple(
                Obstruction(o.id, o.kind, tuple(mv(p) for p in o.footprint), o.height_m,
                            o.material, o.floor_count)
                for o in self.obstructions),
            regions=tuple(Region(r.id, tuple(mv(p) for p in r.footprint)) for r in self.regions),
        )


# ---------------------------------------------------------------------------
# parsing

_TOP_KEYS = {"grid", "config", "node_profile", "gateways", "obstructions", "regions"}
_GRID_KEYS = {"cell_size_m", "nx", "ny", "node_height_m"}
_CONFIG_KEYS = {f for f in SiteConfig.__dataclass_fields__}
_NODE_KEYS = {"antenna_gain_dbi", "antenna_height_m"}
_GATEWAY_KEYS = {"id", "position", "antenna_gain_dbi"}
_OBSTRUCTION_KEYS = {"id", "kind", "footprint", "height_m", "material", "floor_count"}
_REGION_KEYS = {"id", "footprint"}
_POINT_KEYS = {"x", "y", "z"}


class _Reader:
    """Typed field access with the offending path in every error."""

    def __init__(self, obj, path, allowed, required=()):
        if not isinstance(obj, dict):
            raise SiteParseError("expected an object", field=path or "<root>")
        unknown = sorted(set(obj) - set(allowed))
        if unknown:
            raise SiteParseError(f"unknown key {unknown[0]!r}", field=_join(path, unknown[0]))
        for key in required:
            if key not in obj:
                raise SiteParseError("missing required key", field=_join(path, key))
        self.obj = obj
        self.path = path

    def has(self, key):
        return key in self.obj

    def raw(self, key, default=None):
        return self.obj.get(key, default)

    def number(self, key, default=None):
        if key not in self.obj:
            return default
        value = self.obj[key]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SiteParseError("expected a number", field=_join(self.path, key))
        return float(value)

    def integer(self, key, default=None):
        if key not in self.obj:
            return default
        value = self.obj[key]
        if isinstance(value, bool) or not isinstance(value, int):
            if isinstance(value, float) and value.is_integer():
                return int(value)
            raise SiteParseError("expected an integer", field=_join(self.path, key))
        return value

    def string(self, key, default=None):
        if key not in self.obj:
            return default
        value = self.obj[key]
        if not isinstance(value, str):
            raise SiteParseError("expected a string", field=_join(self.path, key))
        return value

    def array(self, key, default=()):
        if key not in self.obj:
            return default
        value = self.obj[key]
        if not isinstance(value, list):
            raise SiteParseError("expected an array", field=_join(self.path, key))
        return value


def _join(path, key):
    return f"{path}.{key}" if path else str(key)


def _point(obj, path, require_z):
    r = _Reader(obj, path, _POINT_KEYS, ("x", "y", "z") if require_z else ("x", "y"))
    return Point3(r.number("x"), r.number("y"), r.number("z", 0.0))


def _footprint(items, path):
    return tuple(_point(p, f"{path}[{k}]", False) for k, p in enumerate(items))


def _number_map(obj, path, key_type):
    if not isinstance(obj, dict):
        raise SiteParseError("expected an object", field=path)
    out = {}
    for key, value in obj.items():
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SiteParseError("expected a number", field=_join(path, key))
        if key_type is int:
            try:
                k = int(key)
            except ValueError:
                raise SiteParseError("expected an integer key", field=_join(path, key)) from None
        else:
            k = key
        out[k] = float(value)
    return out


def site_from_dict(doc) -> Site:
    """Build a Site from an already-decoded JSON object tree."""
    top = _Reader(doc, "", _TOP_KEYS, ("grid", "gateways"))

    np_r = _Reader(top.raw("node_profile", {}), "node_profile", _NODE_KEYS)
    defaults = NodeProfile()
    node_profile = NodeProfile(
        antenna_gain_dbi=np_r.number("antenna_gain_dbi", defaults.antenna_gain_dbi),
        antenna_height_m=np_r.number("antenna_height_m", defaults.antenna_height_m),
    )

    g = _Reader(top.raw("grid"), "grid", _GRID_KEYS, ("cell_size_m", "nx", "ny"))
    grid = GridSpec(
        cell_size_m=g.number("cell_size_m"),
        nx=g.integer("nx"),
        ny=g.integer("ny"),
        node_height_m=g.number("node_height_m", node_profile.antenna_height_m),
    )

    c = _Reader(top.raw("config", {}), "config", _CONFIG_KEYS)
    base = SiteConfig()
    config = SiteConfig(
        frequency_hz=c.number("frequency_hz", base.frequency_hz),
        bandwidth_hz=c.integer("bandwidth_hz", base.bandwidth_hz),
        coding_rate=c.string("coding_rate", base.coding_rate),
        environment=c.string("environment", base.environment),
        duty_cycle_limit=c.number("duty_cycle_limit", base.duty_cycle_limit),
        link_margin_db=c.number("link_margin_db", base.link_margin_db),
        shadowing_sigma_db=c.number("shadowing_sigma_db", base.shadowing_sigma_db),
        rng_seed=c.integer("rng_seed", base.rng_seed),
        noise_figure_db=c.number("noise_figure_db", base.noise_figure_db),
        material_loss_table=(_number_map(c.raw("material_loss_table"), "config.material_loss_table", str)
                             if c.has("material_loss_table") else dict(DEFAULT_MATERIAL_LOSS_DB)),
        floor_loss_db=c.number("floor_loss_db", base.floor_loss_db),
        vegetation_loss_db_per_m=c.number("vegetation_loss_db_per_m", base.vegetation_loss_db_per_m),
        supply_voltage_v=c.number("supply_voltage_v", base.supply_voltage_v),
        tx_current_table=(_number_map(c.raw("tx_current_table"), "config.tx_current_table", int)
                          if c.has("tx_current_table") else radio.default_tx_current_table()),
    )

    gateways = []
    for k, item in enumerate(top.array("gateways")):
        path = f"gateways[{k}]"
        r = _Reader(item, path, _GATEWAY_KEYS, ("id", "position"))
        gateways.append(Gateway(
            id=r.string("id"),
            position=_point(r.raw("position"), f"{path}.position", True),
            antenna_gain_dbi=r.number("antenna_gain_dbi", 0.0),
        ))

    obstructions = []
    for k, item in enumerate(top.array("obstructions")):
        path = f"obstructions[{k}]"
        r = _Reader(item, path, _OBSTRUCTION_KEYS, ("id", "kind", "footprint", "height_m"))
        obstructions.append(Obstruction(
            id=r.string("id"),
            kind=r.string("kind"),
            footprint=_footprint(r.array("footprint"), f"{path}.footprint"),
            height_m=r.number("height_m"),
            material=r.string("material"),
            floor_count=r.integer("floor_count", 0),
        ))

    regions = []
    for k, item in enumerate(top.array("regions")):
        path = f"regions[{k}]"
        r = _Reader(item, path, _REGION_KEYS, ("id", "footprint"))
        regions.append(Region(r.string("id"), _footprint(r.array("footprint"), f"{path}.footprint")))

    return Site(grid, config, node_profile, tuple(gateways), tuple(obstructions), tuple(regions))


def loads_site(text: str) -> Site:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SiteParseError(exc.msg, line=exc.lineno) from None
    return site_from_dict(doc)


def parse_site(path) -> Site:
    """Read and parse a site file, applying documented defaults."""
    text = Path(path).read_text(encoding="utf-8")
    return loads_site(text)


# ---------------------------------------------------------------------------
# serialization


def _point_dict(p: Point3) -> dict:
    return {"x": p.x, "y": p.y, "z": p.z}


def site_to_dict(site: Site) -> dict:
    cfg = site.config
    doc = {
        "grid": {
            "cell_size_m": site.grid.cell_size_m,
            "nx": site.grid.nx,
            "ny": site.grid.ny,
            "node_height_m": site.grid.node_height_m,
        },
        "config": {
            "frequency_hz": cfg.frequency_hz,
            "bandwidth_hz": cfg.bandwidth_hz,
            "coding_rate": cfg.coding_rate,
            "environment": cfg.environment,
            "duty_cycle_limit": cfg.duty_cycle_limit,
            "link_margin_db": cfg.link_margin_db,
            "shadowing_sigma_db": cfg.shadowing_sigma_db,
            "rng_seed": cfg.rng_seed,
            "noise_figure_db": cfg.noise_figure_db,
            "material_loss_table": dict(cfg.material_loss_table),
            "floor_loss_db": cfg.floor_loss_db,
            "vegetation_loss_db_per_m": cfg.vegetation_loss_db_per_m,
            "supply_voltage_v": cfg.supply_voltage_v,
            "tx_current_table": {str(k): v for k, v in sorted(cfg.tx_current_table.items())},
        },
        "node_profile": {
            "antenna_gain_dbi": site.node_profile.antenna_gain_dbi,
            "antenna_height_m": site.node_profile.antenna_height_m,
        },
        "gateways": [
            {"id": g.id, "position": _point_dict(g.position), "antenna_gain_dbi": g.antenna_gain_dbi}
            for g in site.gateways
        ],
        "obstructions": [],
    }
    for o in site.obstructions:
        item = {"id": o.id, "kind": o.kind, "footprint": [_point_dict(p) for p in o.footprint],
                "height_m": o.height_m, "floor_count": o.floor_count}
        if o.material is not None:
            item["material"] = o.material
        doc["obstructions"].append(item)
    if site.regions:
        doc["regions"] = [{"id": r.id, "footprint": [_point_dict(p) for p in r.footprint]}
                          for r in site.regions]
    return doc


def dumps_site(site: Site) -> str:
    return json.dumps(site_to_dict(site), indent=2)


def write_site(site: Site, path) -> None:
    Path(path).write_text(dumps_site(site) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# validation


def validate_site(site: Site) -> list[str]:
    """Return one message per violated invariant; empty when the site is valid."""
    from .geometry import polygon_area, polygon_is_simple

    out = []

    grid = site.grid
    if not (math.isfinite(grid.cell_size_m) and grid.cell_size_m > 0):
        out.append("GridSpec.cell_size_m: must be > 0")
    if grid.nx < 1 or grid.ny < 1:
        out.append("GridSpec.nx/ny: cell counts must be positive")
    if not (math.isfinite(grid.node_height_m) and grid.node_height_m > 0):
        out.append("GridSpec.node_height_m: must be > 0")

    cfg = site.config
    if not MIN_FREQUENCY_HZ <= cfg.frequency_hz <= MAX_FREQUENCY_HZ:
        out.append("SiteConfig.frequency_hz: must lie in 100 MHz - 6 GHz")
    if cfg.bandwidth_hz not in radio.BANDWIDTHS_HZ:
        out.append("SiteConfig.bandwidth_hz: must be one of 125000, 250000, 500000")
    if cfg.coding_rate not in radio.CODING_RATES:
        out.append("SiteConfig.coding_rate: must be one of 4/5, 4/6, 4/7, 4/8")
    if cfg.environment not in ENVIRONMENTS:
        out.append(f"SiteConfig.environment: must be one of {', '.join(ENVIRONMENTS)}")
    if not 0 < cfg.duty_cycle_limit <= 1:
        out.append("SiteConfig.duty_cycle_limit: must lie in (0, 1]")
    if not cfg.link_margin_db >= 0:
        out.append("SiteConfig.link_margin_db: must be >= 0")
    if not cfg.shadowing_sigma_db >= 0:
        out.append("SiteConfig.shadowing_sigma_db: must be >= 0")
    if not -(2 ** 63) <= cfg.rng_seed < 2 ** 64:
        out.append("SiteConfig.rng_seed: must fit in 64 bits")
    for name, loss in sorted(cfg.material_loss_table.items()):
        if not loss >= 0:
            out.append(f"SiteConfig.material_loss_table[{name}]: loss must be >= 0")
    if not cfg.floor_loss_db >= 0:
        out.append("SiteConfig.floor_loss_db: loss must be >= 0")
    if not cfg.vegetation_loss_db_per_m >= 0:
        out.append("SiteConfig.vegetation_loss_db_per_m: loss must be >= 0")
    if not cfg.supply_voltage_v > 0:
        out.append("SiteConfig.supply_voltage_v: must be > 0")
    for p, ma in sorted(cfg.tx_current_table.items()):
        if not ma > 0:
            out.append(f"SiteConfig.tx_current_table[{p}]: current must be > 0")

    if not site.node_profile.antenna_height_m > 0:
        out.append("NodeProfile.antenna_height_m: must be > 0")

    seen = set()
    for gw in site.gateways:
        if gw.id in seen:
            out.append(f"Gateway {gw.id}: duplicate id")
        seen.add(gw.id)
        if not gw.position.is_finite():
            out.append(f"Gateway {gw.id}: Gateway.position coordinates must be finite")
        elif not gw.position.z > 0:
            out.append(f"Gateway {gw.id}: Gateway.position.z must be > 0")

    seen = set()
    for ob in site.obstructions:
        tag = f"Obstruction {ob.id}"
        if ob.id in seen:
            out.append(f"{tag}: duplicate id")
        seen.add(ob.id)
        if ob.kind not in OBSTRUCTION_KINDS:
            out.append(f"{tag}: kind must be building or vegetation")
        if not all(p.is_finite() for p in ob.footprint):
            out.append(f"{tag}: footprint coordinates must be finite")
        elif len(ob.footprint) < 3 or polygon_area(ob.footprint) == 0:
            out.append(f"{tag}: footprint non-degenerate (needs >= 3 vertices and area > 0)")
        elif not polygon_is_simple(ob.footprint):
            out.append(f"{tag}: footprint must be simple (self-intersection)")
        if not (math.isfinite(ob.height_m) and ob.height_m > 0):
            out.append(f"{tag}: height_m must be > 0")
        if ob.kind == VEGETATION:
            if ob.material is not None:
                out.append(f"{tag}: vegetation carries no material")
            if ob.floor_count != 0:
                out.append(f"{tag}: vegetation floor_count must be 0")
        elif ob.kind == BUILDING:
            if ob.material not in MATERIALS:
                out.append(f"{tag}: material must be one of {', '.join(MATERIALS)}")
            elif ob.material not in cfg.material_loss_table:
                out.append(f"{tag}: material {ob.material} missing from material_loss_table")
            if ob.floor_count < 0:
                out.append(f"{tag}: floor_count must be >= 0")

    for reg in site.regions:
        if len(reg.footprint) < 3 or polygon_area(reg.footprint) == 0:
            out.append(f"Region {reg.id}: footprint non-degenerate (needs >= 3 vertices and area > 0)")
    return out
