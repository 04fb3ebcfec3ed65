"""Multi-loss propagation model.

The total path loss of a link is the dB sum of a base loss (free space or
Ericsson), wall / floor / vegetation attenuation along the straight ray,
knife-edge diffraction from obstructions intruding into the first Fresnel
zone, spatially keyed shadowing and an optional mobility penalty.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError
from .geometry import trace_crossings
from .site import MAX_FREQUENCY_HZ, MIN_FREQUENCY_HZ, SPEED_OF_LIGHT, Point3

VEGETATION_CAP_DB = 30.0
MAX_KNIFE_EDGES = 3
KNIFE_EDGE_MIN_V = -0.78

# (a0, a1, a2, a3) per environment
ERICSSON_PARAMS = {
    "urban": (36.2, 30.2, -12.0, 0.1),
    "suburban": (43.2, 68.93, -12.0, 0.1),
    "rural": (45.95, 100.6, -12.0, 0.1),
}

COMPONENTS = ("base_db", "wall_db", "floor_db", "vegetation_db", "diffraction_db",
              "shadowing_db", "mobility_db")


@dataclass(frozen=True)
class PathLossBreakdown:
    base_db: float
    wall_db: float
    floor_db: float
    vegetation_db: float
    diffraction_db: float
    shadowing_db: float
    mobility_db: float
    total_db: float

    def components(self) -> tuple[float, ...]:
        return tuple(getattr(self, name) for name in COMPONENTS)


def free_space_loss(distance_m: float, frequency_hz: float) -> float:
    if not (distance_m > 0 and frequency_hz > 0):
        raise DomainError("free_space_loss needs positive distance and frequency")
    return 32.45 + 20.0 * (math.log10(distance_m) - 3.0) + 20.0 * math.log10(frequency_hz / 1e6)


def ericsson_loss(distance_m, frequency_hz, base_height_m, mobile_height_m, environment,
                  params=None) -> float:
    """Ericsson 9999 median path loss in dB.

    ``params`` overrides the (a0, a1, a2, a3) coefficients for ``environment``.
    """
    if not (distance_m > 0 and base_height_m > 0 and mobile_height_m > 0):
        raise DomainError("ericsson_loss needs positive distance and heights")
    if not MIN_FREQUENCY_HZ <= frequency_hz <= MAX_FREQUENCY_HZ:
        raise DomainError(f"frequency {frequency_hz} Hz outside 100 MHz - 6 GHz")
    if params is None:
        try:
            params = ERICSSON_PARAMS[environment]
        except KeyError:
            raise DomainError(f"no Ericsson coefficients for environment {environment!r}") from None
    a0, a1, a2, a3 = params
    log_d = math.log10(distance_m) - 3.0
    log_hb = math.log10(base_height_m)
    log_f = math.log10(frequency_hz / 1e6)
    g = 44.49 * log_f - 4.78 * log_f ** 2
    return (a0 + a1 * log_d + a2 * log_hb + a3 * log_hb * log_d
            - 3.2 * math.log10(11.75 * mobile_height_m) ** 2 + g)


def base_loss(distance_m, frequency_hz, height_a_m, height_b_m, environment) -> float:
    """Free space for ``open`` sites, Ericsson otherwise; the taller end is the base station."""
    if environment == "open":
        return free_space_loss(distance_m, frequency_hz)
    return ericsson_loss(distance_m, frequency_hz, max(height_a_m, height_b_m),
                         min(height_a_m, height_b_m), environment)


def mwf_loss(crossings, config) -> tuple[float, float, float]:
    """Multi-wall-and-floor attenuation: (wall_db, floor_db, vegetation_db)."""
    wall_db = 0.0
    floors = 0
    depth = 0.0
    for c in crossings:
        if c.kind == "wall":
            try:
                wall_db += config.material_loss_table[c.material]
            except KeyError:
                raise ConfigurationError(f"material {c.material!r} missing from material_loss_table") from None
        elif c.kind == "floor":
            floors += 1
        elif c.kind == "vegetation":
            depth += c.depth_m
    vegetation_db = min(config.vegetation_loss_db_per_m * depth, VEGETATION_CAP_DB)
    return wall_db, config.floor_loss_db * floors, vegetation_db


def fresnel_radius(d1_m: float, d2_m: float, frequency_hz: float) -> float:
    if d1_m < 0 or d2_m < 0 or (d1_m == 0 and d2_m == 0):
        raise DomainError("fresnel_radius needs non-negative distances, not both zero")
    if not frequency_hz > 0:
        raise DomainError("fresnel_radius needs a positive frequency")
    wavelength = SPEED_OF_LIGHT / frequency_hz
    return math.sqrt(wavelength * d1_m * d2_m / (d1_m + d2_m))


def knife_edge_loss(v: float) -> float:
    """Single knife-edge diffraction loss J(v), dB."""
    if v <= KNIFE_EDGE_MIN_V:
        return 0.0
    w = v - 0.1
    return 6.9 + 20.0 * math.log10(math.sqrt(w * w + 1.0) + w)


def diffraction_loss(vs) -> float:
    """Sum of J(v) over the strongest few knife edges."""
    strongest = sorted(vs, reverse=True)[:MAX_KNIFE_EDGES]
    return sum((knife_edge_loss(v) for v in strongest), 0.0)


# ---------------------------------------------------------------------------
# shadowing: counter-based, keyed by (seed, i, j)

_M64 = (1 << 64) - 1
_M32 = (1 << 32) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MUL1 = 0xBF58476D1CE4E5B9
_MUL2 = 0x94D049BB133111EB
_TWO_M53 = 2.0 ** -53


def _splitmix(z: int) -> int:
    z = (z + _GOLDEN) & _M64
    z = ((z ^ (z >> 30)) * _MUL1) & _M64
    z = ((z ^ (z >> 27)) * _MUL2) & _M64
    return z ^ (z >> 31)


def _gauss_from_bits(b1: int, b2: int) -> float:
    u1 = ((b1 >> 11) + 1) * _TWO_M53   # (0, 1]
    u2 = (b2 >> 11) * _TWO_M53         # [0, 1)
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


def _cell_key(seed: int, i: int, j: int) -> int:
    return _splitmix((seed & _M64) ^ _splitmix(((i & _M32) << 32) | (j & _M32)))


def shadowing_sample(cell_index, seed: int, sigma_db: float) -> float:
    """Zero-mean Gaussian shadowing for one grid cell, reproducible from (seed, i, j)."""
    if sigma_db < 0:
        raise DomainError("sigma_db must be >= 0")
    if sigma_db == 0:
        return 0.0
    i, j = cell_index
    key = _cell_key(seed, i, j)
    return sigma_db * _gauss_from_bits(_splitmix(key ^ 1), _splitmix(key ^ 2))


def _splitmix_np(z):
    z = z + np.uint64(_GOLDEN)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MUL1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MUL2)
    return z ^ (z >> np.uint64(31))


def shadowing_field(ii, jj, seed: int, sigma_db: float) -> np.ndarray:
    """Vectorised :func:`shadowing_sample` over cell index arrays.

    The integer hashing runs in numpy; the Gaussian transform uses the same
    scalar libm calls as the single-cell path so both agree bit for bit.
    """
    ii = np.asarray(ii, dtype=np.int64)
    jj = np.asarray(jj, dtype=np.int64)
    if sigma_db < 0:
        raise DomainError("sigma_db must be >= 0")
    if sigma_db == 0:
        return np.zeros(ii.shape, dtype=np.float64)
    with np.errstate(over="ignore"):
        cell = ((ii.astype(np.uint64) & np.uint64(_M32)) << np.uint64(32)) | (jj.astype(np.uint64) & np.uint64(_M32))
        key = _splitmix_np(np.uint64(seed & _M64) ^ _splitmix_np(cell))
        b1 = _splitmix_np(key ^ np.uint64(1)).ravel().tolist()
        b2 = _splitmix_np(key ^ np.uint64(2)).ravel().tolist()
    vals = [sigma_db * _gauss_from_bits(x, y) for x, y in zip(b1, b2)]
    return np.asarray(vals, dtype=np.float64).reshape(ii.shape)


# ---------------------------------------------------------------------------


def compose_breakdown(base, wall, floor, veg, diff, shadow, mobility) -> PathLossBreakdown:
    """Assemble a breakdown whose total is the component sum, floored at 0 dB.

    Negative aggregate loss can only come from shadowing, so the shadowing
    term absorbs the clamp and the sum identity still holds.
    """
    base = max(base, 0.0)
    rest = base + wall + floor + veg + diff
    if rest + shadow + mobility < 0.0:
        shadow = -(rest + mobility)
    total = rest + shadow + mobility
    return PathLossBreakdown(base, wall, floor, veg, diff, shadow, mobility, total)


def compose_breakdown_arrays(base, wall, floor, veg, diff, shadow, mobility) -> np.ndarray:
    """Vectorised :func:`compose_breakdown`; returns an (n, 8) array."""
    base = np.maximum(base, 0.0)
    rest = base + wall + floor + veg + diff
    shadow = np.where(rest + shadow + mobility < 0.0, -(rest + mobility), shadow)
    total = rest + shadow + mobility
    return np.column_stack(np.broadcast_arrays(base, wall, floor, veg, diff, shadow, mobility, total))


def total_path_loss(a: Point3, b: Point3, site, mobility_penalty_db: float = 0.0,
                    cell_index=None) -> PathLossBreakdown:
    """Full loss breakdown of the link a -> b.

    Shadowing is keyed to ``cell_index``; when omitted, the grid cell holding
    ``a`` is used.
    """
    crossings = trace_crossings(a, b, site)
    cfg = site.config
    distance = math.dist((a.x, a.y, a.z), (b.x, b.y, b.z))
    base = base_loss(distance, cfg.frequency_hz, a.z, b.z, cfg.environment)
    wall, floor, veg = mwf_loss(crossings, cfg)
    diff = diffraction_loss([c.v for c in crossings if c.kind == "knife_edge"])
    if cell_index is None:
        cell_index = site.grid.cell_of(a.x, a.y)
    shadow = shadowing_sample(cell_index, cfg.rng_seed, cfg.shadowing_sigma_db)
    return compose_breakdown(base, wall, floor, veg, diff, shadow, mobility_penalty_db)


def base_loss_array(distance_m, frequency_hz, height_a_m, height_b_m, environment) -> np.ndarray:
    """Vectorised :func:`base_loss` over distance / height arrays."""
    d = np.asarray(distance_m, dtype=np.float64)
    if np.any(~(d > 0)):
        raise DomainError("base loss needs positive distances")
    log_f = math.log10(frequency_hz / 1e6)
    if environment == "open":
        return 32.45 + 20.0 * (np.log10(d) - 3.0) + 20.0 * log_f
    if not MIN_FREQUENCY_HZ <= frequency_hz <= MAX_FREQUENCY_HZ:
        raise DomainError(f"frequency {frequency_hz} Hz outside 100 MHz - 6 GHz")
    try:
        a0, a1, a2, a3 = ERICSSON_PARAMS[environment]
    except KeyError:
        raise DomainError(f"no Ericsson coefficients for environment {environment!r}") from None
    hb = np.maximum(height_a_m, height_b_m)
    hm = np.minimum(height_a_m, height_b_m)
    if np.any(~(hm > 0)):
        raise DomainError("Ericsson model needs positive antenna heights")
    log_d = np.log10(d) - 3.0
    log_hb = np.log10(hb)
    g = 44.49 * log_f - 4.78 * log_f ** 2
    return a0 + a1 * log_d + a2 * log_hb + a3 * log_hb * log_d - 3.2 * np.log10(11.75 * hm) ** 2 + g
