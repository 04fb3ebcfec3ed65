"""Path profiles for mobile nodes with hysteresis-based SF/TxPower adaptation."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from . import radio
from .errors import DomainError, SiteParseError, SiteValidationError
from .geometry import point_in_polygon
from .planner import (MIN_AIRTIME, config_energy, default_framing, is_feasible,
                      preference_order, select_config)
from .propagation import PathLossBreakdown, total_path_loss
from .radio import RadioConfig
from .site import Point3, validate_site

# float slack when deciding whether the last sample lands on the final timestamp
_TIME_EPS = 1e-9


@dataclass(frozen=True)
class Trajectory:
    waypoints: tuple[tuple[Point3, float], ...]

    def __post_init__(self):
        if len(self.waypoints) < 2:
            raise DomainError("trajectory needs at least 2 waypoints")
        times = [t for _, t in self.waypoints]
        if any(t1 <= t0 for t0, t1 in zip(times, times[1:])):
            raise DomainError("trajectory timestamps must be strictly increasing")


@dataclass(frozen=True)
class MobilityModel:
    alpha_db_per_mps: float = 0.0
    sample_interval_s: float = 1.0
    hysteresis_db: float = 2.0
    dwell_samples: int = 2

    def __post_init__(self):
        if self.alpha_db_per_mps < 0:
            raise DomainError("alpha_db_per_mps must be >= 0")
        if not self.sample_interval_s > 0:
            raise DomainError("sample_interval_s must be > 0")
        if self.hysteresis_db < 0:
            raise DomainError("hysteresis_db must be >= 0")
        if self.dwell_samples < 1:
            raise DomainError("dwell_samples must be >= 1")


@dataclass(frozen=True)
class ProfileSample:
    t: float
    position: Point3
    speed_mps: float
    gateway: str | None
    breakdown: PathLossBreakdown | None
    config: RadioConfig | None
    rssi_dbm: float | None
    connected: bool


@dataclass(frozen=True)
class PathProfile:
    samples: tuple[ProfileSample, ...]
    site_config: object
    framing: RadioConfig

    @property
    def stats(self) -> dict:
        return profile_stats(self.samples, self.site_config, self.framing)


def load_trajectory(path) -> Trajectory:
    """Read a JSON list of ``{x, y, z, t}`` waypoints."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SiteParseError(exc.msg, line=exc.lineno) from None
    return trajectory_from_list(doc)


def trajectory_from_list(doc) -> Trajectory:
    if not isinstance(doc, list):
        raise SiteParseError("trajectory must be a list of waypoints")
    pts = []
    for k, w in enumerate(doc):
        if not isinstance(w, dict) or set(w) - {"x", "y", "z", "t"} or not {"x", "y", "z", "t"} <= set(w):
            raise SiteParseError("waypoint needs exactly x, y, z, t", field=f"[{k}]")
        vals = [w[key] for key in ("x", "y", "z", "t")]
        if any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in vals):
            raise SiteParseError("waypoint values must be numbers", field=f"[{k}]")
        x, y, z, t = (float(v) for v in vals)
        pts.append((Point3(x, y, z), t))
    if len(pts) < 2:
        raise SiteParseError("trajectory needs at least 2 waypoints")
    try:
        return Trajectory(tuple(pts))
    except DomainError as exc:
        raise SiteParseError(str(exc)) from None


def sample_trajectory(traj: Trajectory, interval_s: float) -> list[tuple[float, Point3, float]]:
    """(t, position, speed) at t0, t0 + interval, ... and the final timestamp."""
    if not interval_s > 0:
        raise DomainError("interval_s must be > 0")
    wps = traj.waypoints
    t0, t_end = wps[0][1], wps[-1][1]
    times = []
    k = 0
    while True:
        t = t0 + k * interval_s
        if t >= t_end - _TIME_EPS:
            break
        times.append(t)
        k += 1
    times.append(t_end)

    out = []
    seg = 0
    for t in times:
        while seg < len(wps) - 2 and t >= wps[seg + 1][1]:
            seg += 1
        (p0, s0), (p1, s1) = wps[seg], wps[seg + 1]
        f = (t - s0) / (s1 - s0)
        pos = Point3(p0.x + f * (p1.x - p0.x), p0.y + f * (p1.y - p0.y), p0.z + f * (p1.z - p0.z))
        speed = math.dist((p0.x, p0.y, p0.z), (p1.x, p1.y, p1.z)) / (s1 - s0)
        out.append((t, pos, speed))
    return out


def _best_link(pos, site, penalty):
    best = None
    cell = site.grid.cell_of(pos.x, pos.y)
    for gw in sorted(site.gateways, key=lambda g: g.id):
        bd = total_path_loss(pos, gw.position, site, penalty, cell)
        if best is None or bd.total_db < best[1].total_db:
            best = (gw, bd)
    return best


def _downgrade_target(P, g_s, g_r, cfg, framing, order, headroom_db):
    """Static best configuration, nudged up in TxPower to keep ``headroom_db`` when possible.

    Landing on the static SF means every SF change of the adaptive profile
    mirrors one of the static profile, so hysteresis can only remove switches.
    """
    static = select_config(P, g_s, g_r, cfg, framing=framing, order=order)
    for sf, tx in order:
        if sf == static.sf and is_feasible(sf, tx, P, g_s, g_r, cfg, headroom_db):
            return framing.with_params(sf, tx)
    return static


def evaluate_path_profile(traj: Trajectory, site, model: MobilityModel = MobilityModel(),
                          objective=MIN_AIRTIME, framing=None) -> PathProfile:
    """Walk the trajectory and adapt the radio configuration sample by sample.

    The current configuration is kept while it stays feasible; an infeasible
    one is replaced immediately by the best feasible one. Moving to a more
    preferred configuration needs one that clears margin + hysteresis for
    ``dwell_samples`` consecutive samples, and then lands on the static SF.
    """
    violations = validate_site(site)
    if violations:
        raise SiteValidationError(violations)
    cfg = site.config
    framing = framing or default_framing(cfg)
    order = preference_order(cfg, objective, framing)
    rank = {pair: k for k, pair in enumerate(order)}
    g_s = site.node_profile.antenna_gain_dbi

    current = None
    streak = 0
    samples = []
    for t, pos, speed in sample_trajectory(traj, model.sample_interval_s):
        penalty = model.alpha_db_per_mps * speed
        best = _best_link(pos, site, penalty)
        if best is None:
            current, streak = None, 0
            samples.append(ProfileSample(t, pos, speed, None, None, None, None, False))
            continue
        gw, bd = best
        g_r = gw.antenna_gain_dbi
        P = bd.total_db

        if current is None or not is_feasible(current.sf, current.txpower_dbm, P, g_s, g_r, cfg):
            current = select_config(P, g_s, g_r, cfg, objective, framing, order)
            streak = 0
        else:
            cand = select_config(P, g_s, g_r, cfg, objective, framing, order, model.hysteresis_db)
            if cand is not None and rank[(cand.sf, cand.txpower_dbm)] < rank[(current.sf, current.txpower_dbm)]:
                streak += 1
                if streak >= model.dwell_samples:
                    target = _downgrade_target(P, g_s, g_r, cfg, framing, order, model.hysteresis_db)
                    if rank[(target.sf, target.txpower_dbm)] < rank[(current.sf, current.txpower_dbm)]:
                        current, streak = target, 0
            else:
                streak = 0

        connected = current is not None
        rssi = radio.rssi(current.txpower_dbm, g_s, g_r, P) if connected else None
        samples.append(ProfileSample(t, pos, speed, gw.id, bd, current, rssi, connected))
    return PathProfile(tuple(samples), cfg, framing)


def sf_switch_count(samples) -> int:
    """Changes of SF between consecutive connected samples."""
    count = 0
    last = None
    for s in samples:
        if s.config is None:
            continue
        if last is not None and s.config.sf != last:
            count += 1
        last = s.config.sf
    return count


def profile_stats(samples, site_config, framing) -> dict:
    n = len(samples)
    connected = [s for s in samples if s.connected]
    shares = {}
    for s in connected:
        shares[s.config.sf] = shares.get(s.config.sf, 0) + 1
    energy = 0.0
    for s in connected:
        energy += config_energy(s.config.sf, s.config.txpower_dbm, site_config, framing)
    rssis = [s.rssi_dbm for s in connected]
    return {
        "n_samples": n,
        "connected_fraction": len(connected) / n if n else 0.0,
        "sf_switches": sf_switch_count(samples),
        "sf_time_shares": {sf: c / n for sf, c in sorted(shares.items())},
        "total_energy_mj": energy,
        "rssi_min_dbm": min(rssis) if rssis else None,
        "rssi_mean_dbm": sum(rssis) / len(rssis) if rssis else None,
        "rssi_max_dbm": max(rssis) if rssis else None,
    }


def mobility_report(profile: PathProfile, site=None) -> dict:
    """Profile statistics plus per-region energy when the site declares regions.

    Energy assumes one transmission per sample.
    """
    report = dict(profile.stats)
    report["sf_time_shares"] = {str(k): v for k, v in report["sf_time_shares"].items()}
    report["energy_convention"] = "one transmission per sample"
    if site is not None and site.regions:
        per_region = {}
        for reg in site.regions:
            xs = [p.x for p in reg.footprint]
            ys = [p.y for p in reg.footprint]
            total = 0.0
            for s in profile.samples:
                if s.connected and point_in_polygon(s.position.x, s.position.y, xs, ys):
                    total += config_energy(s.config.sf, s.config.txpower_dbm, profile.site_config,
                                           profile.framing)
            per_region[reg.id] = total
        report["region_energy_mj"] = per_region
    return report
