"""Per-cell gateway choice and (SF, TxPower) selection over the site grid."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels, radio
from .errors import DomainError, SiteValidationError
from .propagation import (VEGETATION_CAP_DB, PathLossBreakdown, base_loss_array,
                          compose_breakdown_arrays, shadowing_field, total_path_loss)
from .radio import RadioConfig, LinkReport
from .site import Point3, validate_site

MIN_AIRTIME = "min-airtime"
MIN_ENERGY = "min-energy"
OBJECTIVES = (MIN_AIRTIME, MIN_ENERGY)

DEFAULT_PAYLOAD_BYTES = 20

# rows handed to one kernel call when planning in parallel
_CHUNK = 4096


def default_framing(site_config, payload_bytes=DEFAULT_PAYLOAD_BYTES, preamble_symbols=8) -> RadioConfig:
    """Packet framing used for airtime and energy when none is given."""
    return RadioConfig(sf=7, txpower_dbm=2, bandwidth_hz=site_config.bandwidth_hz,
                       coding_rate=site_config.coding_rate, preamble_symbols=preamble_symbols,
                       payload_bytes=payload_bytes)


def config_energy(sf, txpower_dbm, site_config, framing) -> float:
    toa = radio.time_on_air(framing.with_params(sf, txpower_dbm))
    return radio.energy_per_tx(toa, txpower_dbm, site_config)


def preference_order(site_config, objective=MIN_AIRTIME, framing=None) -> list[tuple[int, int]]:
    """All (sf, txpower) pairs, most preferred first.

    min-airtime ranks by SF then TxPower; min-energy by energy per
    transmission, ties broken by SF then TxPower.
    """
    pairs = [(sf, tx) for sf in radio.SF_RANGE for tx in radio.TXPOWER_RANGE]
    if objective == MIN_AIRTIME:
        return pairs
    if objective == MIN_ENERGY:
        framing = framing or default_framing(site_config)
        return sorted(pairs, key=lambda p: (config_energy(p[0], p[1], site_config, framing), p[0], p[1]))
    raise DomainError(f"unknown objective {objective!r}; expected one of {OBJECTIVES}")


def is_feasible(sf, txpower_dbm, path_loss_db, g_s_dbi, g_r_dbi, site_config, extra_margin_db=0.0) -> bool:
    threshold = radio.sensitivity(sf, site_config.bandwidth_hz, site_config.noise_figure_db)
    margin = site_config.link_margin_db + extra_margin_db
    return radio.rssi(txpower_dbm, g_s_dbi, g_r_dbi, path_loss_db) >= threshold + margin


def select_config(path_loss_db, g_s_dbi, g_r_dbi, site_config, objective=MIN_AIRTIME,
                  framing=None, order=None, extra_margin_db=0.0) -> RadioConfig | None:
    """Most preferred feasible configuration, or None when nothing closes the link.

    ``order`` may carry a precomputed :func:`preference_order`.
    """
    framing = framing or default_framing(site_config)
    if order is None:
        order = preference_order(site_config, objective, framing)
    for sf, tx in order:
        if is_feasible(sf, tx, path_loss_db, g_s_dbi, g_r_dbi, site_config, extra_margin_db):
            return framing.with_params(sf, tx)
    return None


def select_config_arrays(path_loss_db, g_s_dbi, g_r_dbi, site_config, order):
    """Vectorised :func:`select_config`; returns (sf, txpower) int arrays, 0 where infeasible.

    Feasibility is evaluated with the same operation order as
    :func:`radio.rssi` so both paths agree exactly.
    """
    p = np.asarray(path_loss_db, dtype=np.float64)
    gr = np.broadcast_to(np.asarray(g_r_dbi, dtype=np.float64), p.shape)
    sfs = np.array([o[0] for o in order])
    txs = np.array([o[1] for o in order])
    thr = np.array([radio.sensitivity(sf, site_config.bandwidth_hz, site_config.noise_figure_db)
                    + site_config.link_margin_db for sf, _ in order])
    rssi = ((txs[None, :] + g_s_dbi) + gr[:, None]) - p[:, None]
    feasible = rssi >= thr[None, :]
    first = np.argmax(feasible, axis=1)
    ok = feasible[np.arange(len(p)), first]
    return np.where(ok, sfs[first], 0), np.where(ok, txs[first], 0)


@dataclass(frozen=True)
class CellPlan:
    cell: tuple[int, int]
    best_gateway: str | None
    breakdown: PathLossBreakdown | None
    config: RadioConfig | None
    link: LinkReport | None
    covered: bool


def _link_for(config, breakdown, g_s, g_r, site_config):
    if config is None:
        return None
    sens = radio.sensitivity(config.sf, site_config.bandwidth_hz, site_config.noise_figure_db)
    return radio.link_report(radio.rssi(config.txpower_dbm, g_s, g_r, breakdown.total_db),
                             sens, site_config.link_margin_db)


def _node_point(site, i, j) -> Point3:
    x, y = site.grid.cell_center(i, j)
    return Point3(x, y, site.grid.node_height_m)


def plan_cell(cell, site, objective=MIN_AIRTIME, framing=None) -> CellPlan:
    """Plan one cell through the scalar propagation path."""
    i, j = cell
    if not (0 <= i < site.grid.nx and 0 <= j < site.grid.ny):
        raise DomainError(f"cell {cell} outside the {site.grid.nx}x{site.grid.ny} grid")
    cfg = site.config
    node = _node_point(site, i, j)
    best = None
    for gw in sorted(site.gateways, key=lambda g: g.id):
        bd = total_path_loss(node, gw.position, site, 0.0, (i, j))
        if best is None or bd.total_db < best[1].total_db:
            best = (gw, bd)
    if best is None:
        return CellPlan((i, j), None, None, None, None, False)
    gw, bd = best
    g_s = site.node_profile.antenna_gain_dbi
    config = select_config(bd.total_db, g_s, gw.antenna_gain_dbi, cfg, objective, framing)
    link = _link_for(config, bd, g_s, gw.antenna_gain_dbi, cfg)
    return CellPlan((i, j), gw.id, bd, config, link, config is not None)


class CoverageGrid:
    """Per-cell planning results stored as flat arrays (index = i * ny + j).

    :meth:`cell` materialises a :class:`CellPlan`; :meth:`summary` is always
    recomputed from the arrays.
    """

    def __init__(self, grid, site_config, framing, objective, gateway_ids, gateway_index,
                 breakdown, sf, txpower, g_s, g_r):
        self.grid = grid
        self.site_config = site_config
        self.framing = framing
        self.objective = objective
        self.gateway_ids = tuple(gateway_ids)
        self.gateway_index = gateway_index
        self.breakdown = breakdown
        self.sf = sf
        self.txpower = txpower
        self.g_s = g_s
        self.g_r = g_r

    @property
    def covered(self) -> np.ndarray:
        return self.sf > 0

    @property
    def rssi(self) -> np.ndarray:
        out = ((self.txpower + self.g_s) + self.g_r) - self.breakdown[:, 7]
        return np.where(self.covered, out, np.nan)

    @property
    def sensitivity(self) -> np.ndarray:
        table = {sf: radio.sensitivity(sf, self.site_config.bandwidth_hz, self.site_config.noise_figure_db)
                 for sf in radio.SF_RANGE}
        return np.array([table.get(int(s), np.nan) for s in self.sf])

    def energy(self) -> np.ndarray:
        cache = {}
        out = np.full(len(self.sf), np.nan)
        for k in np.flatnonzero(self.covered):
            key = (int(self.sf[k]), int(self.txpower[k]))
            if key not in cache:
                cache[key] = config_energy(key[0], key[1], self.site_config, self.framing)
            out[k] = cache[key]
        return out

    def cell(self, i: int, j: int) -> CellPlan:
        k = i * self.grid.ny + j
        g = int(self.gateway_index[k])
        if g < 0:
            return CellPlan((i, j), None, None, None, None, False)
        bd = PathLossBreakdown(*(float(v) for v in self.breakdown[k]))
        config = None
        if self.sf[k] > 0:
            config = self.framing.with_params(int(self.sf[k]), int(self.txpower[k]))
        link = _link_for(config, bd, float(self.g_s), float(self.g_r[k]), self.site_config)
        return CellPlan((i, j), self.gateway_ids[g], bd, config, link, config is not None)

    @property
    def cells(self) -> list[list[CellPlan]]:
        """nx x ny nested list, ``cells[i][j]``."""
        return [[self.cell(i, j) for j in range(self.grid.ny)] for i in range(self.grid.nx)]

    def summary(self) -> dict:
        covered = self.covered
        n = len(covered)
        n_cov = int(covered.sum())
        sf_hist = {str(sf): int(np.count_nonzero(self.sf == sf)) for sf in radio.SF_RANGE}
        tx_hist = {str(tx): int(np.count_nonzero(covered & (self.txpower == tx))) for tx in radio.TXPOWER_RANGE}
        energy = self.energy()
        mean_energy = float(np.mean(energy[covered])) if n_cov else None
        return {
            "n_cells": n,
            "n_covered": n_cov,
            "coverage_fraction": n_cov / n if n else 0.0,
            "sf_histogram": sf_hist,
            "txpower_histogram": tx_hist,
            "mean_energy_mj": mean_energy,
        }


def _node_array(grid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    ii, jj = np.meshgrid(np.arange(grid.nx), np.arange(grid.ny), indexing="ij")
    ii = ii.ravel()
    jj = jj.ravel()
    nodes = np.empty((len(ii), 3), dtype=np.float64)
    nodes[:, 0] = (ii + 0.5) * grid.cell_size_m
    nodes[:, 1] = (jj + 0.5) * grid.cell_size_m
    nodes[:, 2] = grid.node_height_m
    return ii, jj, nodes


def obstruction_losses(nodes, gateway_pos, site, workers=1, backend=None) -> np.ndarray:
    """(n, 4) wall / floor / vegetation / diffraction losses from each node to one gateway.

    Rows are split across ``workers`` threads; the compiled kernel drops the
    GIL, and every row is computed independently, so the result does not
    depend on the split.
    """
    kern = kernels.get_backend(backend)
    cfg = site.config
    nodes = np.ascontiguousarray(nodes, dtype=np.float64)
    out = np.zeros((len(nodes), 4), dtype=np.float64)
    g = gateway_pos

    def run(lo, hi):
        kern.obstruction_losses(nodes[lo:hi], g.x, g.y, g.z, site.packed, cfg.wavelength_m,
                                cfg.floor_loss_db, cfg.vegetation_loss_db_per_m,
                                VEGETATION_CAP_DB, out[lo:hi])

    if workers is None or workers <= 0:
        workers = os.cpu_count() or 1
    if workers == 1 or len(nodes) <= _CHUNK:
        run(0, len(nodes))
    else:
        bounds = [(lo, min(lo + _CHUNK, len(nodes))) for lo in range(0, len(nodes), _CHUNK)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for f in [pool.submit(run, lo, hi) for lo, hi in bounds]:
                f.result()
    return out


def link_breakdowns(nodes, gateway, site, shadow, mobility=0.0, workers=1, backend=None) -> np.ndarray:
    """(n, 8) loss breakdowns (component columns then total) from nodes to a gateway."""
    cfg = site.config
    g = gateway.position
    d = np.sqrt((nodes[:, 0] - g.x) ** 2 + (nodes[:, 1] - g.y) ** 2 + (nodes[:, 2] - g.z) ** 2)
    base = base_loss_array(d, cfg.frequency_hz, nodes[:, 2], g.z, cfg.environment)
    obs = obstruction_losses(nodes, g, site, workers, backend)
    return compose_breakdown_arrays(base, obs[:, 0], obs[:, 1], obs[:, 2], obs[:, 3], shadow, mobility)


def plan_site(site, objective=MIN_AIRTIME, framing=None, workers=1, backend=None) -> CoverageGrid:
    """Plan every cell of the grid.

    ``workers`` > 1 (or 0 for all cores) parallelises the obstruction kernel;
    output is identical for any value.
    """
    violations = validate_site(site)
    if violations:
        raise SiteValidationError(violations)
    cfg = site.config
    framing = framing or default_framing(cfg)
    order = preference_order(cfg, objective, framing)
    ii, jj, nodes = _node_array(site.grid)
    n = len(ii)
    shadow = shadowing_field(ii, jj, cfg.rng_seed, cfg.shadowing_sigma_db)

    gateways = sorted(site.gateways, key=lambda g: g.id)
    best_idx = np.full(n, -1, dtype=np.int64)
    best = np.full((n, 8), np.nan)
    best_total = np.full(n, math.inf)
    g_r = np.zeros(n)
    for gi, gw in enumerate(gateways):
        bd = link_breakdowns(nodes, gw, site, shadow, 0.0, workers, backend)
        better = bd[:, 7] < best_total
        best_idx[better] = gi
        best[better] = bd[better]
        best_total[better] = bd[better, 7]
        g_r[better] = gw.antenna_gain_dbi

    g_s = site.node_profile.antenna_gain_dbi
    sf = np.zeros(n, dtype=np.int64)
    tx = np.zeros(n, dtype=np.int64)
    has = best_idx >= 0
    if has.any():
        sf[has], tx[has] = select_config_arrays(best_total[has], g_s, g_r[has], cfg, order)
    return CoverageGrid(site.grid, cfg, framing, objective, [g.id for g in gateways], best_idx,
                        best, sf, tx, g_s, g_r)
