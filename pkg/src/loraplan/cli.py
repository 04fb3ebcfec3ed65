"""Command-line interface: validate, plan, link, toa, mobility.

Exit codes: 0 success, 1 domain or validation failure, 2 I/O, parse or
usage failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import hashlib
import json
import math
import sys
from pathlib import Path

from . import radio
from .errors import ConfigurationError, DomainError, SiteParseError, SiteValidationError
from .mobility import MobilityModel, evaluate_path_profile, load_trajectory, mobility_report
from .planner import MIN_AIRTIME, OBJECTIVES, default_framing, plan_site
from .propagation import total_path_loss
from .site import Point3, parse_site, validate_site

EXIT_OK, EXIT_DOMAIN, EXIT_IO = 0, 1, 2

COVERAGE_COLUMNS = ("i", "j", "x_m", "y_m", "gateway", "base_db", "wall_db", "floor_db", "veg_db",
                    "diff_db", "shadow_db", "total_db", "sf", "txp_dbm", "rssi_dbm", "sens_dbm", "covered")
PROFILE_COLUMNS = ("t", "x", "y", "speed", "total_db", "sf", "txp", "rssi", "connected")

PGM_RSSI_MIN_DBM = -140.0
PGM_RSSI_MAX_DBM = -60.0
_PGM_VALUES_PER_LINE = 16


class _Fail(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def fmt(x) -> str:
    """CSV field: shortest repr that round-trips, blank for missing."""
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, int):
        return str(x)
    x = float(x)
    if math.isnan(x):
        return ""
    return repr(x)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _load_site(path):
    try:
        return parse_site(path)
    except (OSError, UnicodeDecodeError) as exc:
        raise _Fail(EXIT_IO, f"cannot read site file: {exc}") from None
    except SiteParseError as exc:
        raise _Fail(EXIT_IO, f"parse error: {exc}") from None


def _load_valid_site(path):
    site = _load_site(path)
    violations = validate_site(site)
    if violations:
        raise _Fail(EXIT_DOMAIN, "\n".join(violations))
    return site


def _write_json(path, doc):
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _framing_dict(framing):
    return dataclasses.asdict(framing) | {"sf": None, "txpower_dbm": None}


# ---------------------------------------------------------------------------


def cmd_validate(args) -> int:
    site = _load_site(args.site)
    violations = validate_site(site)
    for v in violations:
        print(v)
    return EXIT_DOMAIN if violations else EXIT_OK


def rssi_to_gray(rssi_dbm) -> int:
    if rssi_dbm is None or math.isnan(rssi_dbm):
        return 0
    v = (rssi_dbm - PGM_RSSI_MIN_DBM) / (PGM_RSSI_MAX_DBM - PGM_RSSI_MIN_DBM) * 255.0
    return int(math.floor(min(max(v, 0.0), 255.0) + 0.5))


def write_pgm(path, nx, ny, values):
    """Plain (P2) PGM; ``values[i][j]`` with north (largest j) on top."""
    lines = ["P2", f"{nx} {ny}", "255"]
    for j in range(ny - 1, -1, -1):
        row = [str(values[i][j]) for i in range(nx)]
        for k in range(0, nx, _PGM_VALUES_PER_LINE):
            lines.append(" ".join(row[k:k + _PGM_VALUES_PER_LINE]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def write_coverage(out_dir, site, grid, input_hash):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    g = site.grid
    rssi = grid.rssi
    sens = grid.sensitivity
    covered = grid.covered
    rows = []
    gray = [[0] * g.ny for _ in range(g.nx)]
    for i in range(g.nx):
        for j in range(g.ny):
            k = i * g.ny + j
            x, y = g.cell_center(i, j)
            gi = int(grid.gateway_index[k])
            bd = grid.breakdown[k] if gi >= 0 else [None] * 8
            cov = bool(covered[k])
            # mobility column (index 6) is always 0 for static cells and is not exported
            fields = [i, j, x, y, grid.gateway_ids[gi] if gi >= 0 else None,
                      bd[0], bd[1], bd[2], bd[3], bd[4], bd[5], bd[7],
                      int(grid.sf[k]) if cov else None, int(grid.txpower[k]) if cov else None,
                      rssi[k] if cov else None, sens[k] if cov else None, cov]
            rows.append(fields)
            gray[i][j] = rssi_to_gray(float(rssi[k])) if cov else 0
    (out_dir / "coverage.csv").write_text(_csv_text(COVERAGE_COLUMNS, rows), encoding="utf-8")
    write_pgm(out_dir / "rssi.pgm", g.nx, g.ny, gray)
    summary = grid.summary()
    summary.update({
        "input_sha256": input_hash,
        "seed": site.config.rng_seed,
        "objective": grid.objective,
        "grid": {"nx": g.nx, "ny": g.ny, "cell_size_m": g.cell_size_m, "node_height_m": g.node_height_m},
        "framing": _framing_dict(grid.framing),
        "link_margin_db": site.config.link_margin_db,
    })
    _write_json(out_dir / "summary.json", summary)
    return summary


def cmd_plan(args) -> int:
    site = _load_valid_site(args.site)
    if args.seed is not None:
        site = dataclasses.replace(site, config=dataclasses.replace(site.config, rng_seed=args.seed))
    framing = default_framing(site.config, payload_bytes=args.payload)
    grid = plan_site(site, args.objective, framing, workers=args.workers)
    write_coverage(args.out_dir, site, grid, _sha256(args.site))
    return EXIT_OK


def cmd_link(args) -> int:
    site = _load_valid_site(args.site)
    try:
        gw = site.gateway(args.to_gateway)
    except KeyError:
        raise _Fail(EXIT_DOMAIN, f"unknown gateway {args.to_gateway!r}") from None
    x, y, h = args.from_
    node = Point3(x, y, h)
    bd = total_path_loss(node, gw.position, site)
    cfg = site.config
    g_s = site.node_profile.antenna_gain_dbi
    r = radio.rssi(args.txp, g_s, gw.antenna_gain_dbi, bd.total_db)
    sens = radio.sensitivity(args.sf, cfg.bandwidth_hz, cfg.noise_figure_db)
    report = radio.link_report(r, sens, cfg.link_margin_db)
    doc = {
        "gateway": gw.id,
        "sf": args.sf,
        "txpower_dbm": args.txp,
        "breakdown": dataclasses.asdict(bd),
        "link": dataclasses.asdict(report),
    }
    print(json.dumps(doc, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_toa(args) -> int:
    config = radio.RadioConfig(sf=args.sf, txpower_dbm=14, bandwidth_hz=args.bw, coding_rate=args.cr,
                               preamble_symbols=args.preamble, payload_bytes=args.payload,
                               explicit_header=not args.implicit_header, crc_on=not args.no_crc)
    toa = radio.time_on_air(config)
    doc = {
        "sf": args.sf,
        "bandwidth_hz": args.bw,
        "coding_rate": args.cr,
        "payload_bytes": args.payload,
        "preamble_symbols": args.preamble,
        "low_data_rate_optimize": config.low_data_rate_optimize,
        "payload_symbols": radio.payload_symbols(config),
        "time_on_air_s": toa,
        "time_on_air_ms": toa * 1000.0,
        "data_rate_bps": radio.data_rate(args.sf, args.bw, args.cr),
        "duty_cycle_limit": args.duty_cycle,
        "duty_cycle_min_interval_s": radio.duty_cycle_min_interval(toa, args.duty_cycle),
    }
    print(json.dumps(doc, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_mobility(args) -> int:
    site = _load_valid_site(args.site)
    try:
        traj = load_trajectory(args.trajectory)
    except (OSError, UnicodeDecodeError) as exc:
        raise _Fail(EXIT_IO, f"cannot read trajectory: {exc}") from None
    except SiteParseError as exc:
        raise _Fail(EXIT_IO, f"trajectory parse error: {exc}") from None
    model = MobilityModel(args.alpha, args.interval, args.hysteresis, args.dwell)
    profile = evaluate_path_profile(traj, site, model, args.objective)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = [(s.t, s.position.x, s.position.y, s.speed_mps,
             s.breakdown.total_db if s.breakdown else None,
             s.config.sf if s.connected else None, s.config.txpower_dbm if s.connected else None,
             s.rssi_dbm, s.connected)
            for s in profile.samples]
    (out_dir / "profile.csv").write_text(_csv_text(PROFILE_COLUMNS, rows), encoding="utf-8")

    report = mobility_report(profile, site)
    report.update({
        "site_sha256": _sha256(args.site),
        "trajectory_sha256": _sha256(args.trajectory),
        "seed": site.config.rng_seed,
        "objective": args.objective,
        "model": dataclasses.asdict(model),
    })
    _write_json(out_dir / "mobility_summary.json", report)
    return EXIT_OK


# ---------------------------------------------------------------------------


def _int_in(lo, hi, what):
    def parse(text):
        try:
            v = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{what} must be an integer") from None
        if not lo <= v <= hi:
            raise argparse.ArgumentTypeError(f"{what} must be in [{lo}, {hi}]")
        return v
    return parse


def _triple(text):
    try:
        parts = [float(p) for p in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError("expected x,y,h") from None
    if len(parts) != 3 or not all(math.isfinite(p) for p in parts):
        raise argparse.ArgumentTypeError("expected three finite numbers x,y,h")
    return tuple(parts)


def _positive(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return v


def _non_negative(text):
    v = float(text)
    if not v >= 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def _duty(text):
    v = float(text)
    if not 0 < v <= 1:
        raise argparse.ArgumentTypeError("duty cycle must be in (0, 1]")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="loraplan", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a site file against its invariants")
    p.add_argument("site")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("plan", help="plan SF/TxPower for every grid cell")
    p.add_argument("site")
    p.add_argument("--objective", choices=OBJECTIVES, default=MIN_AIRTIME)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--seed", type=int, help="override the site's rng_seed")
    p.add_argument("--payload", type=_int_in(1, 255, "payload"), default=20)
    p.add_argument("--workers", type=int, default=1, help="threads for the loss kernel (0 = all cores)")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("link", help="evaluate one node-to-gateway link")
    p.add_argument("site")
    p.add_argument("--from", dest="from_", type=_triple, required=True, metavar="X,Y,H")
    p.add_argument("--to-gateway", required=True)
    p.add_argument("--sf", type=_int_in(7, 12, "sf"), required=True)
    p.add_argument("--txp", type=_int_in(2, 20, "txp"), required=True)
    p.set_defaults(func=cmd_link)

    p = sub.add_parser("toa", help="airtime, data rate and duty-cycle spacing")
    p.add_argument("--sf", type=_int_in(7, 12, "sf"), required=True)
    p.add_argument("--bw", type=int, choices=radio.BANDWIDTHS_HZ, default=125000)
    p.add_argument("--cr", choices=radio.CODING_RATES, default="4/5")
    p.add_argument("--payload", type=_int_in(1, 255, "payload"), default=20)
    p.add_argument("--preamble", type=_int_in(6, 65535, "preamble"), default=8)
    p.add_argument("--duty-cycle", type=_duty, default=0.01)
    p.add_argument("--implicit-header", action="store_true")
    p.add_argument("--no-crc", action="store_true")
    p.set_defaults(func=cmd_toa)

    p = sub.add_parser("mobility", help="adaptive path profile along a trajectory")
    p.add_argument("site")
    p.add_argument("trajectory")
    p.add_argument("--alpha", type=_non_negative, default=0.0, help="dB per m/s")
    p.add_argument("--interval", type=_positive, default=1.0, help="sample interval, s")
    p.add_argument("--hysteresis", type=_non_negative, default=2.0, help="dB")
    p.add_argument("--dwell", type=_int_in(1, 10 ** 6, "dwell"), default=2)
    p.add_argument("--objective", choices=OBJECTIVES, default=MIN_AIRTIME)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_mobility)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _Fail as exc:
        print(str(exc), file=sys.stderr)
        return exc.code
    except (DomainError, ConfigurationError, SiteValidationError) as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
