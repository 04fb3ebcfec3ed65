"""LoRa radio physics: link budget, receiver sensitivity, airtime and energy."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import ConfigurationError, DomainError

SF_RANGE = range(7, 13)
TXPOWER_RANGE = range(2, 21)
BANDWIDTHS_HZ = (125000, 250000, 500000)
CODING_RATES = ("4/5", "4/6", "4/7", "4/8")

THERMAL_NOISE_DBM_HZ = -174.0
# demodulation SNR floor per spreading factor, dB
SNR_LIMIT_DB = {7: -7.5, 8: -10.0, 9: -12.5, 10: -15.0, 11: -17.5, 12: -20.0}

# TX supply current (mA) at the anchor powers; intermediate integer powers are
# linearly interpolated by default_tx_current_table().
TX_CURRENT_ANCHORS_MA = {2: 24.0, 5: 25.0, 8: 30.0, 11: 38.0, 14: 45.0, 17: 90.0, 20: 120.0}

LOW_DATA_RATE_SYMBOL_S = 0.016


def default_tx_current_table() -> dict[int, float]:
    """Current draw for every integer TxPower in [2, 20] dBm."""
    anchors = sorted(TX_CURRENT_ANCHORS_MA.items())
    table = {}
    for (p0, i0), (p1, i1) in zip(anchors, anchors[1:]):
        for p in range(p0, p1 + 1):
            table[p] = i0 + (i1 - i0) * (p - p0) / (p1 - p0)
    return table


def cr_denominator(coding_rate: str) -> int:
    if coding_rate not in CODING_RATES:
        raise DomainError(f"coding rate must be one of {CODING_RATES}, got {coding_rate!r}")
    return int(coding_rate.split("/")[1])


@dataclass(frozen=True)
class RadioConfig:
    """One uplink transmission setting.

    The low-data-rate-optimisation flag is not stored; see
    :attr:`low_data_rate_optimize`.
    """

    sf: int
    txpower_dbm: int
    bandwidth_hz: int = 125000
    coding_rate: str = "4/5"
    preamble_symbols: int = 8
    payload_bytes: int = 20
    explicit_header: bool = True
    crc_on: bool = True

    def __post_init__(self):
        if self.sf not in SF_RANGE:
            raise DomainError(f"sf must be in [7, 12], got {self.sf}")
        if self.txpower_dbm not in TXPOWER_RANGE:
            raise DomainError(f"txpower_dbm must be in [2, 20], got {self.txpower_dbm}")
        if self.bandwidth_hz not in BANDWIDTHS_HZ:
            raise DomainError(f"bandwidth_hz must be one of {BANDWIDTHS_HZ}")
        cr_denominator(self.coding_rate)
        if self.preamble_symbols < 6:
            raise DomainError("preamble_symbols must be >= 6")
        if not 1 <= self.payload_bytes <= 255:
            raise DomainError("payload_bytes must be in [1, 255]")

    @property
    def symbol_time_s(self) -> float:
        return 2 ** self.sf / self.bandwidth_hz

    @property
    def low_data_rate_optimize(self) -> bool:
        return self.symbol_time_s >= LOW_DATA_RATE_SYMBOL_S

    def with_params(self, sf: int, txpower_dbm: int) -> "RadioConfig":
        return replace(self, sf=sf, txpower_dbm=txpower_dbm)


@dataclass(frozen=True)
class LinkReport:
    rssi_dbm: float
    sensitivity_dbm: float
    snr_margin_db: float
    feasible: bool


def rssi(txpower_dbm: float, g_s_dbi: float, g_r_dbi: float, path_loss_db: float) -> float:
    """Received power: TxPower + sender gain + receiver gain - path loss."""
    return txpower_dbm + g_s_dbi + g_r_dbi - path_loss_db


def sensitivity(sf: int, bandwidth_hz: float, noise_figure_db: float = 6.0) -> float:
    if sf not in SNR_LIMIT_DB:
        raise DomainError(f"sf must be in [7, 12], got {sf}")
    return THERMAL_NOISE_DBM_HZ + 10.0 * math.log10(bandwidth_hz) + noise_figure_db + SNR_LIMIT_DB[sf]


def link_report(rssi_dbm: float, sensitivity_dbm: float, link_margin_db: float) -> LinkReport:
    margin = rssi_dbm - sensitivity_dbm
    return LinkReport(rssi_dbm, sensitivity_dbm, margin,
                      rssi_dbm >= sensitivity_dbm + link_margin_db)


def payload_symbols(config: RadioConfig) -> int:
    de = 1 if config.low_data_rate_optimize else 0
    crc = 1 if config.crc_on else 0
    ih = 0 if config.explicit_header else 1
    num = 8 * max(config.payload_bytes, 1) - 4 * config.sf + 28 + 16 * crc - 20 * ih
    den = 4 * (config.sf - 2 * de)
    # integer ceil division keeps the symbol count exact
    blocks = -(-num // den)
    return 8 + max(blocks * cr_denominator(config.coding_rate), 0)


def time_on_air(config: RadioConfig) -> float:
    """Packet duration in seconds (preamble + header + payload symbols)."""
    return (config.preamble_symbols + 4.25 + payload_symbols(config)) * config.symbol_time_s


def data_rate(sf: int, bandwidth_hz: float, coding_rate: str) -> float:
    """Equivalent bit rate in bits/second."""
    return sf * (bandwidth_hz / 2 ** sf) * (4 / cr_denominator(coding_rate))


def duty_cycle_min_interval(toa_s: float, duty_cycle_limit: float) -> float:
    """Minimum start-to-start spacing between transmissions."""
    if toa_s <= 0:
        raise DomainError("toa_s must be positive")
    if not 0 < duty_cycle_limit <= 1:
        raise DomainError("duty_cycle_limit must be in (0, 1]")
    return toa_s / duty_cycle_limit


def energy_per_tx(toa_s: float, txpower_dbm: int, config) -> float:
    """Energy of one transmission in millijoules.

    ``config`` is a SiteConfig (anything with ``tx_current_table`` and
    ``supply_voltage_v``).
    """
    try:
        current_ma = config.tx_current_table[txpower_dbm]
    except KeyError:
        raise ConfigurationError(f"tx_current_table has no entry for {txpower_dbm} dBm") from None
    return toa_s * current_ma * config.supply_voltage_v
