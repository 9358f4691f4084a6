"""Frame durations, TXOP burst sizes and channel occupancy times (RTS/CTS access)."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .scenario import AcEdcaConfig, PhyProfile, aifs_of


@dataclass(frozen=True)
class AcTiming:
    t_data: float
    t_rts: float
    t_cts: float
    t_ack: float
    delta: float          # one DATA/ACK exchange incl. two SIFS
    n_txop: int           # packets per TXOP
    t_collision: float
    t_success: float
    aifs: float


def frame_times(ac: AcEdcaConfig, phy: PhyProfile) -> tuple:
    """(T_DATA, T_RTS, T_CTS, T_ACK) in us."""
    t_data = phy.phy_header + (phy.len_mac_header + ac.payload) / phy.data_rate
    t_rts = phy.phy_header + phy.len_rts / phy.ctrl_rate
    t_cts = phy.phy_header + phy.len_cts / phy.ctrl_rate
    t_ack = phy.phy_header + phy.len_ack / phy.ctrl_rate
    return t_data, t_rts, t_cts, t_ack


def exchange_time(t_data: float, t_ack: float, phy: PhyProfile) -> float:
    return t_data + t_ack + 2 * phy.sifs


def txop_count(txop: float, delta: float) -> int:
    # at least one packet per won contention, even with TXOP = 0
    return max(int(math.floor(txop / delta + 1e-12)), 1)


def occupancy_times(t_rts: float, t_cts: float, n_txop: int, delta: float,
                    aifs: float, phy: PhyProfile) -> tuple:
    """(T^C, T^S): channel time lost to an RTS collision / used by a full TXOP."""
    t_c = t_rts + aifs
    t_s = t_rts + t_cts + n_txop * delta + phy.sifs + aifs
    return t_c, t_s


def ac_timing(ac: AcEdcaConfig, phy: PhyProfile) -> AcTiming:
    t_data, t_rts, t_cts, t_ack = frame_times(ac, phy)
    delta = exchange_time(t_data, t_ack, phy)
    n = txop_count(ac.txop, delta)
    aifs = aifs_of(ac, phy)
    t_c, t_s = occupancy_times(t_rts, t_cts, n, delta, aifs, phy)
    return AcTiming(t_data, t_rts, t_cts, t_ack, delta, n, t_c, t_s, aifs)


def to_lattice(duration_us: float, phy: PhyProfile) -> int:
    """Round a duration to the nearest whole number of discrete steps (>= 0)."""
    return max(int(round(duration_us / phy.discrete_step)), 0)
