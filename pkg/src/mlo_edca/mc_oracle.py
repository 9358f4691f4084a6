"""Monte Carlo simulation of saturated EDCA on a single link.

The simulator jumps from one channel event (slot boundary after the AIFS of
the highest-priority AC) to the next transmission instead of stepping every
slot: with frozen backoff counters the next transmitter is simply the
station whose counter runs out first, accounting for its AIFS offset.

Timeline conventions, shared with the analytical model:

* after any busy period every station waits its own AIFS again;
* a success occupies T^S - AIFS (RTS, CTS, N exchanges, SIFS), a collision
  occupies T^C - AIFS (the RTS);
* backoff is uniform on {0, .., W-1}, W doubling per collision up to CW_max;
  a packet is dropped after ``retry_limit`` collided attempts;
* the first packet of a TXOP is delayed from reaching the head of the queue
  until the ACK of its exchange, the remaining N-1 packets by one exchange.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .airtime import ac_timing
from .scenario import LinkScenario
from .zones import build_zones

Z95 = 1.959963984540054


@dataclass
class AcStats:
    attempts: int = 0
    collisions: int = 0
    idle_slots: int = 0        # eligible idle backoff slots, summed over stations
    successes: int = 0         # won contentions (TXOPs)
    drops: int = 0
    delivered: int = 0         # packets incl. TXOP followers
    delays: List[float] = field(default_factory=list)   # us


@dataclass
class SimReport:
    seed: int
    slots: int                 # channel events simulated
    stats: List[AcStats]       # link AC order
    zone_counts: np.ndarray
    batch_p: np.ndarray        # per batch x AC attempt/idle-slot ratios

    @property
    def p_hat(self) -> np.ndarray:
        return np.array([s.attempts / s.idle_slots if s.idle_slots else 0.0 for s in self.stats])

    @property
    def c_hat(self) -> np.ndarray:
        return np.array([s.collisions / s.attempts if s.attempts else 0.0 for s in self.stats])

    @property
    def loss_hat(self) -> np.ndarray:
        """Dropped packets per packet that went through contention."""
        return np.array([
            s.drops / (s.drops + s.successes) if s.drops + s.successes else 0.0
            for s in self.stats
        ])

    @property
    def zone_freq(self) -> np.ndarray:
        total = self.zone_counts.sum()
        return self.zone_counts / total if total else self.zone_counts.astype(float)

    def delays(self, k: int) -> np.ndarray:
        return np.asarray(self.stats[k].delays)

    def p_sigma(self) -> np.ndarray:
        """Batch-means standard error of p_hat."""
        b = self.batch_p
        if b.shape[0] < 2:
            return np.full(len(self.stats), np.inf)
        return b.std(axis=0, ddof=1) / math.sqrt(b.shape[0])


def wilson_interval(k: int, n: int, z: float = Z95):
    if n == 0:
        return 0.0, 1.0
    phat = k / n
    denom = 1 + z * z / n
    centre = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    return max(centre - half, 0.0), min(centre + half, 1.0)


@dataclass(frozen=True)
class TailEstimate:
    probability: float
    lower: float
    upper: float
    samples: int
    wide: bool                 # fewer than 100 samples


def empirical_ccdf(samples: Sequence[float], x: float, z: float = Z95) -> TailEstimate:
    """Fraction of samples >= x with a Wilson interval (rule of three at 0 and n)."""
    s = np.asarray(samples, dtype=float)
    n = s.size
    if x <= 0:
        return TailEstimate(1.0, 1.0, 1.0, n, n < 100)
    if n == 0:
        return TailEstimate(0.0, 0.0, 1.0, 0, True)
    k = int(np.count_nonzero(s >= x))
    lo, hi = wilson_interval(k, n, z)
    if k == 0:
        lo, hi = 0.0, min(3.0 / n, 1.0)
    elif k == n:
        lo, hi = max(1.0 - 3.0 / n, 0.0), 1.0
    return TailEstimate(k / n, lo, hi, n, n < 100)


def simulate(link: LinkScenario, packets: Optional[int] = None,
             slots: Optional[int] = None, seed: int = 0,
             batches: int = 20) -> SimReport:
    """Run until every AC delivered ``packets`` packets or ``slots`` channel
    events passed (whichever is given / first)."""
    if packets is None and slots is None:
        raise ValueError("give a horizon in packets or slots")
    phy = link.phy
    zm = build_zones(link)
    rng = np.random.default_rng(seed)
    timing = [ac_timing(ac, phy) for ac in link.acs]
    I = link.num_acs

    # station tables (flat arrays, one entry per station)
    owner = np.concatenate([np.full(ac.n_stations, i) for i, ac in enumerate(link.acs)])
    S = owner.size
    pos = {ac_i: zm.sorted_acs.index(ac_i) for ac_i in range(I)}
    offset = np.array([zm.offsets[pos[o]] for o in owner])
    cw_min = np.array([link.acs[o].cw_min for o in owner])
    max_stage = np.array([link.acs[o].max_stage for o in owner])
    retry = np.array([link.acs[o].retry_limit for o in owner])
    stage = np.zeros(S, dtype=int)
    counter = rng.integers(0, cw_min)
    hol = np.zeros(S)

    aifs_min = min(t.aifs for t in timing)
    # channel event j lies in the zone whose slot range [h_z + 1, h_{z+1}] holds it
    zone_starts = np.asarray(zm.zone_offsets) + 1
    zone_ends = np.append(zone_starts[1:] - 1, np.iinfo(np.int64).max)
    J = zm.num_zones
    stats = [AcStats() for _ in range(I)]
    zone_counts = np.zeros(J, dtype=np.int64)
    checkpoints = []
    t = 0.0
    events = 0
    cycle = 0

    def done():
        if packets is not None and all(s.delivered >= packets for s in stats):
            return True
        return slots is not None and events >= slots

    while not done():
        fire = offset + counter + 1          # event index of each station's attempt
        m = int(fire.min())
        tx = np.flatnonzero(fire == m)
        events += m
        zone_counts += np.clip(np.minimum(zone_ends, m) - zone_starts + 1, 0, None)

        dec = np.maximum(m - 1 - offset, 0)
        counter -= dec
        idle = np.bincount(owner, weights=dec, minlength=I)
        for i in range(I):
            stats[i].idle_slots += int(idle[i])

        t_tx = t + aifs_min + (m - 1) * phy.slot_time
        if tx.size == 1:
            s_ = int(tx[0])
            o = int(owner[s_])
            tm = timing[o]
            st = stats[o]
            st.attempts += 1
            st.successes += 1
            busy = tm.t_success - tm.aifs
            st.delays.append(t_tx + tm.t_rts + tm.t_cts + tm.delta - hol[s_])
            st.delays.extend([tm.delta] * (tm.n_txop - 1))
            st.delivered += tm.n_txop
            t = t_tx + busy
            hol[s_] = t
            stage[s_] = 0
            counter[s_] = rng.integers(0, cw_min[s_])
        else:
            busy = timing[int(owner[tx[0]])].t_rts
            t = t_tx + busy
            for s_ in tx:
                o = int(owner[s_])
                stats[o].attempts += 1
                stats[o].collisions += 1
                stage[s_] += 1
                if stage[s_] >= retry[s_]:
                    stats[o].drops += 1
                    stage[s_] = 0
                    hol[s_] = t
                w = cw_min[s_] << min(stage[s_], max_stage[s_])
                counter[s_] = rng.integers(0, w)

        cycle += 1
        if cycle % 500 == 0:
            checkpoints.append([(s.attempts, s.idle_slots) for s in stats])

    checkpoints.append([(s.attempts, s.idle_slots) for s in stats])
    return SimReport(seed, events, stats, zone_counts, _batch_ratios(checkpoints, batches))


def _batch_ratios(checkpoints, batches: int) -> np.ndarray:
    cp = np.asarray(checkpoints, dtype=float)          # (n_cp, I, 2)
    n_cp = cp.shape[0]
    nb = min(batches, n_cp)
    if nb < 2:
        return np.zeros((0, cp.shape[1]))
    cuts = np.linspace(0, n_cp - 1, nb + 1).round().astype(int)
    prev = np.zeros(cp.shape[1:])
    out = []
    for c in cuts[1:]:
        d = cp[c] - prev
        prev = cp[c]
        with np.errstate(divide="ignore", invalid="ignore"):
            out.append(np.where(d[:, 1] > 0, d[:, 0] / d[:, 1], 0.0))
    return np.asarray(out)


def write_delays_csv(report: SimReport, path, names: Optional[Sequence[str]] = None) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["ac", "delay_us"])
        for k, st in enumerate(report.stats):
            label = names[k] if names else str(k + 1)
            for d in st.delays:
                w.writerow([label, f"{d:.3f}"])
