"""Probability generating function of the per-packet delay of one AC.

Every elementary piece of the delay GF is a sparse polynomial in z with
integer exponents (durations rounded to the discrete step).  The pieces are
combined rationally:

    defer      E(z) = s z^a / (1 - sum_b mu_b z^tau_b)
    slot       Y(z) = (1 - c) z^sigma + E(z) * (sum_l gamma_l z^g_l + nu z^tc)
    collision  C(z) = E(z) z^tc
    backoff    A(z) = sum_i eta c^i C^i prod_{j<=i} U_{f_j}(Y)
    total      D(z) = A T E / N + (N - 1)/N z^Delta

with U_f(y) = (1 - y^f) / (f (1 - y)) the uniform-window GF.  Sparse
polynomials can be evaluated either at arbitrary complex points or, much
faster, on the whole inversion circle at once through one real FFT.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .airtime import AcTiming, ac_timing, to_lattice
from .fixed_point import FixedPointSolution, others_silent, zone_weights
from .scenario import LinkScenario

POLE_GUARD = 0.5              # |defer denominator| never drops below idle_prob inside the disc
NU_TOLERANCE = 1e-9

Terms = Tuple[Tuple[int, float], ...]


class GfEvaluationError(ArithmeticError):
    """A denominator came too close to zero (z near a pole)."""


def _merge(terms: List[Tuple[int, float]]) -> Terms:
    acc: Dict[int, float] = {}
    for e, w in terms:
        if w != 0.0:
            acc[e] = acc.get(e, 0.0) + w
    return tuple(sorted(acc.items()))


def poly_at(terms: Terms, z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    out = np.zeros(z.shape, dtype=complex)
    for e, w in terms:
        out += w * z ** e
    return out


@lru_cache(maxsize=8)
def _unit_roots(size: int) -> np.ndarray:
    out = np.exp(2j * np.pi * np.arange(size) / size)
    out.flags.writeable = False
    return out


def monomial_on_circle(e: int, r: float, size: int) -> np.ndarray:
    """z^e at z_n = r exp(2 pi i n / size), n = 0..size//2, by table lookup."""
    n = np.arange(size // 2 + 1, dtype=np.int64)
    return r ** e * _unit_roots(size)[(n * (e % size)) % size]


def poly_on_circle(terms: Terms, r: float, size: int) -> np.ndarray:
    """Evaluate at z_n = r exp(2 pi i n / size) for n = 0..size//2.

    Exponents are folded modulo ``size``; the radius weight r^e uses the
    full exponent, so the result is exact (up to rounding) for any e.
    Short polynomials go through table lookups, long ones through one FFT.
    """
    if len(terms) <= 4:
        out = np.zeros(size // 2 + 1, dtype=complex)
        for e, w in terms:
            out += w * monomial_on_circle(e, r, size)
        return out
    a = np.zeros(size)
    for e, w in terms:
        a[e % size] += w * r ** e
    # rfft computes sum a_e exp(-2 pi i n e / size); conjugate flips the sign
    return np.conj(np.fft.rfft(a))


def circle_points(r: float, size: int) -> np.ndarray:
    return r * _unit_roots(size)[: size // 2 + 1]


def ipow(y: np.ndarray, k: int) -> np.ndarray:
    """Integer power by repeated squaring (stable for complex arrays)."""
    result = np.ones_like(y)
    base = y.copy()
    while k:
        if k & 1:
            result = result * base
        k >>= 1
        if k:
            base = base * base
    return result


@dataclass(frozen=True)
class GfContext:
    """Everything needed to evaluate the delay GF of one AC on one link."""
    ac_index: int             # index into link.acs
    sorted_index: int         # position in the AIFS-sorted order
    c: float
    n_txop: int
    retry_limit: int
    windows: Tuple[int, ...]  # f_{k,j}, j = 0..R-1
    eta: float
    # lattice exponents
    e_aifs: int
    e_slot: int
    e_data: int
    e_delta: int
    e_coll: int
    # defer GF pieces
    idle_prob: float          # s_{h_k}
    defer_terms: Terms        # interruption mixture mu * z^tau, one per branch
    # slot-occupancy pieces
    gamma: Tuple[float, ...]  # per sorted AC
    nu: float
    block_terms: Terms        # gamma_l z^g_l + nu z^tc

    # -- elementary pieces ---------------------------------------------------
    def _pieces_at(self, z) -> Dict[str, np.ndarray]:
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        return {
            "aifs": z ** self.e_aifs,
            # 1 - sum w z^e written as idle_prob + sum w (1 - z^e): exact at z = 1
            "defer_den": self.idle_prob + sum(w * (1.0 - z ** e) for e, w in self.defer_terms),
            "slot": z ** self.e_slot,
            "block": poly_at(self.block_terms, z),
            "coll": z ** self.e_coll,
            "data": z ** self.e_data,
            "delta": z ** self.e_delta,
        }

    def _pieces_on_circle(self, r: float, size: int) -> Dict[str, np.ndarray]:
        pts = circle_points(r, size)
        mono = lambda e: monomial_on_circle(e, r, size)
        return {
            "aifs": mono(self.e_aifs),
            "defer_den": self.idle_prob + (sum(w for _, w in self.defer_terms)
                                           - poly_on_circle(self.defer_terms, r, size)),
            "slot": mono(self.e_slot),
            "block": poly_on_circle(self.block_terms, r, size),
            "coll": mono(self.e_coll),
            "data": mono(self.e_data),
            "delta": mono(self.e_delta),
            "z": pts,
        }

    # -- assembly ------------------------------------------------------------
    def _defer(self, pc):
        den = pc["defer_den"]
        if not self.idle_prob > 0 or np.any(np.abs(den) < POLE_GUARD * self.idle_prob):
            raise GfEvaluationError("defer GF denominator vanishes")
        return self.idle_prob * pc["aifs"] / den

    def _occupancy(self, pc, eps):
        return (1.0 - self.c) * pc["slot"] + eps * pc["block"]

    def _backoff(self, pc, eps, y):
        chat = eps * pc["coll"]
        one_minus = 1.0 - y
        near_one = np.abs(one_minus) < 1e-13
        safe = np.where(near_one, 1.0, one_minus)
        total = np.zeros_like(y)
        stage_prod = np.ones_like(y)
        coll_pow = np.ones_like(y)
        y_pow, f_prev = None, None
        for i, f in enumerate(self.windows):
            # windows double from stage to stage, so y^f is usually one squaring away
            if f == f_prev:
                pass
            elif f_prev is not None and f == 2 * f_prev:
                y_pow = y_pow * y_pow
            else:
                y_pow = ipow(y, f)
            f_prev = f
            u = np.where(near_one, 1.0, (1.0 - y_pow) / (f * safe))
            stage_prod = stage_prod * u
            total = total + self.eta * self.c ** i * coll_pow * stage_prod
            coll_pow = coll_pow * chat
        return total

    def _total(self, pc):
        eps = self._defer(pc)
        y = self._occupancy(pc, eps)
        a = self._backoff(pc, eps, y)
        n = self.n_txop
        return a * pc["data"] * eps / n + (n - 1) / n * pc["delta"]

    # -- public evaluators ---------------------------------------------------
    def defer(self, z) -> np.ndarray:
        return self._defer(self._pieces_at(z))

    def occupancy(self, z) -> np.ndarray:
        pc = self._pieces_at(z)
        return self._occupancy(pc, self._defer(pc))

    def collision(self, z) -> np.ndarray:
        pc = self._pieces_at(z)
        return self._defer(pc) * pc["coll"]

    def backoff(self, z) -> np.ndarray:
        pc = self._pieces_at(z)
        eps = self._defer(pc)
        return self._backoff(pc, eps, self._occupancy(pc, eps))

    def transmission(self, z) -> np.ndarray:
        return self._pieces_at(z)["data"]

    def __call__(self, z) -> np.ndarray:
        return self._total(self._pieces_at(z))

    def on_circle(self, r: float, size: int) -> np.ndarray:
        """D(z) at z_n = r exp(2 pi i n/size), n = 0..size//2."""
        return self._total(self._pieces_on_circle(r, size))


def _sorted_view(link: LinkScenario, sol: FixedPointSolution):
    order = list(sol.zones.sorted_acs)
    acs = [link.acs[i] for i in order]
    p = np.asarray(sol.tau)[order]
    c = np.asarray(sol.c)[order]
    n = np.array([ac.n_stations for ac in acs], dtype=float)
    timing = [ac_timing(ac, link.phy) for ac in acs]
    return order, acs, p, c, n, timing


def _interrupt_branches(k_eligible: int, p, n, r) -> Tuple[float, List[float]]:
    """(1 - q, [rho_l]) for a slot in which sorted ACs [0, k_eligible) may transmit."""
    q = 1.0
    for i in range(k_eligible):
        q *= r[i] ** n[i]
    busy = 1.0 - q
    rho = []
    for l in range(k_eligible):
        if busy <= 0:
            rho.append(0.0)
            continue
        # exactly one station of AC l transmits, all others silent
        single = n[l] * p[l] * others_silent(l, r, n, k_eligible)
        rho.append(single / busy)
    return busy, rho


def build_context(link: LinkScenario, sol: FixedPointSolution, ac_index: int) -> GfContext:
    phy = link.phy
    zm = sol.zones
    order, acs, p, c_all, n, timing = _sorted_view(link, sol)
    k = order.index(ac_index)
    ac, tk = acs[k], timing[k]
    r = 1.0 - p
    c = float(c_all[k])
    aifs_min = timing[0].aifs
    lat = lambda us: to_lattice(us, phy)

    # defer: the channel must stay idle for h_k slots after AIFS_1
    h_k = zm.offsets[k]
    idle_prob = 1.0
    defer = []
    q_zone = {}
    for slot in range(1, h_k + 1):
        zone = zm.slot_zone[slot - 1]
        elig = zm.eligible_count[zone - 1]
        if zone not in q_zone:
            q_zone[zone] = _interrupt_branches(elig, p, n, r)
        busy, rho = q_zone[zone]
        mu = idle_prob * busy
        if mu > 0:
            lead = aifs_min + (slot - 1) * phy.slot_time
            for l in range(elig):
                if rho[l] > 0:
                    xi = timing[l].n_txop * timing[l].delta - phy.sifs
                    defer.append((lat(lead + xi), mu * rho[l]))
            coll = max(1.0 - sum(rho), 0.0)
            if coll > 0:
                defer.append((lat(lead + tk.t_collision - tk.aifs), mu * coll))
        idle_prob *= 1.0 - busy

    # blocking probabilities over the zones where AC k contends
    w = zone_weights(k, zm, sol.stationary.pi)
    gamma = np.zeros(len(acs))
    for j in range(zm.first_zone[k] - 1, zm.num_zones):
        if w[j] == 0:
            continue
        elig = zm.eligible_count[j]
        for l in range(elig):
            if l == k:
                if n[k] < 2:
                    continue
                g = (n[k] - 1) * p[k] * others_silent(k, r, n - np.eye(len(n))[k], elig)
            else:
                g = n[l] * p[l] * others_silent(l, r, n - np.eye(len(n))[k], elig)
            gamma[l] += w[j] * g
    nu = c - gamma.sum()
    if nu < -NU_TOLERANCE:
        raise ValueError(f"inconsistent blocking probabilities (nu = {nu:.3e})")
    nu = max(nu, 0.0)

    block = [(lat(timing[l].t_success - tk.aifs - phy.sifs), float(gamma[l]))
             for l in range(len(acs))]
    block.append((lat(tk.t_collision), nu))

    R = ac.retry_limit
    cc = min(c, 1.0 - 1e-12)
    eta = (1.0 - cc) / (1.0 - cc ** R)
    return GfContext(
        ac_index=ac_index,
        sorted_index=k,
        c=c,
        n_txop=tk.n_txop,
        retry_limit=R,
        windows=tuple(ac.window(j) for j in range(R)),
        eta=eta,
        e_aifs=lat(tk.aifs),
        e_slot=lat(phy.slot_time),
        e_data=lat(tk.t_data),
        e_delta=lat(tk.delta),
        e_coll=lat(tk.t_collision),
        idle_prob=idle_prob,
        defer_terms=_merge(defer),
        gamma=tuple(float(g) for g in gamma),
        nu=float(nu),
        block_terms=_merge(block),
    )


def build_contexts(link: LinkScenario, sol: FixedPointSolution) -> List[GfContext]:
    return [build_context(link, sol, i) for i in range(link.num_acs)]
