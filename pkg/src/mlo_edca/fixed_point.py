"""Per-AC transmission / collision probabilities from the AIFS-zone fixed point.

Internally everything runs on the AIFS-sorted AC order of the zone model;
:class:`FixedPointSolution` reports per-AC quantities back in the link's own
AC order.

The mean-value formula of :func:`tx_prob` yields attempts per *idle* backoff
slot (2/(CW-1) without collisions).  Each attempt itself occupies one more
slot of the zone chain, so with ``attempt_model="slot"`` (the default) the
chain is driven by the per-slot probability tau = p / (1 + p).  With
``attempt_model="direct"`` p enters the chain unchanged.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .scenario import AcEdcaConfig, LinkScenario
from .zones import ZoneModel, build_zones

C_CLAMP = 1.0 - 1e-12


class ConvergenceError(RuntimeError):
    def __init__(self, residual: float, iterations: int, p: np.ndarray):
        self.residual = residual
        self.iterations = iterations
        self.p = p
        super().__init__(
            f"fixed point did not converge after {iterations} iterations "
            f"(residual {residual:.3e}); retry with a smaller damping factor"
        )


@dataclass(frozen=True)
class ZoneStationary:
    pi: np.ndarray        # per zone, sums to 1
    pi00: float           # first backoff slot after AIFS_1
    alpha: np.ndarray     # alpha_0..alpha_{J-1}
    q: np.ndarray         # per zone: nobody eligible transmits


@dataclass(frozen=True)
class FixedPointSolution:
    zones: ZoneModel
    p: np.ndarray         # attempts per idle backoff slot, link AC order
    tau: np.ndarray       # per-slot transmission probability seen by the zone chain
    c: np.ndarray
    loss: np.ndarray
    stationary: ZoneStationary
    iterations: int
    residual: float
    attempt_model: str = "slot"

    @property
    def r(self) -> np.ndarray:
        return 1.0 - self.tau


def _silent(r: np.ndarray, n: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(n > 0, r ** n, 1.0)


def zone_stationary(p: Sequence[float], n: Sequence[int], zm: ZoneModel) -> ZoneStationary:
    """Stationary zone distribution of the post-AIFS backoff slot chain.

    ``p`` and ``n`` are given in sorted (zone-model) order.
    """
    r = 1.0 - np.asarray(p, dtype=float)
    silent = _silent(r, np.asarray(n, dtype=float))
    cum = np.cumprod(silent)
    z = np.asarray(zm.eligible_count)
    q = cum[z - 1]
    widths = zm.zone_widths()
    J = zm.num_zones

    alpha = np.ones(J)
    for j in range(1, J):
        alpha[j] = alpha[j - 1] * q[j - 1] ** widths[j - 1]

    u = np.empty(J)
    for j in range(J - 1):
        # slots h_j+1 .. h_{j+1}: geometric run inside the zone
        u[j] = alpha[j] * np.sum(q[j] ** np.arange(widths[j]))
    if q[-1] >= 1.0:
        # nobody ever transmits: the chain drifts into the last zone and stays
        pi = np.zeros(J)
        pi[-1] = 1.0
        return ZoneStationary(pi, 0.0, alpha, q)
    u[-1] = alpha[-1] / (1.0 - q[-1])
    total = u.sum()
    return ZoneStationary(u / total, 1.0 / total, alpha, q)


def others_silent(k: int, r: np.ndarray, n: np.ndarray, upto: int) -> float:
    """Probability that every station among sorted ACs [0, upto) except one
    station of AC ``k`` stays silent."""
    prod = 1.0
    for i in range(upto):
        e = n[i] - 1 if i == k else n[i]
        if e > 0:
            prod *= r[i] ** e
    return prod


def zone_weights(k: int, zm: ZoneModel, pi: np.ndarray) -> np.ndarray:
    """pi_j normalised over the zones where sorted AC ``k`` may contend."""
    w = np.zeros_like(pi)
    start = zm.first_zone[k] - 1
    tail = pi[start:]
    s = tail.sum()
    if s > 0:
        w[start:] = tail / s
    else:
        w[-1] = 1.0
    return w


def collision_prob(k: int, st: ZoneStationary, p: np.ndarray, n: np.ndarray,
                   zm: ZoneModel) -> float:
    """Conditional collision probability of sorted AC ``k``.

    The tagged station is excluded from the product directly instead of
    dividing by r_k, which keeps p_k = 1 well defined.
    """
    r = 1.0 - p
    w = zone_weights(k, zm, st.pi)
    c = 0.0
    for j in range(zm.first_zone[k] - 1, zm.num_zones):
        c += w[j] * (1.0 - others_silent(k, r, n, zm.eligible_count[j]))
    return float(min(max(c, 0.0), 1.0))


def windows(ac: AcEdcaConfig) -> np.ndarray:
    """f_{k,j} for backoff stages j = 0..R-1."""
    return np.array([ac.window(j) for j in range(ac.retry_limit)], dtype=float)


def attempt_rate(c: float, ac: AcEdcaConfig) -> float:
    """2 / (eta * sum_j c^j (f_j - 1)), unclamped (inf when the sum vanishes)."""
    c = min(max(c, 0.0), C_CLAMP)
    R = ac.retry_limit
    f = windows(ac)
    eta = (1.0 - c) / (1.0 - c ** R)
    denom = eta * np.sum(c ** np.arange(R) * (f - 1.0))
    return float(2.0 / denom) if denom > 0 else np.inf


def tx_prob(c: float, ac: AcEdcaConfig) -> float:
    """Mean-value transmission probability, clamped to [0, 1].

    Values above 1 (tiny windows such as CW_min = 2) mean the formula broke
    down; they are clamped rather than rejected.
    """
    return min(attempt_rate(c, ac), 1.0)


def slot_probability(rate: float) -> float:
    """Per-slot attempt probability from attempts per idle slot."""
    return 1.0 if np.isinf(rate) else rate / (1.0 + rate)


def loss_prob(c: float, retry_limit: int) -> float:
    return float(c ** retry_limit)


ATTEMPT_MODELS = ("slot", "direct")


def _chain_prob(acs, c, attempt_model):
    if attempt_model == "slot":
        return np.array([slot_probability(attempt_rate(ck, ac)) for ck, ac in zip(c, acs)])
    return np.array([tx_prob(ck, ac) for ck, ac in zip(c, acs)])


def _iterate(tau, acs, n, zm, attempt_model):
    st = zone_stationary(tau, n, zm)
    c = np.array([collision_prob(k, st, tau, n, zm) for k in range(len(tau))])
    return st, c, _chain_prob(acs, c, attempt_model)


def solve(link: LinkScenario, damping: float = 0.5, tol: float = 1e-10,
          max_iter: int = 10_000, p0: Optional[Sequence[float]] = None,
          zones: Optional[ZoneModel] = None,
          attempt_model: str = "slot") -> FixedPointSolution:
    """Damped fixed-point iteration for (p, c) on one link.

    The iteration runs on the per-slot probabilities fed to the zone chain,
    starting from the collision-free guess.  Raises ConvergenceError when
    ``max_iter`` is exhausted.
    """
    if attempt_model not in ATTEMPT_MODELS:
        raise ValueError(f"attempt_model must be one of {ATTEMPT_MODELS}")
    zm = zones or build_zones(link)
    order = list(zm.sorted_acs)
    inv = np.argsort(order)
    acs = [link.acs[i] for i in order]
    n = np.array([ac.n_stations for ac in acs], dtype=float)
    if p0 is None:
        tau = _chain_prob(acs, np.zeros(len(acs)), attempt_model)
    else:
        tau = np.asarray(p0, dtype=float)[order]

    residual = np.inf
    for it in range(1, max_iter + 1):
        st, c, tau_new = _iterate(tau, acs, n, zm, attempt_model)
        residual = float(np.max(np.abs(tau_new - tau)))
        if residual < tol:
            break
        tau = (1.0 - damping) * tau + damping * tau_new
    else:
        raise ConvergenceError(residual, max_iter, tau[inv])

    p = np.array([tx_prob(ck, ac) for ck, ac in zip(c, acs)])
    loss = np.array([loss_prob(ck, ac.retry_limit) for ck, ac in zip(c, acs)])
    return FixedPointSolution(
        zones=zm,
        p=p[inv],
        tau=tau[inv],
        c=c[inv],
        loss=loss[inv],
        stationary=st,
        iterations=it,
        residual=residual,
        attempt_model=attempt_model,
    )
