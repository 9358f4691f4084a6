"""Delay tail probabilities by Fourier-series inversion of a lattice GF.

For a delay D on the integer lattice with GF D(z), the tail sequence
Pr(D >= x), x >= 1, has generating function F(z) = z (1 - D(z)) / (1 - z).
Its x-th coefficient is recovered with the trapezoidal rule on a circle of
radius r < 1 through 2N points (N = l * x); aliasing then contributes at
most r^(2N) = 10^-gamma per unit of tail mass.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .delay_gf import GfEvaluationError, circle_points, monomial_on_circle

DEFAULT_GAMMA = 8.0
THETA_CAP = 16.0


@dataclass(frozen=True)
class CcdfResult:
    x_slots: int
    probability: float
    radius: float
    lattice_size: int
    theta: float
    raw: float = float("nan")     # unclamped inversion output


def reliability_index(prob: float, cap: float = THETA_CAP, base: float = 10.0) -> float:
    """theta = -log(prob); a zero probability maps to ``cap``."""
    if prob <= 0:
        return cap
    return min(max(-math.log(prob) / math.log(base), 0.0), cap)


def default_radius(size: int, gamma: float = DEFAULT_GAMMA) -> float:
    return 10.0 ** (-gamma / size)


def _gf_on_circle(gf, r: float, size: int) -> np.ndarray:
    if hasattr(gf, "on_circle"):
        return gf.on_circle(r, size)
    return np.asarray(gf(circle_points(r, size)), dtype=complex)


def _tail_coefficient(vals: np.ndarray, r: float, size: int, x: int) -> float:
    half = size // 2
    z = circle_points(r, size)
    f = z * (1.0 - vals) / (1.0 - z)
    # conj(z^x) / r^x = exp(-2 pi i n x / size)
    phase = np.conj(monomial_on_circle(x, 1.0, size))
    terms = f * phase
    # F has real coefficients, so the other half of the circle is the mirror image;
    # numpy's pairwise summation keeps the cancellation error small
    s = terms[0].real + terms[half].real + 2.0 * np.sum(terms[1:half].real)
    return s / (size * r ** x)


def invert_ccdf(gf, x: int, l: int = 1, r_override: Optional[float] = None,
                gamma: float = DEFAULT_GAMMA, theta_cap: float = THETA_CAP) -> CcdfResult:
    """Pr(D >= x) for a lattice delay with generating function ``gf``.

    ``gf`` is a callable on complex arrays; objects that also provide
    ``on_circle(r, size)`` are evaluated through that (faster) route.
    """
    x = int(x)
    if x <= 0:
        return CcdfResult(x, 1.0, 1.0, 0, 0.0, 1.0)
    size = 2 * x * l
    r = r_override if r_override is not None else default_radius(size, gamma)
    try:
        vals = _gf_on_circle(gf, r, size)
    except GfEvaluationError:
        r = r * r
        vals = _gf_on_circle(gf, r, size)
    raw = _tail_coefficient(vals, r, size, x)
    prob = min(max(raw, 0.0), 1.0)
    return CcdfResult(x, prob, r, size // 2, reliability_index(prob, theta_cap), raw)


def threshold_slots(delay_bound_ms: float, discrete_step_us: float) -> int:
    return int(round(delay_bound_ms * 1000.0 / discrete_step_us))


def delay_violation(gf, delay_bound_ms: float, discrete_step_us: float, **kw) -> CcdfResult:
    """Pr(D >= D_max) with D_max given in ms."""
    if not delay_bound_ms > 0:
        raise ValueError("delay bound must be positive")
    return invert_ccdf(gf, threshold_slots(delay_bound_ms, discrete_step_us), **kw)


def ccdf_curve(gf, xs, **kw) -> np.ndarray:
    return np.array([invert_ccdf(gf, int(x), **kw).probability for x in xs])
