import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mlo_edca.ccdf import (delay_violation, invert_ccdf, reliability_index, threshold_slots)
from mlo_edca.delay_gf import GfEvaluationError


def point_mass(a):
    return lambda z: np.asarray(z) ** a


def mixture(weights):
    return lambda z: sum(w * np.asarray(z) ** e for e, w in weights.items())


def geometric(q):
    return lambda z: q * np.asarray(z) / (1 - (1 - q) * np.asarray(z))


def test_point_mass():
    assert invert_ccdf(point_mass(5), 3).probability == pytest.approx(1.0, abs=1e-8)
    assert invert_ccdf(point_mass(5), 5).probability == pytest.approx(1.0, abs=1e-8)
    assert invert_ccdf(point_mass(5), 6).probability == pytest.approx(0.0, abs=1e-8)


def test_geometric_tail():
    assert invert_ccdf(geometric(0.3), 10).probability == pytest.approx(0.7 ** 9, abs=1e-8)
    assert 0.7 ** 9 == pytest.approx(0.04035, abs=1e-5)


def test_two_point_mixture():
    gf = mixture({2: 0.5, 8: 0.5})
    assert invert_ccdf(gf, 5).probability == pytest.approx(0.5, abs=1e-8)


def test_nonpositive_threshold():
    res = invert_ccdf(point_mass(3), 0)
    assert res.probability == 1.0 and res.theta == 0.0


@given(st.integers(1, 400), st.integers(1, 400))
def test_point_mass_tail_exact(a, x):
    assert abs(invert_ccdf(point_mass(a), x).probability - (1.0 if a >= x else 0.0)) < 1e-8


@given(st.floats(0.01, 0.99), st.integers(1, 300))
def test_geometric_tail_exact(q, x):
    assert abs(invert_ccdf(geometric(q), x).probability - (1 - q) ** (x - 1)) < 1e-8


def test_radius_retry_on_pole():
    calls = []

    def touchy(z):
        calls.append(abs(np.asarray(z)[0]))
        if len(calls) == 1:
            raise GfEvaluationError("too close")
        return np.asarray(z) ** 4

    res = invert_ccdf(touchy, 3)
    assert res.probability == pytest.approx(1.0, abs=1e-8)
    assert calls[1] == pytest.approx(calls[0] ** 2)


@pytest.mark.parametrize("prob, theta", [(1e-4, 4.0), (1.0, 0.0), (0.0, 16.0), (1e-20, 16.0)])
def test_reliability_index(prob, theta):
    assert reliability_index(prob) == pytest.approx(theta)


def test_threshold_conversion():
    assert threshold_slots(100.0, 10.0) == 10_000


def test_violation_below_threshold_is_zero():
    assert delay_violation(point_mass(40), 1.0, 10.0).probability == pytest.approx(0.0, abs=1e-8)
    with pytest.raises(ValueError):
        delay_violation(point_mass(40), 0.0, 10.0)


def test_results_clamped_to_unit_interval():
    res = invert_ccdf(point_mass(7), 8)
    assert 0.0 <= res.probability <= 1.0
    assert math.isfinite(res.raw)
