import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nearcol.core import (NonPositiveShiftedEnergy, ParameterError, angle_diff, default_threads,
                          make_context, parallel_map, shifted_energy, wrap_angle)


def test_shifted_energy_and_xi():
    ctx = make_context(1e-3, -1.0)
    g = -1.0 + (1 - 1e-3) * (1 + (1 - 1e-3) / 2)
    assert ctx.g == pytest.approx(g, rel=1e-15)
    assert ctx.xi == pytest.approx((2 * g) ** -0.5, rel=1e-15)
    assert shifted_energy(0.0, 0.0) == 1.5


def test_nonpositive_shifted_energy_rejected():
    with pytest.raises(NonPositiveShiftedEnergy):
        make_context(1e-3, -1.6)


@pytest.mark.parametrize("mu", [-1e-3, 0.6, math.nan])
def test_bad_mass_ratio(mu):
    with pytest.raises(ParameterError):
        make_context(mu, -1.0)


@given(st.floats(-1e3, 1e3))
def test_wrap_angle_range(a):
    w = wrap_angle(a)
    assert -math.pi < w <= math.pi
    assert math.isclose(math.cos(w), math.cos(a), abs_tol=1e-9)
    assert math.isclose(math.sin(w), math.sin(a), abs_tol=1e-9)


@given(st.floats(-10, 10), st.floats(-10, 10))
def test_angle_diff_antisymmetric(a, b):
    d1, d2 = angle_diff(a, b), angle_diff(b, a)
    if abs(abs(d1) - math.pi) > 1e-12:
        assert d1 == pytest.approx(-d2, abs=1e-12)


def test_parallel_map_keeps_order():
    items = list(range(20))
    assert parallel_map(lambda x: x * x, items, threads=4) == [x * x for x in items]
    assert parallel_map(lambda x: x * x, items, threads=1) == [x * x for x in items]


def test_default_threads_env(monkeypatch):
    monkeypatch.setenv("NEARCOL_THREADS", "3")
    assert default_threads() == 3
    monkeypatch.setenv("NEARCOL_THREADS", "many")
    with pytest.raises(ParameterError):
        default_threads()


def test_wrap_angle_vectorised():
    a = np.array([0.0, math.pi, -math.pi, 3 * math.pi])
    assert np.allclose(wrap_angle(a), [0.0, math.pi, math.pi, math.pi])
