import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import solve_ivp

from nearcol.kepler import (BelowPericenter, ConicClass, SingularAtZero, classify_conic,
                            collision_parameters, kepler_elements, kepler_infinity_graph,
                            parabolic_state, t_of_w, w_of_t)

theta0s = st.floats(-1.4, 1.4).filter(lambda x: abs(x) > 1e-3)


@given(st.floats(-1e4, 1e4), theta0s)
def test_w_of_t_inverts_t_of_w(t, Th):
    w = w_of_t(t, Th)
    assert t_of_w(w, Th) == pytest.approx(t, rel=1e-12, abs=1e-14)


@given(st.floats(-50, 50), st.floats(-3, 3), theta0s)
def test_parabolic_energy_zero(t, th0, Th):
    s = parabolic_state(t, th0, Th)
    assert abs(s.energy()) < 1e-12 * max(1.0, 1.0 / s.r)


def test_pericentre_at_zero():
    s = parabolic_state(0.0, 0.4, 1.0)
    assert (s.r, s.theta, s.R, s.Theta) == (0.5, 0.4, 0.0, 1.0)


def test_radial_orbit_singular_at_zero():
    with pytest.raises(SingularAtZero):
        parabolic_state(0.0, 0.0, 0.0)


@pytest.mark.parametrize("Th", [0.3, 1.0, 1.4])
def test_parabolic_matches_kepler_integration(Th):
    # independent route: integrate the planar Kepler problem in polar variables
    def rhs(t, y):
        r, th, R, Tp = y
        return [R, Tp / r**2, Tp**2 / r**3 - 1 / r**2, 0.0]

    s0 = parabolic_state(0.0, 0.0, Th)
    sol = solve_ivp(rhs, (0, 8), [s0.r, s0.theta, s0.R, s0.Theta], method="DOP853",
                    rtol=1e-13, atol=1e-13, dense_output=True)
    for t in (1.0, 4.0, 8.0):
        s = parabolic_state(t, 0.0, Th)
        assert np.allclose(sol.sol(t)[:3], [s.r, s.theta, s.R], rtol=1e-9, atol=1e-9)


@pytest.mark.parametrize("Th", [0.0, 0.5, 1.0, -1.2])
def test_collision_parameters_hit_jupiter(Th):
    tc, thc = collision_parameters(Th)
    s = parabolic_state(tc, thc, Th)
    assert s.r == pytest.approx(1.0, abs=1e-12)
    assert s.theta == pytest.approx(tc, abs=1e-12)


@given(st.floats(1.0, 1e6), st.floats(-1.4, 1.4))
def test_infinity_graph_zero_energy(r, Th):
    R, T = kepler_infinity_graph(r, Th, "s")
    assert R > 0 and T == Th
    assert 0.5 * (R * R + Th * Th / r**2) - 1 / r == pytest.approx(0.0, abs=1e-12 / r)
    assert kepler_infinity_graph(r, Th, "u")[0] == -R


def test_infinity_graph_below_pericentre():
    with pytest.raises(BelowPericenter):
        kepler_infinity_graph(0.4, 1.0, "s")


@pytest.mark.parametrize("h,Th,tag", [
    (-1.0, 0.5, ConicClass.ELLIPTIC),
    (-1.0, 1.2, ConicClass.HYPERBOLIC),
    (-1.0, 1.0, ConicClass.PARABOLIC),
    (-1.45, 1.0, ConicClass.ELLIPTIC),
    (0.5, 0.0, ConicClass.HYPERBOLIC),
    (-1.45, 2.0, ConicClass.OUT_OF_TABLE),
])
def test_conic_table(h, Th, tag):
    assert classify_conic(h, Th) is tag


def test_kepler_elements():
    a, e = kepler_elements(-0.5, 1.0)
    assert (a, e) == (1.0, 0.0)
