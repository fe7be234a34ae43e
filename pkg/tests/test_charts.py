import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from nearcol import make_context
from nearcol.charts import (BranchRequired, Chart, OutOfDomain, PhasePoint, cart_to_lc,
                            coordinate_error, convert, energy, hamiltonian_cm, lc_hamiltonian,
                            lc_to_cart, recovered_h, reflect, solve_radial_momentum)
from nearcol.core import ParameterError
from nearcol.dynamics import vector_field

CTX = make_context(1e-3, -1.0)
ROUND_TRIP = [Chart.RotPolarCM, Chart.RotPolarSun, Chart.RotPolarJup, Chart.RotCartJup,
              Chart.LeviCivita, Chart.McGeheeSun, Chart.McGeheeInf, Chart.NonRotPolarCM]

coord = st.floats(-3.0, 3.0)


def _cm_point(q1, q2, p1, p2, t=0.0):
    mu = CTX.mu
    assume(math.hypot(q1 + mu, q2) > 1e-2 and math.hypot(q1 - 1 + mu, q2) > 1e-2)
    return PhasePoint(Chart.RotCartCM, (q1, q2, p1, p2), t)


@pytest.mark.parametrize("chart", ROUND_TRIP)
@given(coord, coord, coord, coord, st.floats(-5, 5))
def test_round_trip(chart, q1, q2, p1, p2, t):
    p = _cm_point(q1, q2, p1, p2, t)
    back = convert(convert(p, chart, CTX, branch="upper"), Chart.RotCartCM, CTX)
    scale = max(1.0, max(abs(v) for v in p.x))
    assert coordinate_error(back, p) < 1e-12 * scale
    assert back.t == p.t


@given(coord, coord, coord, coord)
def test_energy_agrees_across_charts(q1, q2, p1, p2):
    p = _cm_point(q1, q2, p1, p2)
    h = energy(p, CTX)
    for c in (Chart.RotPolarCM, Chart.RotPolarJup, Chart.RotCartJup, Chart.LeviCivita,
              Chart.McGeheeSun):
        assert recovered_h(convert(p, c, CTX, branch="upper"), CTX) == pytest.approx(
            h, rel=1e-11, abs=1e-11)


@given(coord, coord, coord, coord)
def test_lc_hamiltonian_is_scaled_energy(q1, q2, p1, p2):
    # xi^2 |z|^2 (G - g) with |z|^2 = |q|/2 and G = H + shift
    p = _cm_point(q1, q2, p1, p2)
    j = convert(p, Chart.RotCartJup, CTX)
    r = math.hypot(j.x[0], j.x[1])
    mu = CTX.mu
    G = energy(p, CTX) + (1 - mu) * (1 + (1 - mu) / 2)
    zw = convert(p, Chart.LeviCivita, CTX, branch="upper")
    expect = CTX.xi**2 * (r / 2) * (G - CTX.g)
    assert energy(zw, CTX) == pytest.approx(expect, rel=1e-9, abs=1e-12)


def test_lc_branch_required():
    with pytest.raises(BranchRequired):
        cart_to_lc(0.1, 0.0, 0.3, 0.4, CTX.xi)


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2))
def test_lc_map_sign_invariance(z1, z2, w1, w2):
    assume(z1 * z1 + z2 * z2 > 1e-6)
    a = lc_to_cart(z1, z2, w1, w2, CTX.xi)
    b = lc_to_cart(-z1, -z2, -w1, -w2, CTX.xi)
    assert np.allclose(a, b, rtol=1e-14, atol=1e-14)


@pytest.mark.parametrize("chart", [Chart.RotCartCM, Chart.RotPolarCM, Chart.RotPolarJup,
                                   Chart.LeviCivita, Chart.McGeheeSun])
@given(coord, coord, coord, coord)
def test_reflection_involution_and_energy(chart, q1, q2, p1, p2):
    p = convert(_cm_point(q1, q2, p1, p2, 1.5), chart, CTX, branch="upper")
    r = reflect(p)
    assert coordinate_error(reflect(r), p) < 1e-14 * max(1.0, max(map(abs, p.x)))
    assert r.t == -1.5
    assert recovered_h(r, CTX) == pytest.approx(recovered_h(p, CTX), rel=1e-12, abs=1e-12)


def test_reflection_not_a_symmetry_in_inertial_frame():
    with pytest.raises(ParameterError):
        reflect(PhasePoint(Chart.NonRotPolarCM, (2.0, 0.1, 0.0, 1.0)))


@given(st.floats(1.5, 20.0), st.floats(-math.pi, math.pi), st.floats(-1.0, 1.0),
       st.sampled_from([-1.0, 1.0]))
def test_solve_radial_momentum(r, th, Th, sign):
    try:
        R = solve_radial_momentum(Chart.RotPolarCM, r, th, Th, CTX, sign)
    except OutOfDomain:
        return
    p = PhasePoint(Chart.RotPolarCM, (r, th, R, Th))
    assert energy(p, CTX) == pytest.approx(CTX.h, abs=1e-12)
    assert math.copysign(1.0, R) == sign or R == 0


def test_phase_point_validation():
    with pytest.raises(ParameterError):
        PhasePoint(Chart.RotCartCM, (1.0, 2.0, 3.0))
    with pytest.raises(ParameterError):
        PhasePoint(Chart.RotCartCM, (1.0, 2.0, 3.0, math.inf))


@given(coord, coord, coord, coord)
def test_cartesian_field_is_hamiltonian(q1, q2, p1, p2):
    # independent route: central differences of the Hamiltonian
    p = _cm_point(q1, q2, p1, p2)
    y = np.array(p.x)
    eps = 1e-6
    grad = np.empty(4)
    for i in range(4):
        e = np.zeros(4)
        e[i] = eps
        grad[i] = (hamiltonian_cm(*(y + e), CTX.mu) - hamiltonian_cm(*(y - e), CTX.mu)) / (2 * eps)
    expect = np.array([grad[2], grad[3], -grad[0], -grad[1]])
    assert np.allclose(vector_field(p, CTX), expect, rtol=1e-6, atol=1e-6)


def test_lc_field_vanishing_hamiltonian_on_level():
    R = solve_radial_momentum(Chart.RotPolarJup, 0.05, 0.3, 0.01, CTX, 1.0)
    p = PhasePoint(Chart.RotPolarJup, (0.05, 0.3, R, 0.01))
    zw = convert(p, Chart.LeviCivita, CTX, branch="upper")
    assert abs(lc_hamiltonian(*zw.x, CTX.mu, CTX.xi)) < 1e-14
