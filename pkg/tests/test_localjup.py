import math

import numpy as np
import pytest

from nearcol import make_context
from nearcol.charts import Chart, PhasePoint, convert, energy
from nearcol.core import ParameterError, wrap_angle
from nearcol.dynamics import Unsupported
from nearcol.localjup import (collision_circle, jupiter_manifold_curve, lc_energy,
                              solve_R_jupiter, tau_lin_oracle, transition_map,
                              transition_map_su)

CTX = make_context(1e-5, -1.0)


@pytest.fixture(scope="module")
def ejection():
    return jupiter_manifold_curve(CTX, 0.3, "ejection", n=32)


@pytest.fixture(scope="module")
def collision():
    return jupiter_manifold_curve(CTX, 0.3, "collision", n=32)


def test_collision_circle_on_level():
    for beta in np.linspace(-1.5, 1.5, 7):
        assert abs(lc_energy(collision_circle(beta, CTX).zw, CTX)) < 1e-18


def test_curve_on_section_and_level(ejection):
    r = CTX.mu**0.3
    for th, R, Th in zip(ejection.theta, ejection.R, ejection.Theta):
        p = PhasePoint(Chart.RotPolarJup, (r, th, R, Th))
        assert energy(p, CTX) == pytest.approx(CTX.h, abs=1e-9)
        assert R == pytest.approx(float(solve_R_jupiter(r, th, Th, CTX, 1.0)), abs=1e-8)


def test_leading_order_shape(ejection):
    # nearly radial ejection at speed 1/xi, angle doubling of the Levi-Civita map
    assert np.max(np.abs(ejection.R - 1 / CTX.xi)) < 5e-3
    assert np.max(np.abs(ejection.Theta)) < 5e-3
    assert np.polyfit(ejection.extra["beta"], ejection.theta, 1)[0] == pytest.approx(2.0, abs=1e-3)


def test_regularised_time_matches_linear_oracle(ejection):
    tau0 = tau_lin_oracle(0.0, CTX, 0.3)
    assert np.allclose(ejection.extra["tau"], tau0, rtol=1e-2)


def test_collision_is_reflected_ejection(ejection, collision):
    def wrapped(c):
        th = wrap_angle(c.theta)
        o = np.argsort(th)
        return th[o], c.R[o], c.Theta[o]

    for a, b in zip(wrapped(collision), wrapped(ejection.reflected())):
        assert np.allclose(a, b, atol=1e-9)


def test_transition_map_returns_to_circle():
    r = CTX.mu**0.3
    th, Th = 0.4, 2e-4
    R = float(solve_R_jupiter(r, th, Th, CTX, -1.0))
    out = transition_map(PhasePoint(Chart.RotPolarJup, (r, th, R, Th)), CTX)
    assert out.x[0] == pytest.approx(r, rel=1e-9)
    assert out.x[2] > 0
    assert out.t > 0
    assert energy(out, CTX) == pytest.approx(CTX.h, abs=1e-9)


def test_transition_su_leading_order():
    eps = CTX.mu**0.15
    s = eps * np.array([math.cos(0.3), math.sin(0.3)])
    u = 0.4 * eps * np.array([math.cos(2.0), math.sin(2.0)])
    so, uo, tau = transition_map_su(s, u, CTX)
    assert np.hypot(*(so - 0.4 * s)) < 10 * eps**2
    assert np.hypot(*(uo - eps * u / np.hypot(*u))) < 10 * eps**2
    assert tau == pytest.approx(math.log(1 / 0.4), rel=0.05)


def test_transition_su_rejects_outside_entry():
    with pytest.raises(ParameterError):
        transition_map_su([0.01, 0.0], [0.02, 0.0], CTX)


def test_parameter_checks():
    with pytest.raises(Unsupported):
        jupiter_manifold_curve(CTX, 0.25, n=4)
    with pytest.raises(ParameterError):
        jupiter_manifold_curve(make_context(0.0, -1.0), n=4)
    with pytest.raises(ParameterError):
        jupiter_manifold_curve(CTX, branch="sideways", n=4)
