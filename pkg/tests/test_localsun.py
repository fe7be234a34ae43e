import math

import numpy as np
import pytest
from scipy.integrate import quad

from nearcol import make_context
from nearcol.charts import Chart, PhasePoint, energy
from nearcol.core import ParameterError, wrap_angle
from nearcol.kepler import LAMBDA
from nearcol.localsun import (jupiter_curve_at_sun_section, sun_I_integral, sun_manifold_curve,
                              sun_window_center)


def _I_oracle(theta_bar, delta):
    """Independent quadrature: algebraic weight for the ray term, Gauss-Legendre for the rest."""
    T = math.sqrt(2.0) / 3.0 * delta**3
    alpha = theta_bar + T
    ray, _ = quad(lambda s: math.cos(alpha - s), 0.0, T, weight="alg", wvar=(-1.0 / 3.0, 0.0),
                  epsabs=1e-15, epsrel=1e-13)
    x, w = np.polynomial.legendre.leggauss(200)
    # s = T v^3 removes the s^(2/3) kink at the origin
    v = 0.5 * (x + 1.0)
    s = T * v**3
    c23 = s ** (2.0 / 3.0)
    f = c23 * np.sin(alpha - s) / (1 + LAMBDA**2 * c23**2 - 2 * LAMBDA * c23 * np.cos(alpha - s)) ** 1.5
    near = float(np.sum(0.5 * w * f * 3 * T * v**2))
    return -LAMBDA * near - math.sqrt(2.0 / LAMBDA) * ray


@pytest.mark.parametrize("delta", [0.1, 0.3])
def test_first_order_integral_matches_oracle(delta):
    for th in np.linspace(-3.0, 3.0, 13):
        assert sun_I_integral(th, delta) == pytest.approx(_I_oracle(th, delta), rel=1e-10, abs=1e-13)


def test_first_order_integral_vectorised():
    th = np.array([[0.1, 0.2], [0.3, 0.4]])
    out = sun_I_integral(th, 0.1)
    assert out.shape == (2, 2)
    assert out[1, 0] == sun_I_integral(0.3, 0.1)


def test_window_center():
    assert sun_window_center(0.1) == pytest.approx(-math.sqrt(2) / 3 * 0.999, rel=1e-15)


@pytest.fixture(scope="module")
def sun_curves():
    return make_context(1e-4, -5e-5), sun_manifold_curve(make_context(1e-4, -5e-5), 0.3, "u", n=16)


def test_numeric_curve_on_level(sun_curves):
    ctx, sc = sun_curves
    num = sc.numeric
    # the regularised energy rbar (H - h) is what the integrator conserves; the seed
    # error is amplified by delta^2 / SEED_RADIUS on the way out
    for th, R, Th in zip(num.theta, num.R, num.Theta):
        assert energy(PhasePoint(Chart.RotPolarSun, (0.09, th, R, Th)), ctx) == pytest.approx(
            ctx.h, abs=5e-8)
    assert np.all(num.R > 0)


def test_numeric_close_to_first_order(sun_curves):
    ctx, sc = sun_curves
    diff = np.max(np.abs(sc.numeric.Theta - sc.first_order.Theta))
    assert diff < 50 * ctx.mu**2
    assert np.max(np.abs(sc.numeric.Theta)) > 10 * diff


def test_collision_branch_is_reflection():
    ctx = make_context(1e-4, -5e-5)
    u = sun_manifold_curve(ctx, 0.3, "u", n=8).numeric
    s = sun_manifold_curve(ctx, 0.3, "s", n=8).numeric
    assert np.allclose(np.sort(wrap_angle(s.theta)), np.sort(wrap_angle(-u.theta)), atol=1e-12)
    assert np.all(s.R < 0)


def test_jupiter_curve_covers_window():
    ctx = make_context(1e-5, 1e-6)
    jc = jupiter_curve_at_sun_section(ctx, 0.1, n=16)
    c, w = sun_window_center(0.1), 0.1**4
    assert jc.theta[0] <= c - w + 1e-12 and jc.theta[-1] >= c + w - 1e-12
    assert np.all(jc.R < 0)
    assert np.all(np.diff(jc.extra["beta"]) != 0)


def test_delta_checked():
    ctx = make_context(1e-4, -5e-5)
    with pytest.raises(ParameterError):
        sun_I_integral(0.0, 1.2)
    with pytest.raises(ParameterError):
        sun_manifold_curve(ctx, 0.3, "x", n=4)
