import math

import numpy as np
import pytest

from nearcol import make_context
from nearcol.charts import Chart, PhasePoint, energy
from nearcol.core import ParameterError
from nearcol.dynamics import outer_section
from nearcol.infinity import (DomainTooSmall, GridFourierFunction, SeedInvalid, g_operator,
                              g_operator_at, g_operator_quad, hj_domain_u_max, hj_solve,
                              infinity_manifold_curve)

U = -np.geomspace(1e5, 0.7, 400)


def _test_fn(uu, vv):
    return (1 + uu * uu) ** -1.0 * (np.cos(vv) + 0.3 * np.sin(3 * vv)) + (1 + uu * uu) ** -0.8


def _mode(k):
    # exact Fourier modes of _test_fn
    amp = {0: lambda u: (1 + u * u) ** -0.8, 1: lambda u: 0.5 / (1 + u * u),
           -1: lambda u: 0.5 / (1 + u * u), 3: lambda u: -0.15j / (1 + u * u),
           -3: lambda u: 0.15j / (1 + u * u)}
    return amp[k]


@pytest.fixture(scope="module")
def g_of_test():
    f = GridFourierFunction.from_callable(_test_fn, U, 4, 64)
    return f, g_operator(f)


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
@pytest.mark.parametrize("k", [0, 1, -1, 3, -3])
@pytest.mark.parametrize("u", [-50.0, -3.0, -1.0])
def test_g_operator_against_quadrature(g_of_test, k, u):
    # two routes: spline/Filon march with power-law tail vs oscillatory quadrature
    f, g = g_of_test
    got = g_operator_at(f, [u], g)[0, k + f.K]
    ref = g_operator_quad(_mode(k), u, k)
    assert abs(got - ref) < 1e-6 * max(1.0, abs(ref))


def test_from_callable_recovers_modes(g_of_test):
    f, _ = g_of_test
    assert f.realness_defect() < 1e-15
    for k in (0, 1, 3):
        assert np.allclose(f.modes[:, k + f.K], _mode(k)(U), atol=1e-15)
    assert np.allclose(f.modes[:, 2 + f.K], 0.0, atol=1e-15)


def test_grid_function_validation():
    with pytest.raises(ParameterError):
        GridFourierFunction(np.array([0.0, -1.0]), np.zeros((2, 3)))
    with pytest.raises(ParameterError):
        GridFourierFunction(np.array([-1.0, 0.0]), np.zeros((2, 4)))


def test_grid_function_json_round_trip(g_of_test):
    _, g = g_of_test
    back = GridFourierFunction.from_json(g.to_json())
    assert np.array_equal(back.modes, g.modes) and np.array_equal(back.u_grid, g.u_grid)


def test_hj_zero_mass_is_trivial():
    s = hj_solve(make_context(0.0, -1.0), 1.0)
    assert s.norm() == 0.0 and s.iterations == 1


@pytest.fixture(scope="module")
def hj():
    return hj_solve(make_context(1e-4, -1.0), 1.0)


def test_hj_residual_and_realness(hj):
    assert hj.residual < 1e-7
    assert hj.T1.realness_defect() < 1e-12
    assert hj.history[-1] < 1e-12


def test_hj_manifold_point_has_zero_energy_far_out(hj):
    # at large |u| the correction is tiny and the point sits on the level h = -Theta0
    ctx = make_context(1e-4, -1.0)
    r, th, R, Th = hj.manifold_point(-5e3, 0.7)
    p = PhasePoint(Chart.RotPolarCM, (r, th, R, Th))
    assert energy(p, ctx) == pytest.approx(ctx.h, abs=1e-9)


def test_domain_checks():
    with pytest.raises(DomainTooSmall):
        hj_solve(make_context(1e-4, -1.0), 1.0, u_min=-5.0)
    with pytest.raises(ParameterError):
        hj_solve(make_context(1e-4, -1.0), 1.0, nu=0.7)
    assert hj_domain_u_max(1e-4, 0.3, 1.0) < 0


@pytest.fixture(scope="module")
def inf_curves():
    ctx = make_context(1e-4, -1.0)
    return (ctx, infinity_manifold_curve(ctx, 1.0, "u", n=16),
            infinity_manifold_curve(ctx, 1.0, "s", n=16))


def test_infinity_curves_on_level(inf_curves):
    ctx, cu, cs = inf_curves
    r = ctx.mu**0.3
    for c, sign in ((cu, -1), (cs, 1)):
        assert np.all(np.sign(c.R) == sign)
        for th, R, Th in zip(c.theta, c.R, c.Theta):
            p = PhasePoint(Chart.RotPolarJup, (r, th, R, Th))
            assert energy(p, ctx) == pytest.approx(ctx.h, abs=1e-8)


def test_unstable_stable_symmetry(inf_curves):
    _, cu, cs = inf_curves
    th = cu.theta
    inside = (-th >= cs.theta[0]) & (-th <= cs.theta[-1])
    assert inside.sum() >= 8
    assert np.allclose(cs.R_of(-th[inside]), -cu.R[inside], atol=1e-7)
    assert np.allclose(cs.Theta_of(-th[inside]), cu.Theta[inside], atol=1e-7)


def test_outer_section_curve_covers_turn():
    ctx = make_context(1e-3, -1.0)
    c = infinity_manifold_curve(ctx, 1.0, "s", section=outer_section(5.0, "R>0"), n=16)
    assert len(c) == 16 and c.theta[-1] - c.theta[0] > 1.5 * math.pi
    # far from the primaries the curve is close to the Kepler graph
    assert np.allclose(c.Theta, 1.0, atol=1e-2)


def test_seed_checks():
    ctx = make_context(1e-4, -1.0)
    with pytest.raises(SeedInvalid):
        infinity_manifold_curve(ctx, 0.5, n=4)
    with pytest.raises(ParameterError):
        infinity_manifold_curve(ctx, 1.0, branch="x", n=4)


def test_g_operator_zero_mode_is_primitive():
    f = GridFourierFunction.from_callable(lambda uu, vv: (1 + uu * uu) ** -1.0 + 0 * vv, U, 1, 8)
    g = g_operator(f)
    for u in (-1e3, -10.0, -1.0):
        got = g_operator_at(f, [u], g)[0, 1].real
        assert got == pytest.approx(math.atan(u) + math.pi / 2, abs=1e-7)
