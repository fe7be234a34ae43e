import math

import pytest

from nearcol import make_context
from nearcol.charts import Chart, PhasePoint, convert, reflect, solve_radial_momentum
from nearcol.classify import MotionTag, Thresholds, classify_final_motion, terminal_speed
from nearcol.cli import kepler_ensemble
from nearcol.core import ParameterError
from nearcol.kepler import ConicClass, classify_conic

EXPECTED = {ConicClass.ELLIPTIC: MotionTag.BOUNDED, ConicClass.HYPERBOLIC: MotionTag.HYPERBOLIC,
            ConicClass.PARABOLIC: MotionTag.PARABOLIC}


def _on_unit_circle(ctx, theta, Theta, sign=1.0):
    R = solve_radial_momentum(Chart.RotPolarCM, 1.0, theta, Theta, ctx, sign)
    return PhasePoint(Chart.RotPolarCM, (1.0, theta, R, Theta), 0.0)


@pytest.mark.slow
def test_zero_mass_agreement_with_conic_table():
    data = kepler_ensemble(1000, 0)
    misses = []
    for h, th, Th in data:
        ctx = make_context(0.0, h)
        tag = classify_final_motion(_on_unit_circle(ctx, th, Th), ctx, horizon=1e3).tag
        if tag != EXPECTED[classify_conic(h, Th)]:
            misses.append((h, Th))
    assert len(misses) <= 10
    assert all(abs(Th + h) < 1e-3 for h, Th in misses)


def test_terminal_speed_sign():
    ctx = make_context(0.0, -1.0)
    p = PhasePoint(Chart.RotPolarCM, (1.0, 0.0, 0.0, 1.0))
    # circular orbit: E = -1/2
    assert terminal_speed(p, ctx) == pytest.approx(-1.0)
    q = PhasePoint(Chart.RotPolarCM, (1.0, 0.0, math.sqrt(2.0), 0.0))
    assert abs(terminal_speed(q, ctx)) < 1e-7  # sqrt of a rounding-level energy


def test_hyperbolic_escape():
    ctx = make_context(1e-3, 1.0)
    m = classify_final_motion(_on_unit_circle(ctx, 2.0, 0.2), ctx)
    assert m.tag == MotionTag.HYPERBOLIC
    assert m.terminal_speed >= Thresholds().c_min


def test_sun_collision():
    ctx = make_context(0.0, -1.0)
    p = _on_unit_circle(ctx, 0.5, 0.0, -1.0)
    m = classify_final_motion(p, ctx)
    assert m.tag == MotionTag.COLLISION_S
    assert m.r_min < 1e-2


def test_ec_orbit_interior_collides_both_ways(jj_orbits):
    orb = jj_orbits[0]
    ctx = make_context(orb.mu, orb.h)
    pts = orb.trajectory.points
    mid = convert(pts[len(pts) // 2], Chart.RotCartCM, ctx)
    for direction in ("forward", "backward"):
        m = classify_final_motion(mid, ctx, direction, horizon=2e3)
        assert m.tag == MotionTag.COLLISION_J, direction


@pytest.mark.parametrize("theta,Theta", [(0.3, 0.8), (2.0, 1.3), (-1.0, 0.6)])
def test_direction_symmetry(theta, Theta):
    ctx = make_context(1e-3, -0.5)
    p = _on_unit_circle(ctx, theta, Theta)
    fwd = classify_final_motion(reflect(p), ctx, "forward", horizon=2e3)
    back = classify_final_motion(p, ctx, "backward", horizon=2e3)
    assert fwd.tag == back.tag
    assert fwd.r_max == pytest.approx(back.r_max, rel=1e-6)


def test_oscillatory_is_evidence_only():
    # a long Kepler ellipse leaves R_box twice within the horizon
    ctx = make_context(0.0, 0.9191332787937141)
    m = classify_final_motion(_on_unit_circle(ctx, 0.3, -0.9236965628790699), ctx)
    assert m.tag == MotionTag.OSCILLATORY
    assert m.excursions >= 2 and m.to_json()["oscillatory_is_evidence_only"]


def test_parameter_checks():
    ctx = make_context(0.0, -1.0)
    p = PhasePoint(Chart.RotPolarCM, (1.0, 0.0, 0.0, 1.0))
    with pytest.raises(ParameterError):
        classify_final_motion(p, ctx, horizon=0.0)
    with pytest.raises(ParameterError):
        classify_final_motion(p, ctx, direction="sideways")
