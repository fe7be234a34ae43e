import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from nearcol import make_context
from nearcol.charts import (Chart, PhasePoint, convert, coordinate_error, energy, reflect,
                            solve_radial_momentum)
from nearcol.core import ParameterError, Tolerances
from nearcol.dynamics import (SectionSpec, Unsupported, flow, integrate, integrate_to_section,
                              jupiter_section, outer_section, sun_section, time_rate)

CTX = make_context(1e-3, -1.0)
TIGHT = Tolerances(abs_tol=1e-13, rel_tol=1e-13)


def _scipy_rotating(y0, t1, mu):
    """Rotating-frame equations in centre-of-mass Cartesian coordinates, written out directly."""
    def rhs(t, y):
        q1, q2, p1, p2 = y
        r1 = math.hypot(q1 + mu, q2) ** 3
        r2 = math.hypot(q1 - 1 + mu, q2) ** 3
        return [p1 + q2, p2 - q1,
                p2 - (1 - mu) * (q1 + mu) / r1 - mu * (q1 - 1 + mu) / r2,
                -p1 - (1 - mu) * q2 / r1 - mu * q2 / r2]

    return solve_ivp(rhs, (0, t1), y0, method="DOP853", rtol=1e-13, atol=1e-13).y[:, -1]


def test_matches_independent_integration_away_from_primaries():
    p = PhasePoint(Chart.RotCartCM, (0.0, 2.0, -1.9, 0.0))
    end = integrate(p, CTX, 6.0, TIGHT, radii=None).end
    ref = _scipy_rotating(list(p.x), 6.0, CTX.mu)
    assert np.allclose(end.x, ref, rtol=1e-9, atol=1e-9)
    assert end.t == pytest.approx(6.0, abs=1e-12)


def test_kepler_integrals_at_zero_mass():
    ctx = make_context(0.0, -1.0)
    p = PhasePoint(Chart.RotPolarCM, (1.3, 0.4, 0.2, 0.9))
    traj = integrate(p, ctx, 25.0, TIGHT)
    end = convert(traj.end, Chart.RotPolarCM, ctx)
    E0 = 0.5 * (0.2**2 + 0.9**2 / 1.3**2) - 1 / 1.3
    r, _, R, Th = end.x
    assert Th == pytest.approx(0.9, abs=1e-10)
    assert 0.5 * (R * R + Th * Th / r**2) - 1 / r == pytest.approx(E0, abs=1e-10)


def test_jupiter_passage_is_regularised():
    # a near-collision orbit crosses the Levi-Civita region and conserves energy
    R = solve_radial_momentum(Chart.RotPolarJup, 0.05, 0.0, 1e-6, CTX, -1.0)
    start = PhasePoint(Chart.RotPolarJup, (0.05, 0.0, R, 1e-6))
    traj = integrate(start, CTX, 0.05)
    assert Chart.LeviCivita in {s.chart for s in traj.segments}
    assert traj.drift < 1e-9
    assert energy(convert(traj.end, Chart.RotCartCM, CTX), CTX) == pytest.approx(CTX.h, abs=1e-9)


def test_levi_civita_time_rate():
    p = PhasePoint(Chart.LeviCivita, (0.1, 0.2, 0.3, 0.4))
    assert time_rate(p, CTX) == pytest.approx(4 * CTX.xi * 0.05, rel=1e-15)


@pytest.mark.parametrize("T", [3.0, 7.5])
def test_reversibility(T):
    p = PhasePoint(Chart.RotPolarCM, (1.7, 0.3, 0.1, 1.2), 0.0)
    fwd = integrate(p, CTX, T, TIGHT).end
    back = integrate(reflect(convert(fwd, Chart.RotPolarCM, CTX)), CTX, T, TIGHT).end
    back = reflect(convert(back, Chart.RotPolarCM, CTX))
    assert coordinate_error(back, p) < 1e-9
    assert back.t == pytest.approx(0.0, abs=1e-9)


def test_backward_integration_inverts_forward():
    p = PhasePoint(Chart.RotCartCM, (0.0, 2.0, -1.9, 0.0))
    fwd = integrate(p, CTX, 4.0, TIGHT).end
    back, _ = flow(fwd, CTX, 0.0, TIGHT)
    assert coordinate_error(convert(back.end, Chart.RotCartCM, CTX), p) < 1e-10


def test_section_crossing_lands_on_circle():
    p = PhasePoint(Chart.RotPolarCM, (2.0, 0.0, 0.5, 1.2))
    q, dt = integrate_to_section(p, CTX, outer_section(3.0, "R>0"))
    assert q.chart == Chart.RotPolarCM
    assert q.x[0] == pytest.approx(3.0, abs=1e-10)
    assert q.x[2] > 0 and dt > 0


def test_wrong_direction_rejected():
    p = PhasePoint(Chart.RotCartCM, (0.0, 2.0, -1.9, 0.0), 5.0)
    with pytest.raises(ParameterError):
        flow(p, CTX, 1.0, backward=False)


def test_section_validation():
    with pytest.raises(Unsupported):
        jupiter_section(0.2, "R>0")
    with pytest.raises(ParameterError):
        sun_section(1.5, "R>0")
    with pytest.raises(ParameterError):
        SectionSpec("Nowhere", "R>0", 1.0)
    assert jupiter_section(0.3, "R<0").radius(1e-3) == pytest.approx(1e-3**0.3)
