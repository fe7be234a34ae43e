"""Collision and ejection at the Sun: first-order integral, regularised curves and the Jupiter link."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from . import _kernels as K
from .charts import Chart, PhasePoint, convert, mcgehee_sun_energy, solve_radial_momentum
from .core import DEFAULT_TOLERANCES, EnergyContext, NumericFailure, ParameterError, Tolerances, parallel_map
from .curves import SectionCurve
from .dynamics import NoCrossing, UserEvent, flow, sun_section
from .kepler import LAMBDA
from .localjup import collision_circle

__all__ = ["QuadratureFailure", "SunCurves", "sun_I_integral", "sun_manifold_curve",
           "jupiter_curve_at_sun_section", "sun_window_center", "THETA_STAR", "SEED_RADIUS"]

THETA_STAR = math.asin(1.0 / math.sqrt(3.0)) + math.pi
# rbar of the seed (s = sqrt(rbar) = 1e-4). The regularised energy obeys
# dM/dtau = v M, so a rounding error in M at the seed is amplified by
# delta^2 / SEED_RADIUS on the way out; 1e-8 keeps that below 1e-10.
SEED_RADIUS = 1e-8


class QuadratureFailure(NumericFailure):
    pass


def _check_delta(delta):
    if not 0.0 < delta < 1.0:
        raise ParameterError("delta must lie in (0, 1)")


def sun_window_center(delta: float) -> float:
    """Section angle where the mu = 0 Jupiter-to-Sun ray meets rbar = delta^2."""
    return -math.sqrt(2.0) / 3.0 * (1.0 - delta**3)


def _I_parts(alpha, delta):
    T = math.sqrt(2.0) / 3.0 * delta**3
    lam = LAMBDA

    def near(s):
        c23 = s ** (2.0 / 3.0)
        return c23 * math.sin(alpha - s) / (1.0 + lam * lam * c23 * c23 - 2.0 * lam * c23 * math.cos(alpha - s)) ** 1.5

    # s = sigma^3 turns the s^(-1/3) endpoint singularity into a smooth integrand
    def ray(sig):
        return 3.0 * sig * math.cos(alpha - sig**3)

    a, ea = quad(near, 0.0, T, epsabs=1e-15, epsrel=1e-13, limit=200)
    b, eb = quad(ray, 0.0, T ** (1.0 / 3.0), epsabs=1e-15, epsrel=1e-13, limit=200)
    if not (math.isfinite(a) and math.isfinite(b)) or ea > 1e-10 or eb > 1e-10:
        raise QuadratureFailure("quadrature of the Sun ejection integral did not converge")
    # both integrals run from T down to 0
    return -lam * a, -math.sqrt(2.0 / lam) * b


def sun_I_integral(theta_bar, delta: float):
    """First-order angular momentum (divided by mu) of the Sun ejection manifold on rbar = delta^2."""
    _check_delta(delta)
    shift = math.sqrt(2.0) / 3.0 * delta**3
    th = np.asarray(theta_bar, dtype=float)
    out = np.array([sum(_I_parts(a + shift, delta)) for a in th.ravel()]).reshape(th.shape)
    return out if th.ndim else float(out)


@dataclass
class SunCurves:
    numeric: SectionCurve
    first_order: SectionCurve


def _seed_mcgehee(theta_bar, ctx, sign):
    """Point near the equilibrium circle S+ (sign +1) or S- (sign -1) on the energy level."""
    r = SEED_RADIUS
    u = -sign * r**1.5      # leading-order graph of the manifold, u = -r^{3/2} on the ejection side
    # solve the regularised energy for v
    base = mcgehee_sun_energy(r, theta_bar, 0.0, u, ctx.mu, ctx.h)
    v = sign * math.sqrt(-2.0 * base)
    return PhasePoint(Chart.McGeheeSun, (r, theta_bar, v, u), 0.0)


def _sun_ejection_to_section(theta_bar, ctx, delta, opts):
    p = _seed_mcgehee(theta_bar, ctx, +1.0)
    ev = UserEvent(K.EV_SUN, delta * delta, +1, True)
    traj, hit = flow(p, ctx, math.inf, opts, radii=None, events=(ev,), record=False)
    if hit is None:
        raise NoCrossing("Sun ejection orbit did not reach the section")
    return convert(traj.end, Chart.RotPolarSun, ctx)


def sun_manifold_curve(ctx: EnergyContext, delta: float = 0.1, branch: str = "u", n: int = 128,
                       opts: Tolerances = DEFAULT_TOLERANCES, threads: int | None = None) -> SunCurves:
    """Ejection (u) or collision (s) manifold of the Sun on rbar = delta^2.

    The numeric curve seeds orbits at rbar = SEED_RADIUS on the ejection side of the
    equilibrium circle and integrates the regularised field outward; the
    collision branch follows from the time-reversal symmetry. The first-order
    curve is Theta = mu * I(theta), sampled on the same angles.
    """
    _check_delta(delta)
    if branch not in ("u", "s"):
        raise ParameterError("branch must be 'u' or 's'")
    seeds = -math.pi + 2.0 * math.pi * np.arange(n) / n
    pts = parallel_map(lambda a: _sun_ejection_to_section(a, ctx, delta, opts), seeds, threads)
    theta = np.array([p.x[1] for p in pts])
    R = np.array([p.x[2] for p in pts])
    Th = np.array([p.x[3] for p in pts])
    meta = {"manifold": "sun-ejection", "mu": ctx.mu, "h": ctx.h, "delta": delta}
    num = SectionCurve.from_samples(sun_section(delta, "R>0"), theta, R, Th, meta,
                                    {"seed": seeds})
    fo_theta = num.theta
    fo_Th = ctx.mu * sun_I_integral(fo_theta, delta)
    fo_R = np.array([solve_radial_momentum(Chart.RotPolarSun, delta**2, a, b, ctx, +1)
                     for a, b in zip(fo_theta, fo_Th)])
    fo = SectionCurve(num.section, fo_theta, fo_R, fo_Th, dict(meta, method="first-order"))
    num.meta["method"] = "numeric"
    if branch == "s":
        lab = dict(meta, manifold="sun-collision")
        num = num.reflected(dict(lab, method="numeric"))
        fo = fo.reflected(dict(lab, method="first-order"))
    return SunCurves(num, fo)


def _jupiter_to_sun(beta, ctx, delta, opts, want_traj=False):
    start = collision_circle(beta, ctx).zw
    ev = UserEvent(K.EV_SUN, delta * delta, -1, True)
    guard = UserEvent(K.EV_CM, 3.0, +1, True)
    traj, hit = flow(start, ctx, math.inf, opts, events=(ev, guard), record=want_traj)
    if hit != 0:
        raise NoCrossing("ejection orbit left the inner region before reaching the Sun section")
    p = convert(traj.end, Chart.RotPolarSun, ctx)
    return (p, traj) if want_traj else p


def jupiter_curve_at_sun_section(ctx: EnergyContext, delta: float = 0.1, gamma: float = 0.3,
                                 branch: str = "ejection", n: int = 64,
                                 opts: Tolerances = DEFAULT_TOLERANCES,
                                 threads: int | None = None) -> SectionCurve:
    """Jupiter ejection orbits continued by the flow to rbar = delta^2 with Rbar < 0.

    The collision-circle parameter window is chosen so that the image covers
    the angle window (theta0 - delta^4, theta0 + delta^4), theta0 =
    -(sqrt2/3)(1 - delta^3). Branch ``collision`` is the mirror image on the
    R > 0 side. Extras: ``beta`` and ``t`` (flight time from Jupiter).
    """
    _check_delta(delta)
    if not 3.0 / 11.0 < gamma <= 1.0 / 3.0:
        from .core import Unsupported
        raise Unsupported(f"gamma = {gamma} outside (3/11, 1/3]")
    if branch not in ("ejection", "collision"):
        raise ParameterError("branch must be 'ejection' or 'collision'")
    th0 = sun_window_center(delta)
    w = delta**4

    def th_of(b):
        return _jupiter_to_sun(b, ctx, delta, opts).x[1]

    # secant for the circle angle whose image sits at th0, started from the mu = 0 value
    b0 = 0.5 * THETA_STAR - math.pi
    b1 = b0 + 1e-3
    f0, f1 = th_of(b0) - th0, th_of(b1) - th0
    for _ in range(40):
        if f1 == f0:
            break
        b2 = b1 - f1 * (b1 - b0) / (f1 - f0)
        b0, f0 = b1, f1
        b1, f1 = b2, th_of(b2) - th0
        if abs(f1) < 1e-3 * w:
            break
    if not abs(f1) < 0.1 * w:
        raise NoCrossing("could not place the Jupiter window onto the Sun section window")
    slope = (f1 - f0) / (b1 - b0) if b1 != b0 else 1.0
    half = 1.1 * w / abs(slope)
    betas = b1 + np.linspace(-half, half, n)
    pts = parallel_map(lambda b: _jupiter_to_sun(b, ctx, delta, opts), betas, threads)
    theta = np.array([p.x[1] for p in pts])
    R = np.array([p.x[2] for p in pts])
    Th = np.array([p.x[3] for p in pts])
    t = np.array([p.t for p in pts])
    meta = {"manifold": "jupiter-ejection-extended", "mu": ctx.mu, "h": ctx.h,
            "delta": delta, "gamma": gamma, "theta0": th0}
    curve = SectionCurve.from_samples(sun_section(delta, "R<0"), theta, R, Th, meta,
                                      {"beta": betas, "t": t})
    if branch == "collision":
        curve = curve.reflected(dict(meta, manifold="jupiter-collision-extended"))
    return curve
