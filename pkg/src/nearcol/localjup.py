"""Collision circle at Jupiter, ejection/collision curves and the passage map."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .charts import Chart, PhasePoint, convert, convert_state, lc_hamiltonian
from .core import (DEFAULT_TOLERANCES, EnergyContext, NumericFailure, ParameterError,
                   Tolerances, Unsupported, parallel_map)
from .curves import NonGraph, SectionCurve
from .dynamics import (NoCrossing, SectionSpec, StepBudgetExceeded, UserEvent, flow,
                       jupiter_section)

__all__ = ["CollisionCirclePoint", "collision_circle", "jupiter_manifold_curve",
           "tau_lin_oracle", "transition_map", "transition_map_su", "SectionCurve",
           "NonGraph", "NoReturn", "solve_R_jupiter"]


class NoReturn(NumericFailure):
    pass


@dataclass(frozen=True)
class CollisionCirclePoint:
    beta: float
    zw: PhasePoint


def _check_gamma(gamma: float) -> None:
    if not (3.0 / 11.0 < gamma <= 1.0 / 3.0):
        raise Unsupported(f"gamma = {gamma} outside (3/11, 1/3]")


def collision_circle(beta: float, ctx: EnergyContext) -> CollisionCirclePoint:
    """Point z = 0, w = xi sqrt(mu) (cos beta, sin beta) of the regularised collision set."""
    a = ctx.xi * math.sqrt(ctx.mu)
    return CollisionCirclePoint(beta, PhasePoint(Chart.LeviCivita,
                                                 (0.0, 0.0, a * math.cos(beta), a * math.sin(beta)), 0.0))


def tau_lin_oracle(beta: float, ctx: EnergyContext, gamma: float) -> float:
    """Regularised time for the linear saddle flow to reach |q| = mu**gamma from the circle."""
    return math.asinh(ctx.mu ** ((gamma - 1.0) / 2.0) / (math.sqrt(2.0) * ctx.xi))


def solve_R_jupiter(r, theta, Theta, ctx: EnergyContext, sign: float):
    """Radial momentum on the energy level in Jupiter polar coordinates."""
    mu = ctx.mu
    a = 1.0 - mu
    rho = np.sqrt(r * r + 2.0 * r * np.cos(theta) + 1.0)
    U = a * r * np.cos(theta) + a / rho + mu / r
    R2 = 2.0 * (ctx.h + Theta + U + 0.5 * a * a) - Theta * Theta / (r * r)
    if np.any(R2 < 0):
        raise ParameterError("no real radial momentum at this point of the section")
    return sign * np.sqrt(R2)


def _radius_event(ctx, gamma, phys_dir):
    return UserEvent(K.EV_JUP, ctx.mu**gamma, phys_dir, True)


def _circle_to_section(beta, ctx, gamma, branch, opts):
    start = collision_circle(beta, ctx).zw
    if branch == "ejection":
        t_end, ev = math.inf, _radius_event(ctx, gamma, +1)
    else:
        t_end, ev = -math.inf, _radius_event(ctx, gamma, -1)
    traj, hit = flow(start, ctx, t_end, opts, radii=None, events=(ev,), record=False,
                     backward=(branch != "ejection"))
    if hit is None:
        raise NoCrossing("collision-circle orbit did not reach the section")
    end = traj.end
    tau = traj.rescale_log[-1][1]
    return end, tau


def jupiter_manifold_curve(ctx: EnergyContext, gamma: float = 0.3, branch: str = "ejection",
                           n: int = 256, beta=None, opts: Tolerances = DEFAULT_TOLERANCES,
                           threads: int | None = None) -> SectionCurve:
    """Ejection (forward) or collision (backward) orbits from the collision circle on |q| = mu**gamma.

    ``beta`` defaults to n uniform angles in [-pi/2, pi/2); since beta and
    beta + pi describe the same physical orbit this covers the circle once.
    Extra arrays: ``beta``, ``tau`` (regularised time) and ``t`` (physical time).
    """
    _check_gamma(gamma)
    if branch not in ("ejection", "collision"):
        raise ParameterError("branch must be 'ejection' or 'collision'")
    if not ctx.mu > 0:
        raise ParameterError("the collision circle needs mu > 0")
    if beta is None:
        beta = -0.5 * math.pi + math.pi * np.arange(n) / n
    beta = np.asarray(beta, dtype=float)
    results = parallel_map(lambda b: _circle_to_section(b, ctx, gamma, branch, opts), beta, threads)
    theta, R, Th, tau, t = [], [], [], [], []
    for end, ta in results:
        pol = convert(end, Chart.RotPolarJup, ctx)
        theta.append(pol.x[1])
        R.append(pol.x[2])
        Th.append(pol.x[3])
        tau.append(ta)
        t.append(end.t)
    sign = "R>0" if branch == "ejection" else "R<0"
    meta = {"manifold": "jupiter-" + branch, "mu": ctx.mu, "h": ctx.h, "gamma": gamma}
    return SectionCurve.from_samples(jupiter_section(gamma, sign), theta, R, Th, meta,
                                     {"beta": beta, "tau": np.array(tau), "t": np.array(t)})


def transition_map(p_in: PhasePoint, ctx: EnergyContext, gamma: float = 0.3,
                   opts: Tolerances = DEFAULT_TOLERANCES) -> PhasePoint:
    """Follow an incoming point of |q| = mu**gamma through the collision region.

    The passage is integrated in Levi-Civita variables (regular at z = 0)
    until the orbit crosses the same circle outward. Returns a Jupiter polar
    point whose time stamp advanced by the physical passage time.
    """
    _check_gamma(gamma)
    zw = p_in if p_in.chart == Chart.LeviCivita else convert(p_in, Chart.LeviCivita, ctx, branch="upper")
    out_ev = _radius_event(ctx, gamma, +1)
    guard = UserEvent(K.EV_JUP, 2.0 * ctx.mu**gamma, +1, True)
    try:
        traj, hit = flow(zw, ctx, math.inf, opts, radii=None, events=(out_ev, guard), record=False)
    except StepBudgetExceeded as exc:
        raise NoReturn("no outward crossing within the step budget") from exc
    if hit != 0:
        raise NoReturn("orbit left the collision neighbourhood without re-crossing")
    return convert(traj.end, Chart.RotPolarJup, ctx)


def transition_map_su(s_in, u_in, ctx: EnergyContext, opts: Tolerances = DEFAULT_TOLERANCES):
    """Passage from |s| = eps to |u| = eps in linear-order straightened variables, eps = |s_in|.

    Returns (s_out, u_out, tau). The leading-order prediction for the output
    is ((|u_in|/eps) s_in, eps u_in/|u_in|).
    """
    s_in = np.asarray(s_in, dtype=float)
    u_in = np.asarray(u_in, dtype=float)
    eps = float(np.hypot(*s_in))
    if np.hypot(*u_in) > eps:
        raise ParameterError("entry point must satisfy |u| <= |s|")
    zw = convert_state((s_in[0], s_in[1], u_in[0], u_in[1]), Chart.StraightenedLC,
                       Chart.LeviCivita, ctx)
    start = PhasePoint(Chart.LeviCivita, zw, 0.0)
    ev = UserEvent(K.EV_LC_UNSTABLE, eps * eps, 0, True)
    traj, hit = flow(start, ctx, math.inf, opts, radii=None, events=(ev,), record=False)
    if hit is None:
        raise NoReturn("did not reach |u| = eps")
    y = traj.end.x
    su = convert_state(y, Chart.LeviCivita, Chart.StraightenedLC, ctx)
    return np.array(su[:2]), np.array(su[2:]), traj.rescale_log[-1][1]


def lc_energy(p: PhasePoint, ctx: EnergyContext) -> float:
    zw = p if p.chart == Chart.LeviCivita else convert(p, Chart.LeviCivita, ctx, branch="upper")
    return float(lc_hamiltonian(*zw.x, ctx.mu, ctx.xi))
