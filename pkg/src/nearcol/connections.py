"""Distances between section curves, transverse zeros, the outer return map and
searches for ejection-collision orbits."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from . import _kernels as K
from .charts import Chart, PhasePoint, convert, reflect, solve_radial_momentum
from .core import (DEFAULT_TOLERANCES, EnergyContext, NumericFailure, ParameterError,
                   Tolerances, angle_diff, make_context, parallel_map, wrap_angle)
from .curves import SectionCurve
from .dynamics import (NoCrossing, SectionSpec, StepBudgetExceeded, Trajectory, UserEvent,
                       flow, flow_to_section, outer_section)
from .infinity import NoConvergence, infinity_manifold_curve
from .localjup import collision_circle, jupiter_manifold_curve, solve_R_jupiter, transition_map
from .localsun import (SEED_RADIUS, _jupiter_to_sun, _seed_mcgehee, _sun_ejection_to_section,
                       jupiter_curve_at_sun_section, sun_manifold_curve, sun_window_center)

__all__ = ["NoOverlap", "NoSignChange", "DegenerateZero", "OrderingViolated", "Escape",
           "NoneFound", "NoConvergence", "DistanceCurve", "TransverseZero", "distance_curve",
           "find_transverse_zero", "predicted_root", "stable_ejection_root",
           "unstable_collision_root", "TripleIntersection", "solve_triple_intersection",
           "OuterReturn", "outer_poincare", "OUTER_TOLERANCES", "ECOrbit", "find_ec_orbits",
           "reversibility_residual", "pair_by_reversibility",
           "find_ballistic_ec", "SpiralEvidence", "spiral_evidence", "R0_DEFAULT"]

R0_DEFAULT = 5.0
# the outer map steps at most 2 time units far away, and orbits 1e-5 below the
# stable curve need ~7e7 time units to come back
OUTER_TOLERANCES = Tolerances(max_steps=100_000_000)


class NoOverlap(ParameterError):
    pass


class NoSignChange(NumericFailure):
    pass


class DegenerateZero(NumericFailure):
    pass


class OrderingViolated(NumericFailure):
    def __init__(self, msg, result=None):
        super().__init__(msg)
        self.result = result


class Escape(NumericFailure):
    pass


class NoneFound(NumericFailure):
    pass


# --------------------------------------------------------------------------
# distance curves and zeros


@dataclass
class DistanceCurve:
    """d(theta) = Theta_A(theta) - Theta_B(theta) on the common theta range."""

    theta: np.ndarray
    d: np.ndarray
    dd: np.ndarray
    lo: float
    hi: float
    A: SectionCurve | None = None
    B: SectionCurve | None = None
    _fn: object = field(default=None, repr=False)
    _dfn: object = field(default=None, repr=False)

    def __call__(self, theta):
        return self._fn(theta)

    def derivative(self, theta):
        return self._dfn(theta)

    @classmethod
    def from_function(cls, fn, lo, hi, n=513, dfn=None):
        th = np.linspace(lo, hi, n)
        if dfn is None:
            eps = 1e-6 * max(1.0, hi - lo)

            def dfn(x):
                return (np.asarray(fn(np.asarray(x) + eps)) - np.asarray(fn(np.asarray(x) - eps))) / (2 * eps)
        d = np.array([float(fn(t)) for t in th])
        dd = np.array([float(dfn(t)) for t in th])
        return cls(th, d, dd, lo, hi, None, None, fn, dfn)


def distance_curve(A: SectionCurve, B: SectionCurve) -> DistanceCurve:
    """Difference of the angular momenta of two curves on the same section.

    B may be shifted by a multiple of 2 pi to find the largest overlap.
    """
    if (A.section.kind, A.section.sign, A.section.param) != (B.section.kind, B.section.sign,
                                                               B.section.param):
        raise NoOverlap("curves live on different sections")
    best = None
    for k in (-1, 0, 1):
        lo = max(A.theta[0], B.theta[0] + 2 * math.pi * k)
        hi = min(A.theta[-1], B.theta[-1] + 2 * math.pi * k)
        if hi > lo and (best is None or hi - lo > best[1] - best[0]):
            best = (lo, hi, k)
    if best is None:
        raise NoOverlap("the theta ranges do not overlap")
    lo, hi, k = best
    Bk = B.wrap_shift(k) if k else B
    grid = np.union1d(A.theta[(A.theta >= lo) & (A.theta <= hi)],
                      Bk.theta[(Bk.theta >= lo) & (Bk.theta <= hi)])
    grid = np.union1d(grid, [lo, hi])
    iA, iB = A._interp()[1], Bk._interp()[1]
    dA, dB = iA.derivative(), iB.derivative()

    def fn(th):
        return iA(th) - iB(th)

    def dfn(th):
        return dA(th) - dB(th)

    return DistanceCurve(grid, fn(grid), dfn(grid), float(lo), float(hi), A, Bk, fn, dfn)


@dataclass
class TransverseZero:
    theta_star: float
    d_prime: float
    residual: float
    curves: tuple = ()

    def to_json(self) -> dict:
        out = {"theta_star": self.theta_star, "d_prime": self.d_prime, "residual": self.residual}
        if self.curves:
            out["curves"] = [c.meta for c in self.curves if c is not None]
        return out


def find_transverse_zero(d: DistanceCurve, root_tol: float = 1e-12, lo=None, hi=None):
    """Zeros of a distance curve: bracketing on the sample grid, Brent, one Newton polish.

    Returns a single TransverseZero, or a list ordered by theta when there
    are several.
    """
    lo = d.lo if lo is None else max(lo, d.lo)
    hi = d.hi if hi is None else min(hi, d.hi)
    m = (d.theta >= lo) & (d.theta <= hi)
    th = d.theta[m]
    g = np.asarray(d(th), dtype=float)
    zeros = []
    for i in range(len(th) - 1):
        a, b = th[i], th[i + 1]
        ga, gb = g[i], g[i + 1]
        if not (np.isfinite(ga) and np.isfinite(gb)):
            continue
        if ga == 0.0:
            root = a
        elif ga * gb < 0:
            root = brentq(lambda x: float(d(x)), a, b, xtol=1e-15, rtol=1e-15, maxiter=200)
        else:
            continue
        dp = float(d.derivative(root))
        if dp != 0.0:
            cand = root - float(d(root)) / dp
            if a <= cand <= b and abs(float(d(cand))) <= abs(float(d(root))):
                root = cand
        res = abs(float(d(root)))
        if not res < root_tol:
            raise NumericFailure(f"zero at {root:.6g} has residual {res:.3e}")
        dp = float(d.derivative(root))
        if not abs(dp) > 10.0 * root_tol:
            raise DegenerateZero(f"|d'| = {abs(dp):.3e} at theta = {root:.6g}")
        zeros.append(TransverseZero(float(root), dp, res, (d.A, d.B)))
    if len(th) and g[-1] == 0.0:
        dp = float(d.derivative(th[-1]))
        if abs(dp) > 10.0 * root_tol:
            zeros.append(TransverseZero(float(th[-1]), dp, 0.0, (d.A, d.B)))
    if not zeros:
        raise NoSignChange("the distance does not change sign on the range")
    zeros.sort(key=lambda z: z.theta_star)
    return zeros[0] if len(zeros) == 1 else zeros


def _nearest(zeros, target):
    if isinstance(zeros, TransverseZero):
        return zeros
    return min(zeros, key=lambda z: abs(z.theta_star - target))


def predicted_root(Theta0: float) -> float:
    """Leading-order zero of the stable-ejection distance on the Jupiter section."""
    return math.atan2(Theta0 - 1.0, math.sqrt(2.0 - Theta0 * Theta0))


def _root_pair(ctx, Theta0, nu, which, n_inf, n_jup, opts, threads):
    if which == "minus":
        inf = infinity_manifold_curve(ctx, Theta0, "s", n=n_inf, nu=nu, opts=opts, threads=threads)
        jup = jupiter_manifold_curve(ctx, nu, "ejection", n=n_jup, opts=opts, threads=threads)
        target = predicted_root(Theta0)
    else:
        inf = infinity_manifold_curve(ctx, Theta0, "u", n=n_inf, nu=nu, opts=opts, threads=threads)
        jup = jupiter_manifold_curve(ctx, nu, "collision", n=n_jup, opts=opts, threads=threads)
        target = -predicted_root(Theta0)
    d = distance_curve(inf, jup)
    return _nearest(find_transverse_zero(d), target), inf, jup


def stable_ejection_root(mu: float, Theta0: float, nu: float = 0.3, n_inf: int = 64,
                         n_jup: int = 256, opts: Tolerances = DEFAULT_TOLERANCES,
                         threads: int | None = None) -> TransverseZero:
    """Zero of Theta_inf^s - Theta_J^- on the outbound Jupiter section at h = -Theta0."""
    ctx = make_context(mu, -Theta0)
    return _root_pair(ctx, Theta0, nu, "minus", n_inf, n_jup, opts, threads)[0]


def unstable_collision_root(mu: float, Theta0: float, nu: float = 0.3, n_inf: int = 64,
                            n_jup: int = 256, opts: Tolerances = DEFAULT_TOLERANCES,
                            threads: int | None = None) -> TransverseZero:
    """Zero of Theta_inf^u - Theta_J^+ on the inbound Jupiter section at h = -Theta0."""
    ctx = make_context(mu, -Theta0)
    return _root_pair(ctx, Theta0, nu, "plus", n_inf, n_jup, opts, threads)[0]


# --------------------------------------------------------------------------
# triple intersection


@dataclass
class TripleIntersection:
    mu: float
    nu: float
    Theta0_star: float
    theta_minus: float
    p_minus: PhasePoint
    A: float
    B: float
    sinA: float
    sinB: float
    slopes: dict
    ordering_ok: bool
    residual: float
    iterations: int
    history: list

    def to_json(self) -> dict:
        return {"mu": self.mu, "nu": self.nu, "Theta0_star": self.Theta0_star,
                "theta_minus": self.theta_minus, "p_minus": list(self.p_minus.x),
                "A": self.A, "B": self.B, "sinA": self.sinA, "sinB": self.sinB,
                "slopes": self.slopes, "ordering_ok": self.ordering_ok,
                "residual": self.residual, "iterations": self.iterations,
                "history": [list(h) for h in self.history]}


def _triple_residual(mu, nu, Theta0, n_inf, n_jup, opts, threads):
    ctx = make_context(mu, -Theta0)
    zp, cu, cjp = _root_pair(ctx, Theta0, nu, "plus", n_inf, n_jup, opts, threads)
    zm, cs, cjm = _root_pair(ctx, Theta0, nu, "minus", n_inf, n_jup, opts, threads)
    th_p = zp.theta_star
    p_plus = _jupiter_point(ctx, nu, th_p, float(cu.Theta_of(th_p)), -1.0)
    out = transition_map(p_plus, ctx, nu, opts)
    th_mu = float(out.x[1])
    g = float(angle_diff(th_mu, zm.theta_star))
    return g, dict(ctx=ctx, zp=zp, zm=zm, cu=cu, cs=cs, cjm=cjm, p_plus=p_plus, out=out)


def _jupiter_point(ctx, gamma, theta, Theta, sign):
    r = ctx.mu**gamma
    R = float(solve_R_jupiter(r, theta, Theta, ctx, sign))
    return PhasePoint(Chart.RotPolarJup, (r, theta, R, Theta), 0.0)


def _image_slope(info, nu, opts, span=2e-3):
    """Slope at p_- of the image of Lambda_inf^u (near theta_+) under the passage map.

    The passage expands the inbound angle strongly near the collision curve,
    so the input spacing is chosen from a first difference to make the
    images span about ``span`` in theta around theta_-.
    """
    ctx, cu, th_p = info["ctx"], info["cu"], info["zp"].theta_star
    th_m = info["zm"].theta_star

    def images(th_in):
        pts = [transition_map(_jupiter_point(ctx, nu, a, float(cu.Theta_of(a)), -1.0), ctx, nu, opts)
               for a in th_in]
        th = th_m + np.asarray(angle_diff([p.x[1] for p in pts], th_m))
        return th, np.array([p.x[3] for p in pts])

    h0 = 1e-9
    th0, _ = images([th_p - h0, th_p + h0])
    gain = abs(th0[1] - th0[0]) / (2 * h0)
    h = 0.5 * span / max(gain, 1.0)
    th_out, Th_out = images(th_p + h * np.arange(-2, 3))
    coef = np.polyfit(th_out - th_m, Th_out, 2)
    return float(coef[1])


def solve_triple_intersection(mu: float, nu: float = 0.3, Theta0_init: float = 1.0,
                              dTheta0: float = 1e-4, tol: float = 1e-10, max_iter: int = 20,
                              n_inf: int = 64, n_jup: int = 256,
                              opts: Tolerances = DEFAULT_TOLERANCES,
                              threads: int | None = None) -> TripleIntersection:
    """Theta0 where the passage image of Lambda_inf^u meets Lambda_inf^s and Lambda_J^-.

    Each iterate rebuilds the four curves at h = -Theta0, pushes the inbound
    zero through the collision region and compares the outgoing angle with
    the outbound zero; the update is a Newton step with a forward-difference
    derivative over ``dTheta0``.
    """
    if not 3.0 / 11.0 < nu < 1.0 / 3.0 + 1e-15:
        raise ParameterError("nu must lie in (3/11, 1/3]")
    x = Theta0_init
    history = []
    info = None
    for it in range(1, max_iter + 1):
        g, info = _triple_residual(mu, nu, x, n_inf, n_jup, opts, threads)
        history.append((x, g))
        if abs(g) < tol:
            break
        g2, _ = _triple_residual(mu, nu, x + dTheta0, n_inf, n_jup, opts, threads)
        slope = (g2 - g) / dTheta0
        if slope == 0.0:
            raise NoConvergence("flat residual in the Theta0 iteration")
        step = -g / slope
        step = max(-0.05, min(0.05, step))
        x = x + step
        if abs(step) < 1e-13:
            g, info = _triple_residual(mu, nu, x, n_inf, n_jup, opts, threads)
            history.append((x, g))
            break
    else:
        raise NoConvergence(f"no convergence in {max_iter} iterations, last residual {g:.3e}")
    if not abs(g) < max(tol, 1e-8):
        raise NoConvergence(f"residual {g:.3e} after {len(history)} evaluations")

    th_m = info["zm"].theta_star
    s_s = float(info["cs"].dTheta(th_m))
    s_j = float(info["cjm"].dTheta(th_m))
    s_u = _image_slope(info, nu, opts)
    norm = math.sqrt((1 + s_s**2) * (1 + s_u**2))
    sinA = (s_s - s_u) / norm
    sinB = (s_j - s_u) / math.sqrt((1 + s_j**2) * (1 + s_u**2))
    A, B = math.asin(sinA), math.asin(sinB)
    ctx = info["ctx"]
    p_minus = _jupiter_point(ctx, nu, th_m, float(info["cjm"].Theta_of(th_m)), +1.0)
    res = TripleIntersection(mu, nu, x, th_m, p_minus, A, B, sinA, sinB,
                             {"stable": s_s, "ejection": s_j, "unstable_image": s_u},
                             bool(-math.pi / 2 < A < B < 0), abs(g), len(history), history)
    if not res.ordering_ok:
        raise OrderingViolated(f"angles A = {A:.4g}, B = {B:.4g} violate -pi/2 < A < B < 0", res)
    return res


# --------------------------------------------------------------------------
# outer return map


@dataclass
class OuterReturn:
    point: PhasePoint          # RotPolarCM on the inbound section
    elapsed: float
    apoapsis: float
    kepler_energy: float
    trajectory: Trajectory | None = None


def _kepler_energy(p: PhasePoint, ctx: EnergyContext) -> float:
    r, _, R, Th = convert(p, Chart.RotPolarCM, ctx).x
    return 0.5 * R * R + 0.5 * Th * Th / (r * r) - 1.0 / r


def _append(total: Trajectory, part: Trajectory) -> None:
    total.segments.extend(part.segments)
    total.switches.extend(part.switches)
    total.rescale_log.extend(part.rescale_log)
    total.events.extend(part.events)
    total.drift = max(total.drift, part.drift)
    total.steps += part.steps


def outer_poincare(p: PhasePoint, ctx: EnergyContext, r0: float | None = None,
                   opts: Tolerances = OUTER_TOLERANCES, t_max: float = math.inf,
                   energy_floor: float = 1e-8, record: bool = False) -> OuterReturn:
    """Return map from the outbound to the inbound crossing of |q| = r0.

    The orbit is followed to a check radius; if its osculating Kepler energy
    there is above ``-energy_floor`` (hyperbolic or practically parabolic), or
    the predicted return exceeds ``t_max``, Escape is raised. Apoapsis is the
    largest radius at which the radial momentum changes sign.
    """
    pc = convert(p, Chart.RotPolarCM, ctx)
    if r0 is None:
        r0 = pc.x[0]
    if abs(pc.x[0] - r0) > 1e-9 * r0 or not pc.x[2] > 0:
        raise ParameterError("start point must lie on the outbound section |q| = r0")
    r_chk = max(50.0, 10.0 * r0)
    inbound = UserEvent(K.EV_CM, r0, -1, True)
    apo = UserEvent(K.EV_RADVEL_CM, 0.0, -1, False)
    far = UserEvent(K.EV_CM, r_chk, +1, True)
    total = Trajectory()
    traj, hit = flow(pc, ctx, math.inf, opts, events=(inbound, apo, far), record=record)
    _append(total, traj)
    if hit == 2:
        E = _kepler_energy(traj.end, ctx)
        if E > -energy_floor:
            raise Escape(f"osculating Kepler energy {E:.3e} at r = {r_chk:g}: no return")
        if 2.0 * math.pi * (-2.0 * E) ** -1.5 > t_max - (traj.end.t - pc.t):
            raise Escape("predicted return time exceeds t_max")
        left = opts.max_steps - traj.steps
        o2 = Tolerances(opts.abs_tol, opts.rel_tol, opts.event_tol, opts.root_tol, max(left, 1))
        traj, hit = flow(traj.end, ctx, math.inf, o2, events=(inbound, apo), record=record)
        _append(total, traj)
    if hit != 0:
        raise NoCrossing("no inbound crossing of the outer section")
    radii = [convert(q, Chart.RotPolarCM, ctx).x[0] for j, q in total.events if j == 1]
    end = convert(traj.end, Chart.RotPolarCM, ctx)
    apo_r = max(radii) if radii else r0
    return OuterReturn(end, end.t - pc.t, float(apo_r), _kepler_energy(end, ctx),
                       total if record else None)


# --------------------------------------------------------------------------
# ejection-collision orbits

_FAMILY_PERIOD = {"J": math.pi, "S": 2.0 * math.pi}


def _family_start(fam, param, ctx):
    if fam == "J":
        return collision_circle(param, ctx).zw
    return _seed_mcgehee(param, ctx, +1.0)


def _outbound(fam, param, ctx, r0, opts, t_max=60.0, record=False):
    start = _family_start(fam, param, ctx)
    return flow_to_section(start, ctx, outer_section(r0, "R>0"), opts=opts, t_max=t_max,
                           record=record)


def _periodic(curve: SectionCurve) -> SectionCurve:
    """Tile a closed curve over three turns so that interpolation has no gap at the seam."""
    th = np.concatenate([curve.theta - 2 * math.pi, curve.theta, curve.theta + 2 * math.pi])
    tile = lambda a: np.concatenate([a, a, a])
    return SectionCurve(curve.section, th, tile(curve.R), tile(curve.Theta), dict(curve.meta))


class _Family:
    """Outbound images on the outer section of an ejection family, with offsets from W^s."""

    def __init__(self, fam, ctx, r0, stable, opts, threads, n_scan):
        self.fam, self.ctx, self.r0, self.stable = fam, ctx, r0, stable
        self.opts, self.threads = opts, threads
        period = _FAMILY_PERIOD[fam]
        lo = -0.5 * math.pi if fam == "J" else -math.pi
        self.params = lo + period * np.arange(n_scan) / n_scan
        self.period = period
        vals = parallel_map(self._safe, self.params, threads)
        self.e = np.array([v[2] for v in vals])

    def image(self, param):
        hit = _outbound(self.fam, param, self.ctx, self.r0, self.opts)
        th, Th = hit.point.x[1], hit.point.x[3]
        return hit, float(th), float(Th), float(Th - self.stable.Theta_of(th))

    def _safe(self, param):
        try:
            _, th, Th, e = self.image(param)
            return th, Th, e
        except NumericFailure:
            return math.nan, math.nan, math.nan

    def offset(self, param):
        return self.image(param)[3]

    def roots(self):
        """Transverse zeros of the offset along the family (param, slope)."""
        out = []
        n = len(self.params)
        for i in range(n):
            j = (i + 1) % n
            a, b = self.params[i], self.params[j] + (self.period if j == 0 else 0.0)
            ea, eb = self.e[i], self.e[j]
            if not (np.isfinite(ea) and np.isfinite(eb)) or ea * eb >= 0:
                continue
            if max(abs(ea), abs(eb)) > 0.5:
                continue
            try:
                p = brentq(self.offset, a, b, xtol=1e-14, rtol=1e-15, maxiter=100)
            except (NumericFailure, ValueError):
                continue
            if abs(self.offset(p)) > 1e-9:
                continue
            out.append((p, (eb - ea) / (b - a)))
        return out


@dataclass
class ECOrbit:
    kind: str
    mu: float
    h: float
    trajectory: Trajectory
    apoapsis: float
    endpoint_residuals: tuple
    return_time: float
    params: dict
    crossing: tuple = ()        # (theta, Theta) on the inbound outer section
    departure: tuple = ()       # (theta, Theta) on the outbound outer section

    def max_radius(self) -> float:
        return self.trajectory.max_cm_radius(self.mu)

    def to_json(self) -> dict:
        return {"kind": self.kind, "mu": self.mu, "h": self.h, "apoapsis": self.apoapsis,
                "endpoint_residuals": list(self.endpoint_residuals),
                "return_time": self.return_time, "energy_drift": self.trajectory.drift,
                "params": self.params, "crossing": list(self.crossing),
                "departure": list(self.departure)}

    def csv_rows(self):
        """(t, x, y) rows of the trajectory in rotating centre-of-mass coordinates."""
        xy = self.trajectory.cm_positions(self.mu)
        return np.column_stack([self.trajectory.times(), xy])


def _finish_jupiter(p, ctx, gamma, opts, t_guard=60.0):
    """From a point heading to Jupiter, flow to closest approach; returns (trajectory, distance)."""
    total = Trajectory()
    ev = UserEvent(K.EV_JUP, ctx.mu**gamma, -1, True)
    traj, hit = flow(p, ctx, p.t + t_guard, opts, events=(ev,))
    _append(total, traj)
    if hit != 0:
        raise NoneFound("orbit did not come back to Jupiter")
    zw = convert(traj.end, Chart.LeviCivita, ctx, branch="upper")
    peri = UserEvent(K.EV_PERI, 0.0, +1, True)
    guard = UserEvent(K.EV_JUP, 2.0 * ctx.mu**gamma, +1, True)
    traj, hit = flow(zw, ctx, math.inf, opts, radii=None, events=(peri, guard))
    _append(total, traj)
    if hit != 0:
        raise NoneFound("no closest approach inside the Jupiter region")
    z1, z2 = traj.end.x[0], traj.end.x[1]
    return total, 2.0 * (z1 * z1 + z2 * z2)


def _finish_sun(p, ctx, opts, t_guard=60.0, delta=0.1):
    """From a point heading to the Sun, flow to rbar = SEED_RADIUS or to pericentre."""
    total = Trajectory()
    ev = UserEvent(K.EV_SUN, 2.0 * delta**2, -1, True)
    traj, hit = flow(p, ctx, p.t + t_guard, opts, events=(ev,))
    _append(total, traj)
    if hit != 0:
        raise NoneFound("orbit did not come back to the Sun")
    mg = convert(traj.end, Chart.McGeheeSun, ctx)
    clip = UserEvent(K.EV_SUN, SEED_RADIUS, -1, True)
    peri = UserEvent(K.EV_PERI, 0.0, +1, True)
    traj, hit = flow(mg, ctx, math.inf, opts, radii=None, events=(clip, peri))
    _append(total, traj)
    if hit is None:
        raise NoneFound("no closest approach at the Sun")
    return total, float(traj.end.x[0])


def _start_residual(fam):
    return 0.0 if fam == "J" else SEED_RADIUS


@dataclass
class _Target:
    """Collision family on the inbound outer section near one of its W^u crossings."""

    params: np.ndarray
    e: np.ndarray
    theta: np.ndarray

    def theta_of(self, e):
        return PchipInterpolator(self.e, self.theta, extrapolate=False)(e)

    def param_of(self, e):
        return PchipInterpolator(self.e, self.params, extrapolate=False)(e)


def _reach(fam: _Family, root, e_level):
    """Parameter distance from a root, on its negative side, at which the offset first hits -e_level."""
    p0, slope = root
    side = -1.0 if slope > 0 else 1.0
    n = len(fam.params)
    step = fam.period / n
    prev_d, prev_e = 0.0, 0.0
    for k in range(1, n // 2):
        d = k * step
        e = fam._safe(p0 + side * d)[2]
        if not np.isfinite(e) or e > prev_e:
            break
        if e <= -e_level:
            return brentq(lambda u: fam.offset(p0 + side * u) + e_level, prev_d, d,
                          xtol=1e-13, rtol=1e-13)
        prev_d, prev_e = d, e
    return prev_d


def _target_branch(fam: _Family, root, e_max, n=41):
    """Reflected images of the family on the side of the root where the offset is negative."""
    p0, slope = root
    side = -1.0 if slope > 0 else 1.0
    width = _reach(fam, root, e_max)
    ps = p0 + side * width * np.linspace(0.0, 1.0, n)[1:]
    vals = parallel_map(fam._safe, ps, fam.threads)
    th = np.array([-v[0] for v in vals])   # reflection
    e = np.array([v[2] for v in vals])
    ok = np.isfinite(e) & np.isfinite(th)
    ps, th, e = ps[ok], th[ok], e[ok]
    # keep the monotone stretch next to the root
    k = 1
    while k < len(e) and e[k] < e[k - 1]:
        k += 1
    ps, th, e = ps[:k], np.unwrap(th[:k]), e[:k]
    order = np.argsort(e)
    return _Target(ps[order], e[order], th[order])


def _match(src: _Family, tgt: _Family, x, p_t, side, root_s, unstable, opts, t_max):
    """Mismatch between the outer return of a source point and a reflected target point."""
    hit = _outbound(src.fam, root_s + side * x, src.ctx, src.r0, src.opts)
    ret = outer_poincare(hit.point, src.ctx, src.r0, opts, t_max=t_max)
    th_t = _outbound(tgt.fam, p_t, tgt.ctx, tgt.r0, tgt.opts).point
    th_t = reflect(th_t)
    F = np.array([float(angle_diff(ret.point.x[1], th_t.x[1])), ret.point.x[3] - th_t.x[3]])
    return F, hit, ret


def _polish(src, tgt, x0, p0, side, root_s, unstable, opts, t_max, tol=1e-11, max_iter=12):
    x, p = x0, p0
    for _ in range(max_iter):
        F, hit, ret = _match(src, tgt, x, p, side, root_s, unstable, opts, t_max)
        if np.max(np.abs(F)) < tol:
            return x, p, hit, ret
        hx = 1e-7 * x
        hp = 1e-8
        Fx = _match(src, tgt, x + hx, p, side, root_s, unstable, opts, t_max)[0]
        Fp = _match(src, tgt, x, p + hp, side, root_s, unstable, opts, t_max)[0]
        J = np.column_stack([(Fx - F) / hx, (Fp - F) / hp])
        dx, dp = np.linalg.solve(J, -F)
        # keep the step inside the current winding
        lim = 0.5 * x / max(ret.elapsed, 1.0)
        if abs(dx) > lim:
            dp *= lim / abs(dx)
            dx = math.copysign(lim, dx)
        x, p = x + dx, p + dp
    F, hit, ret = _match(src, tgt, x, p, side, root_s, unstable, opts, t_max)
    if np.max(np.abs(F)) < 1e4 * tol:
        return x, p, hit, ret
    raise NoConvergence(f"crossing polish stalled with mismatch {np.max(np.abs(F)):.3e}")


def _assemble(kind, src, tgt, x, p_t, side, root_s, ctx, r0, gamma, opts, out_opts, t_max):
    total = Trajectory()
    sec = _outbound(src.fam, root_s + side * x, ctx, r0, opts, record=True)
    _append(total, sec.trajectory)
    ret = outer_poincare(sec.point, ctx, r0, out_opts, t_max=t_max, record=True)
    _append(total, ret.trajectory)
    q = ret.point
    if tgt.fam == "J":
        tail, res_end = _finish_jupiter(q, ctx, gamma, opts)
    else:
        tail, res_end = _finish_sun(q, ctx, opts)
    _append(total, tail)
    return ECOrbit(kind, ctx.mu, ctx.h, total, ret.apoapsis,
                   (_start_residual(src.fam), res_end), ret.elapsed,
                   {"source_param": root_s + side * x, "target_param": p_t, "offset": x},
                   (float(q.x[1]), float(q.x[3])),
                   (float(sec.point.x[1]), float(sec.point.x[3])))


def find_ec_orbits(ctx: EnergyContext, kind: str = "J-J+", n_wanted: int = 2,
                   r0: float = R0_DEFAULT, gamma: float = 0.3, n_scan: int = 256,
                   n_stable: int = 64, e_start: float = 3e-2, min_return_time: float = 500.0,
                   max_return_time: float = 1e5, search_window: float = 60.0,
                   opts: Tolerances = DEFAULT_TOLERANCES,
                   outer_opts: Tolerances = OUTER_TOLERANCES,
                   threads: int | None = None) -> list:
    """Ejection-collision orbits that make one large excursion beyond r0.

    Kinds J-J+, S-J+ and J-S+ (source and target primary). Ejection orbits
    of the source family are followed to the outbound outer section and
    parameterised near their crossings with the stable manifold of infinity;
    points just below it return on the inbound section close to the unstable
    manifold, winding once per revolution. Each sign change of the angle
    between such a return and the (reflected) target collision family is
    polished by Newton iteration on the source and target parameters. Orbits
    returning before ``min_return_time`` are skipped; the first ``n_wanted``
    are returned ordered by return time. Each pairing of source and target
    branch is marched only while the return time stays below
    ``min_return_time + search_window`` (and ``max_return_time``).
    """
    fams = {"J-J+": ("J", "J"), "S-J+": ("S", "J"), "J-S+": ("J", "S")}
    if kind not in fams:
        raise ParameterError(f"unknown kind {kind!r}")
    if n_wanted < 1:
        raise ParameterError("n_wanted must be positive")
    Theta0 = -ctx.h
    stable = _periodic(infinity_manifold_curve(ctx, Theta0, "s", outer_section(r0, "R>0"),
                                               n=n_stable, opts=opts, threads=threads))
    unstable = stable.reflected()
    fs, ft = fams[kind]
    src = _Family(fs, ctx, r0, stable, opts, threads, n_scan)
    tgt = src if ft == fs else _Family(ft, ctx, r0, stable, opts, threads, n_scan)
    roots_s, roots_t = src.roots(), tgt.roots()
    if not roots_s or not roots_t:
        raise NoneFound("the ejection family does not cross the stable manifold of infinity")
    targets = [_target_branch(tgt, rt, 1.7 * e_start) for rt in roots_t]

    found = []
    for root_s in roots_s:
        for target in targets:
            if len(target.e) < 4:
                continue
            found.extend(_march(src, tgt, target, root_s, e_start, n_wanted,
                                min_return_time,
                                min(max_return_time, min_return_time + search_window),
                                kind, ctx, r0, gamma, opts, outer_opts))
    if not found:
        raise NoneFound("no crossing with the target collision curve within the budget")
    found.sort(key=lambda o: o.return_time)
    uniq = []
    for o in found:
        if uniq and abs(o.return_time - uniq[-1].return_time) < 1e-6 * o.return_time:
            continue
        uniq.append(o)
    return uniq[:n_wanted]


def _march(src, tgt, target, root_s, e_start, n_wanted, t_min, t_max_ret, kind,
           ctx, r0, gamma, opts, out_opts, phase_step=0.5):
    """Walk the source family towards its W^s crossing, watching the returns for target crossings.

    The offset x shrinks so that the return time, hence the winding phase,
    grows by about ``phase_step`` per sample.
    """
    p_s, slope = root_s
    side = -1.0 if slope > 0 else 1.0
    out = []
    x = _reach(src, root_s, e_start)
    if x <= 0.0:
        return out
    dx = 1e-6 * x
    prev = None
    e_lo, e_hi = target.e[0], target.e[-1]
    fails = 0
    while len(out) < n_wanted and x > 0.0:
        try:
            hit = _outbound(src.fam, p_s + side * x, ctx, r0, opts)
            ret = outer_poincare(hit.point, ctx, r0, out_opts, t_max=2 * t_max_ret)
        except (Escape, NumericFailure):
            fails += 1
            if fails > 100:
                break
            x -= dx
            prev = None
            continue
        fails = 0
        T = ret.elapsed
        if prev is not None and abs(T - prev[2]) > 3.0 * phase_step:
            # the winding phase jumped too far: retry with a smaller step
            dx *= phase_step / abs(T - prev[2])
            x = prev[0] - dx
            continue
        if T > t_max_ret:
            break
        th, Th = ret.point.x[1], ret.point.x[3]
        e = float(Th - _unstable_theta(src.stable, th))
        C = math.nan
        if e_lo <= e <= e_hi:
            C = float(angle_diff(th, float(target.theta_of(e))))
        if prev is not None and np.isfinite(C) and np.isfinite(prev[1]) and T >= t_min:
            xa, Ca, _ = prev
            if Ca * C < 0 and abs(Ca) < 2.0 and abs(C) < 2.0:
                xs = xa + (x - xa) * Ca / (Ca - C)
                p_t = float(target.param_of(e))
                try:
                    xs, p_t, _, _ = _polish(src, tgt, xs, p_t, side, p_s, None, out_opts,
                                            2 * t_max_ret)
                    out.append(_assemble(kind, src, tgt, xs, p_t, side, p_s, ctx, r0, gamma,
                                         opts, out_opts, 2 * t_max_ret))
                except NumericFailure:
                    pass
        if prev is not None:
            dT = abs(T - prev[2])
            dx *= min(2.0, max(0.5, phase_step / dT)) if dT > 0 else 2.0
        prev = (x, C, T)
        dx = min(dx, 0.5 * x)
        x -= dx
    return out


def _unstable_theta(stable: SectionCurve, theta):
    """Theta of the unstable curve on the inbound section via the reflection symmetry."""
    return float(stable.Theta_of(-theta))


def reversibility_residual(a: ECOrbit, b: ECOrbit) -> float:
    """How far ``b`` is from the time-reversed mirror image of ``a``.

    The involution (theta, R, Theta, t) -> (-theta, -R, Theta, -t) swaps the
    inbound and outbound outer sections, so the departure of one orbit must
    be the mirrored crossing of the other and vice versa. Returns the largest
    discrepancy in (theta, Theta) over both section points; the return times
    must agree as well and their relative difference is included.
    """
    (tc, Tc), (td, Td) = a.crossing, a.departure
    (uc, Uc), (ud, Ud) = b.crossing, b.departure
    parts = [abs(float(angle_diff(-tc, ud))), abs(Tc - Ud),
             abs(float(angle_diff(-td, uc))), abs(Td - Uc),
             abs(a.return_time - b.return_time) / max(a.return_time, 1.0)]
    return float(max(parts))


def pair_by_reversibility(first: list, second: list):
    """Closest mirror partner in ``second`` for each orbit of ``first``: [(a, b, residual)]."""
    out = []
    for a in first:
        best = min(second, key=lambda b: reversibility_residual(a, b), default=None)
        if best is not None:
            out.append((a, best, reversibility_residual(a, best)))
    return out


# --------------------------------------------------------------------------
# ballistic orbit from Jupiter to the Sun


def _sun_collision_at(theta_bar, ctx, delta, opts, guess):
    """Exact Sun-collision manifold point at section angle theta_bar (secant on the seed angle)."""
    def f(a):
        p = _sun_ejection_to_section(a, ctx, delta, opts)
        return float(angle_diff(-p.x[1], theta_bar)), p

    a0, a1 = guess, guess + 1e-6
    f0, p0 = f(a0)
    f1, p1 = f(a1)
    for _ in range(50):
        if abs(f1) < 1e-14 or f1 == f0:
            break
        a2 = a1 - f1 * (a1 - a0) / (f1 - f0)
        a0, f0 = a1, f1
        a1 = a2
        f1, p1 = f(a1)
    if not abs(f1) < 1e-11:
        raise NoConvergence("could not place a Sun collision orbit at the requested angle")
    return reflect(p1), a1


def find_ballistic_ec(ctx: EnergyContext, delta: float = 0.1, gamma: float = 0.3,
                      n_jup: int = 64, n_sun: int = 128, opts: Tolerances = DEFAULT_TOLERANCES,
                      threads: int | None = None):
    """Jupiter-to-Sun ejection-collision orbit that stays inside Jupiter's circle.

    The distance Theta_J^- - Theta_S^s on the inbound Sun section rbar =
    delta^2 is root-found on the window around the mu = 0 Jupiter-Sun ray;
    the orbit is then shot exactly on the Jupiter collision-circle angle,
    matching an exact Sun collision orbit at each trial angle. Returns
    (ECOrbit, TransverseZero).
    """
    jc = jupiter_curve_at_sun_section(ctx, delta, gamma, "ejection", n=n_jup, opts=opts,
                                      threads=threads)
    sc0 = sun_manifold_curve(ctx, delta, "s", n=n_sun, opts=opts, threads=threads).numeric
    sc = _periodic(sc0)
    d = distance_curve(jc, sc)
    zero = _nearest(find_transverse_zero(d), sun_window_center(delta))
    # the collision curve is the mirror of the ejection curve: its point at
    # angle theta comes from the ejection seed stored alongside
    seed_of = PchipInterpolator(sc0.theta, np.unwrap(sc0.extra["seed"]))
    beta_of = PchipInterpolator(jc.theta, jc.extra["beta"])

    def g(beta):
        p = _jupiter_to_sun(beta, ctx, delta, opts)
        guess = float(seed_of(_fold_into(sc0, p.x[1])))
        q, _ = _sun_collision_at(p.x[1], ctx, delta, opts, guess)
        return p.x[3] - q.x[3]

    b0 = float(beta_of(zero.theta_star))
    b1 = b0 + 1e-7
    g0, g1 = g(b0), g(b1)
    for _ in range(40):
        if abs(g1) < 1e-13 or g1 == g0:
            break
        b2 = b1 - g1 * (b1 - b0) / (g1 - g0)
        b0, g0 = b1, g1
        b1 = b2
        g1 = g(b1)
    if not abs(g1) < 1e-10:
        raise NoConvergence(f"ballistic shooting stalled at mismatch {g1:.3e}")
    p, traj0 = _jupiter_to_sun(b1, ctx, delta, opts, want_traj=True)
    total = Trajectory()
    _append(total, traj0)
    mg = convert(traj0.end, Chart.McGeheeSun, ctx)
    clip = UserEvent(K.EV_SUN, SEED_RADIUS, -1, True)
    peri = UserEvent(K.EV_PERI, 0.0, +1, True)
    tail, hit = flow(mg, ctx, math.inf, opts, radii=None, events=(clip, peri))
    _append(total, tail)
    orbit = ECOrbit("ballistic-J-S+", ctx.mu, ctx.h, total, total.max_cm_radius(ctx.mu),
                    (0.0, float(tail.end.x[0])), float(tail.end.t), {"beta": b1, "delta": delta})
    return orbit, zero


def _fold_into(curve, theta):
    lo = curve.theta[0]
    return lo + (theta - lo) % (2 * math.pi)


# --------------------------------------------------------------------------
# spiral evidence


@dataclass
class SpiralEvidence:
    offsets: np.ndarray
    min_distance: np.ndarray
    crossings: np.ndarray
    samples: np.ndarray       # segment offsets actually mapped
    sample_distance: np.ndarray
    sample_return_time: np.ndarray
    theta_hat: float

    def rows(self):
        return np.column_stack([self.offsets, self.min_distance, self.crossings])

    def to_json(self) -> dict:
        return {"theta_hat": self.theta_hat, "offsets": self.offsets.tolist(),
                "min_distance": self.min_distance.tolist(),
                "crossings": self.crossings.astype(int).tolist(),
                "samples": self.samples.tolist(),
                "sample_distance": self.sample_distance.tolist(),
                "sample_return_time": self.sample_return_time.tolist()}


def spiral_evidence(ctx: EnergyContext, offsets=(1e-3, 1e-4, 1e-5), r0: float = R0_DEFAULT,
                    s_max: float = 1e-2, per_decade: int = 4, n_scan: int = 256,
                    n_stable: int = 64, opts: Tolerances = DEFAULT_TOLERANCES,
                    outer_opts: Tolerances = OUTER_TOLERANCES,
                    threads: int | None = None) -> SpiralEvidence:
    """Images under the outer return map of a segment below the stable curve.

    The segment is vertical (fixed theta) on the outbound outer section at
    the angle where the Jupiter ejection family crosses W^s(infinity); it
    runs from ``s_max`` down to each offset below the stable curve. For each
    offset the minimum distance of the images to the unstable curve and the
    number of crossings with the reflected ejection family (the Jupiter
    collision curve) are reported. Crossings are counted from the
    continuous phase of the images: the inertial sweep angle varies slowly
    along the segment, so the rotating angle winds once per 2 pi of return
    time and each winding through the target is one crossing.
    """
    offsets = np.sort(np.asarray(offsets, dtype=float))[::-1]
    if np.any(offsets <= 0) or np.any(offsets >= s_max):
        raise ParameterError("offsets must lie in (0, s_max)")
    Theta0 = -ctx.h
    stable = _periodic(infinity_manifold_curve(ctx, Theta0, "s", outer_section(r0, "R>0"),
                                               n=n_stable, opts=opts, threads=threads))
    fam = _Family("J", ctx, r0, stable, opts, threads, n_scan)
    roots = fam.roots()
    if not roots:
        raise NoneFound("the Jupiter ejection family does not cross W^s on this section")
    root = min(roots, key=lambda r: abs(r[1]) ** -1)
    th_hat = fam.image(root[0])[1]
    target = _target_branch(fam, root, 1.5 * s_max)

    n = int(math.ceil(per_decade * math.log10(s_max / offsets[-1]))) + 1
    ss = np.unique(np.concatenate([s_max * np.logspace(0, math.log10(offsets[-1] / s_max), n),
                                   offsets]))[::-1]
    Ts = float(stable.Theta_of(th_hat))

    def image(s):
        Th = Ts - s
        R = solve_radial_momentum(Chart.RotPolarCM, r0, th_hat, Th, ctx, +1.0)
        p = PhasePoint(Chart.RotPolarCM, (r0, th_hat, R, Th), 0.0)
        ret = outer_poincare(p, ctx, r0, outer_opts)
        return ret.point.x[1], ret.point.x[3], ret.elapsed

    vals = np.array(parallel_map(image, ss, threads))
    th, Th, T = vals[:, 0], vals[:, 1], vals[:, 2]
    dist = np.abs(Th - np.array([_unstable_theta(stable, a) for a in th]))
    e = Th - np.array([_unstable_theta(stable, a) for a in th])
    # continuous phase: theta = Phi - T with Phi slowly varying
    phi = np.unwrap(np.asarray(wrap_angle(th + T))) - T
    inside = (e >= target.e[0]) & (e <= target.e[-1])
    tgt_th = np.full_like(e, np.nan)
    tgt_th[inside] = target.theta_of(e[inside])
    psi = phi - tgt_th
    mins, counts = [], []
    for off in offsets:
        m = ss >= off * (1 - 1e-12)
        mins.append(float(np.min(dist[m])))
        c = 0
        idx = np.nonzero(m)[0]
        for i, j in zip(idx[:-1], idx[1:]):
            if inside[i] and inside[j]:
                c += abs(int(math.floor(psi[j] / (2 * math.pi)) - math.floor(psi[i] / (2 * math.pi))))
        counts.append(c)
    return SpiralEvidence(offsets, np.array(mins), np.array(counts), ss, dist, T, float(th_hat))
