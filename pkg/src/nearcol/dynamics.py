"""Vector fields, adaptive integration, section crossings and chart switching."""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import _kernels as K
from .charts import (Chart, PhasePoint, convert, convert_state, energy, lc_hamiltonian,
                     mcgehee_sun_energy, hamiltonian_cm, hamiltonian_jupcart, OutOfDomain)
from .core import (DEFAULT_TOLERANCES, EnergyContext, NumericFailure, ParameterError,
                   Tolerances, Unsupported)


class StepBudgetExceeded(NumericFailure):
    pass


class EnergyDriftExceeded(NumericFailure):
    pass


class EscapedDomain(NumericFailure):
    pass


class NoCrossing(NumericFailure):
    pass


class SingularPoint(NumericFailure):
    pass


INTEGRABLE = {Chart.RotCartCM, Chart.RotPolarCM, Chart.RotPolarSun, Chart.RotPolarJup,
              Chart.RotCartJup, Chart.LeviCivita, Chart.McGeheeSun, Chart.McGeheeInf,
              Chart.NonRotPolarCM}
REGULARIZED = {Chart.LeviCivita, Chart.McGeheeSun}
DRIFT_LIMIT = 1e-8
_HUGE = 1e300


@dataclass(frozen=True)
class SwitchRadii:
    """Where the automatic integrator changes chart.

    Levi-Civita inside ``2 mu**gamma`` of Jupiter, McGehee at the Sun inside
    ``2 delta**2``, McGehee at infinity beyond ``r_inf``; exits happen at the
    entry radius scaled by ``hysteresis`` so that orbits do not chatter.
    """

    gamma: float = 0.3
    delta: float = 0.1
    r_inf: float = 20.0
    hysteresis: float = 1.25

    def jupiter_in(self, mu):
        return 2.0 * mu**self.gamma if mu > 0 else 0.0

    def sun_in(self):
        return 2.0 * self.delta**2


DEFAULT_RADII = SwitchRadii()


SECTION_KINDS = ("SigmaGamma", "SigmaBarSun", "SigmaHatOuter")
_SECTION_EVENT = {"SigmaGamma": K.EV_JUP, "SigmaBarSun": K.EV_SUN, "SigmaHatOuter": K.EV_CM}
_SECTION_CHART = {"SigmaGamma": Chart.RotPolarJup, "SigmaBarSun": Chart.RotPolarSun,
                  "SigmaHatOuter": Chart.RotPolarCM}
_SIGN = {"R>0": 1, "R<0": -1, "both": 0}


@dataclass(frozen=True)
class SectionSpec:
    """A circle around Jupiter, the Sun or the centre of mass, with a crossing sign.

    ``param`` is the exponent gamma (radius mu**gamma) for ``SigmaGamma``, the
    scale delta (radius delta**2) for ``SigmaBarSun`` and the radius itself
    for ``SigmaHatOuter``.
    """

    kind: str
    sign: str
    param: float
    check: bool = True

    def __post_init__(self):
        if self.kind not in SECTION_KINDS:
            raise ParameterError(f"unknown section kind {self.kind!r}")
        if self.sign not in _SIGN:
            raise ParameterError(f"unknown sign {self.sign!r}")
        if not self.check:
            return
        if self.kind == "SigmaGamma" and not (3.0 / 11.0 < self.param <= 1.0 / 3.0):
            raise Unsupported(f"gamma = {self.param} outside (3/11, 1/3]")
        if self.kind == "SigmaBarSun" and not (0.0 < self.param < 1.0):
            raise ParameterError("delta must lie in (0, 1)")
        if self.kind == "SigmaHatOuter" and not self.param > 1.0:
            raise ParameterError("outer section radius must exceed 1")

    def radius(self, mu: float) -> float:
        if self.kind == "SigmaGamma":
            return mu**self.param
        if self.kind == "SigmaBarSun":
            return self.param**2
        return self.param

    @property
    def chart(self) -> Chart:
        return _SECTION_CHART[self.kind]

    @property
    def event_kind(self) -> int:
        return _SECTION_EVENT[self.kind]

    @property
    def direction(self) -> int:
        return _SIGN[self.sign]


def jupiter_section(gamma, sign, check=True):
    return SectionSpec("SigmaGamma", sign, gamma, check)


def sun_section(delta, sign):
    return SectionSpec("SigmaBarSun", sign, delta)


def outer_section(r0, sign):
    return SectionSpec("SigmaHatOuter", sign, r0)


@dataclass
class Segment:
    chart: Chart
    tau: np.ndarray
    y: np.ndarray  # rows: four coordinates and physical time


@dataclass
class Trajectory:
    segments: list = dc_field(default_factory=list)
    switches: list = dc_field(default_factory=list)  # (time, from, to)
    rescale_log: list = dc_field(default_factory=list)  # (chart, chart-time span, physical span)
    events: list = dc_field(default_factory=list)  # (event index, PhasePoint)
    drift: float = 0.0
    steps: int = 0

    @property
    def points(self) -> list:
        out = []
        for seg in self.segments:
            for row in seg.y:
                out.append(PhasePoint(seg.chart, tuple(row[:4]), row[4]))
        return out

    @property
    def start(self) -> PhasePoint:
        s = self.segments[0]
        return PhasePoint(s.chart, tuple(s.y[0, :4]), s.y[0, 4])

    @property
    def end(self) -> PhasePoint:
        s = self.segments[-1]
        return PhasePoint(s.chart, tuple(s.y[-1, :4]), s.y[-1, 4])

    def times(self) -> np.ndarray:
        return np.concatenate([s.y[:, 4] for s in self.segments])

    def cm_positions(self, mu: float) -> np.ndarray:
        rows = []
        for s in self.segments:
            for r in s.y:
                rows.append(K.cm_position(int(s.chart), r, mu))
        return np.array(rows)

    def max_cm_radius(self, mu: float) -> float:
        xy = self.cm_positions(mu)
        return float(np.max(np.hypot(xy[:, 0], xy[:, 1])))


def vector_field(p: PhasePoint, ctx: EnergyContext) -> np.ndarray:
    """Derivative of the coordinates in the chart's own time variable.

    Levi-Civita uses the regularised time with dt/dtau = 4 xi |z|^2, McGehee
    at the Sun uses dt/dtau = rbar**1.5; all other charts use physical time.
    """
    c = p.chart
    if c == Chart.StraightenedLC:
        zw = convert(p, Chart.LeviCivita, ctx)
        f = vector_field(zw, ctx)
        r2 = math.sqrt(2.0)
        return np.array([(f[0] - f[2]) / r2, (f[1] - f[3]) / r2,
                         (f[0] + f[2]) / r2, (f[1] + f[3]) / r2])
    if c not in INTEGRABLE:
        raise Unsupported(f"no vector field for chart {c.name}")
    y = np.array(list(p.x) + [p.t])
    if c in (Chart.RotPolarCM, Chart.RotPolarSun, Chart.RotPolarJup, Chart.NonRotPolarCM) and y[0] <= 0:
        raise SingularPoint("polar chart at r = 0")
    if c == Chart.McGeheeInf and y[0] < 0:
        raise SingularPoint("negative McGehee radius")
    f = np.empty(5)
    K.field(int(c), y, ctx.mu, ctx.xi, f)
    if not np.all(np.isfinite(f)):
        raise SingularPoint(f"vector field not finite in {c.name}")
    return f[:4]


def time_rate(p: PhasePoint, ctx: EnergyContext) -> float:
    """dt/d(chart time)."""
    if p.chart == Chart.LeviCivita:
        return 4.0 * ctx.xi * (p.x[0] ** 2 + p.x[1] ** 2)
    if p.chart == Chart.McGeheeSun:
        return p.x[0] ** 1.5
    return 1.0


def native_energy(chart: Chart, y, ctx: EnergyContext) -> float:
    mu = ctx.mu
    if chart == Chart.LeviCivita:
        return float(lc_hamiltonian(*y[:4], mu, ctx.xi))
    if chart == Chart.McGeheeSun:
        return float(mcgehee_sun_energy(*y[:4], mu, ctx.h))
    if chart == Chart.RotCartCM:
        return float(hamiltonian_cm(*y[:4], mu))
    if chart == Chart.NonRotPolarCM:
        return float(hamiltonian_cm(*convert_state(y[:4], chart, Chart.RotCartCM, ctx, t=y[4]), mu))
    return energy(PhasePoint(chart, tuple(y[:4]), y[4]), ctx)


def event_value(kind: int, c: float, p: PhasePoint, ctx: EnergyContext) -> float:
    y = np.array(list(p.x) + [p.t])
    return float(K.event_value(kind, c, int(p.chart), y, ctx.mu, ctx.xi))


def radial_velocity(p: PhasePoint, ctx: EnergyContext, center: str) -> float:
    """Rate of change in physical time of the distance to ``center`` ('jup', 'sun' or 'cm')."""
    kind = {"jup": K.EV_JUP, "sun": K.EV_SUN, "cm": K.EV_CM}[center]
    if p.chart in (Chart.LeviCivita, Chart.McGeheeSun):
        rate = time_rate(p, ctx)
        if rate == 0.0:
            if p.chart == Chart.LeviCivita:
                # on the collision circle the sign of d|q|/dtau is that of z . w near the circle
                return 0.0
            return 0.0
    y = np.array(list(p.x) + [p.t])
    f = np.empty(5)
    K.field(int(p.chart), y, ctx.mu, ctx.xi, f)
    eps = 1e-7 * max(1.0, float(np.max(np.abs(y[:4]))))
    gp = K.event_value(kind, 0.0, int(p.chart), y + eps * f, ctx.mu, ctx.xi)
    gm = K.event_value(kind, 0.0, int(p.chart), y - eps * f, ctx.mu, ctx.xi)
    return (gp - gm) / (2.0 * eps * f[4])


def _region_chart(p: PhasePoint, ctx: EnergyContext, radii: SwitchRadii) -> Chart:
    mu = ctx.mu
    hyst = radii.hysteresis
    rj = radii.jupiter_in(mu)
    rs = radii.sun_in()
    if p.chart == Chart.LeviCivita and 2.0 * (p.x[0] ** 2 + p.x[1] ** 2) <= rj * hyst:
        return Chart.LeviCivita
    if p.chart == Chart.McGeheeSun and p.x[0] <= rs * hyst:
        return Chart.McGeheeSun
    if p.chart == Chart.McGeheeInf and 2.0 / p.x[0] ** 2 >= radii.r_inf / hyst:
        return Chart.McGeheeInf
    y = np.array(list(p.x) + [p.t])
    X, Y = K.cm_position(int(p.chart), y, mu)
    if mu > 0 and math.hypot(X - 1.0 + mu, Y) < rj:
        return Chart.LeviCivita
    if math.hypot(X + mu, Y) < rs:
        return Chart.McGeheeSun
    if math.hypot(X, Y) > radii.r_inf:
        return Chart.McGeheeInf
    return Chart.RotCartCM


def _exit_events(chart: Chart, ctx: EnergyContext, radii: SwitchRadii):
    """(kind, value, path direction, next chart) for leaving ``chart``."""
    mu = ctx.mu
    hyst = radii.hysteresis
    if chart == Chart.LeviCivita:
        return [(K.EV_JUP, radii.jupiter_in(mu) * hyst, 1, Chart.RotCartCM)]
    if chart == Chart.McGeheeSun:
        return [(K.EV_SUN, radii.sun_in() * hyst, 1, Chart.RotCartCM)]
    if chart == Chart.McGeheeInf:
        return [(K.EV_CM, radii.r_inf / hyst, -1, Chart.RotCartCM)]
    out = [(K.EV_SUN, radii.sun_in(), -1, Chart.McGeheeSun),
           (K.EV_CM, radii.r_inf, 1, Chart.McGeheeInf)]
    if mu > 0:
        out.insert(0, (K.EV_JUP, radii.jupiter_in(mu), -1, Chart.LeviCivita))
    return out


@dataclass(frozen=True)
class UserEvent:
    kind: int
    value: float
    phys_dir: int = 0
    terminal: bool = True


def _to_chart(p: PhasePoint, chart: Chart, ctx: EnergyContext, branch_ref=None) -> PhasePoint:
    if p.chart == chart:
        return p
    branch = "upper"
    if chart == Chart.LeviCivita and branch_ref is not None:
        branch = branch_ref
    return convert(p, chart, ctx, branch=branch)


def flow(p: PhasePoint, ctx: EnergyContext, t_end: float = math.inf,
         opts: Tolerances = DEFAULT_TOLERANCES, radii: SwitchRadii | None = DEFAULT_RADII,
         events=(), record: bool = True, backward: bool | None = None,
         max_drift: float = DRIFT_LIMIT):
    """Integrate ``p`` until physical time ``t_end`` or a terminal user event.

    ``radii=None`` keeps the starting chart throughout. Returns the trajectory
    and the index of the terminal user event that stopped it (or ``None``).
    """
    if backward is None:
        backward = t_end < p.t
    tsign = -1.0 if backward else 1.0
    if math.isfinite(t_end) and (t_end - p.t) * tsign < 0:
        raise ParameterError("t_end lies on the wrong side of the start time")
    auto = radii is not None
    chart = _region_chart(p, ctx, radii) if auto else p.chart
    if chart not in INTEGRABLE:
        raise Unsupported(f"cannot integrate in chart {chart.name}")
    cur = _to_chart(p, chart, ctx)
    traj = Trajectory()
    steps_left = opts.max_steps
    hit_user = None
    lc_ref = None
    while True:
        exits = _exit_events(chart, ctx, radii) if auto else []
        kinds, vals, dirs, terms = [], [], [], []
        for kind, val, d, _ in exits:
            kinds.append(kind)
            vals.append(val)
            dirs.append(d)
            terms.append(True)
        n_exit = len(kinds)
        for ev in events:
            kinds.append(ev.kind)
            vals.append(ev.value)
            dirs.append(int(ev.phys_dir * tsign))
            terms.append(ev.terminal)
        time_ev = -1
        if chart in REGULARIZED:
            tau_end = tsign * _HUGE
            if math.isfinite(t_end):
                time_ev = len(kinds)
                kinds.append(K.EV_TIME)
                vals.append(t_end)
                dirs.append(0)
                terms.append(True)
        else:
            tau_end = (t_end - cur.t) if math.isfinite(t_end) else tsign * _HUGE
        y0 = np.array(list(cur.x) + [cur.t])
        e0 = native_energy(chart, y0, ctx)
        res = K.integrate_kernel(int(chart), y0, float(tau_end), ctx.mu, ctx.xi,
                                 opts.rel_tol, opts.abs_tol, opts.event_tol, steps_left,
                                 np.array(kinds, dtype=np.int64), np.array(vals, dtype=float),
                                 np.array(dirs, dtype=np.int64), np.array(terms, dtype=np.bool_),
                                 record, 0.0)
        status, tau, y, nsteps, hit, log_tau, log_y, log_idx, tr_tau, tr_y = res
        steps_left -= nsteps
        traj.steps += nsteps
        if not record:
            tr_tau = np.array([0.0, tau])
            tr_y = np.vstack([y0, y])
        traj.segments.append(Segment(chart, tr_tau, tr_y))
        traj.rescale_log.append((chart, float(tau), float(y[4] - y0[4])))
        for j, ly in zip(log_idx, log_y):
            traj.events.append((int(j) - n_exit, PhasePoint(chart, tuple(ly[:4]), ly[4])))
        e1 = native_energy(chart, y, ctx) if np.all(np.isfinite(y)) else math.nan
        drift = abs(e1 - e0)
        traj.drift = max(traj.drift, drift)
        if not drift <= max_drift:
            raise EnergyDriftExceeded(f"energy drift {drift:.3e} in chart {chart.name}")
        if status == K.ST_BUDGET:
            raise StepBudgetExceeded(f"step budget exhausted at t = {y[4]:.6g}")
        if status in (K.ST_UNDERFLOW, K.ST_NONFINITE):
            raise EscapedDomain(f"integration broke down in chart {chart.name} at t = {y[4]:.6g}")
        here = PhasePoint(chart, tuple(y[:4]), y[4])
        if status == K.ST_DONE:
            break
        if hit == time_ev:
            break
        if hit >= n_exit:
            hit_user = hit - n_exit
            break
        nxt = exits[hit][3]
        if chart == Chart.LeviCivita:
            lc_ref = (y[0], y[1])
        traj.switches.append((float(y[4]), chart, nxt))
        cur = _to_chart(here, nxt, ctx, branch_ref=lc_ref)
        chart = nxt
    return traj, hit_user


def integrate(p: PhasePoint, ctx: EnergyContext, t_span, opts: Tolerances = DEFAULT_TOLERANCES,
              radii: SwitchRadii | None = DEFAULT_RADII, record: bool = True,
              max_drift: float = DRIFT_LIMIT) -> Trajectory:
    """Integrate over physical time ``t_span`` (a duration, or a (t0, t1) pair)."""
    if np.ndim(t_span) == 0:
        t_end = p.t + float(t_span)
    else:
        t0, t1 = t_span
        if abs(t0 - p.t) > 0:
            p = PhasePoint(p.chart, p.x, t0)
        t_end = float(t1)
    traj, _ = flow(p, ctx, t_end, opts, radii, record=record, max_drift=max_drift)
    return traj


@dataclass
class SectionHit:
    point: PhasePoint      # in the section's natural polar chart
    raw: PhasePoint        # in the chart the integrator was using
    elapsed: float
    trajectory: Trajectory | None


def _section_event(section: SectionSpec, ctx: EnergyContext) -> UserEvent:
    return UserEvent(section.event_kind, section.radius(ctx.mu), section.direction, True)


def flow_to_section(p: PhasePoint, ctx: EnergyContext, section: SectionSpec,
                    direction: str = "forward", opts: Tolerances = DEFAULT_TOLERANCES,
                    radii: SwitchRadii | None = DEFAULT_RADII, t_max: float = math.inf,
                    record: bool = False, max_drift: float = DRIFT_LIMIT) -> SectionHit:
    if direction not in ("forward", "backward"):
        raise ParameterError("direction must be 'forward' or 'backward'")
    tsign = 1.0 if direction == "forward" else -1.0
    ev = _section_event(section, ctx)
    g = event_value(ev.kind, ev.value, p, ctx)
    if abs(g) <= opts.event_tol:
        center = {K.EV_JUP: "jup", K.EV_SUN: "sun", K.EV_CM: "cm"}[ev.kind]
        rv = radial_velocity(p, ctx, center)
        if section.direction == 0 or rv * section.direction > 0:
            target = p if p.chart == section.chart else convert(p, section.chart, ctx)
            return SectionHit(target, p, 0.0, None)
    t_end = p.t + tsign * t_max
    try:
        traj, hit = flow(p, ctx, t_end, opts, radii, events=(ev,), record=record,
                         backward=(tsign < 0), max_drift=max_drift)
    except StepBudgetExceeded as exc:
        raise NoCrossing(f"no crossing of {section.kind} within the step budget") from exc
    if hit is None:
        raise NoCrossing(f"no crossing of {section.kind} before |t| = {t_max}")
    raw = traj.end
    return SectionHit(convert(raw, section.chart, ctx), raw, raw.t - p.t,
                      traj if record else None)


def integrate_to_section(p: PhasePoint, ctx: EnergyContext, section: SectionSpec,
                         direction: str = "forward", opts: Tolerances = DEFAULT_TOLERANCES,
                         **kw) -> tuple[PhasePoint, float]:
    """First crossing of ``section`` honouring its sign; returns (point, elapsed physical time)."""
    hit = flow_to_section(p, ctx, section, direction, opts, **kw)
    return hit.point, hit.elapsed
