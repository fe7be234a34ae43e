"""Heuristic final-motion labels from a finite integration."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .charts import Chart, PhasePoint, convert
from .core import DEFAULT_TOLERANCES, EnergyContext, NumericFailure, ParameterError, Tolerances
from .dynamics import UserEvent, flow

__all__ = ["MotionTag", "FinalMotion", "Thresholds", "classify_final_motion", "terminal_speed"]


class MotionTag(str, enum.Enum):
    HYPERBOLIC = "Hyperbolic"
    PARABOLIC = "Parabolic"
    BOUNDED = "Bounded"
    OSCILLATORY = "Oscillatory"
    COLLISION_S = "CollisionS"
    COLLISION_J = "CollisionJ"
    UNDETERMINED = "Undetermined"


@dataclass(frozen=True)
class Thresholds:
    R_esc: float = 1e3
    R_box: float = 1e2
    R_near: float = 10.0
    c_min: float = 0.05
    c_par: float = 0.01
    collision_tol: float = 1e-8
    chunk: float = 500.0   # the energy-drift guard applies per chunk of physical time


@dataclass
class FinalMotion:
    tag: MotionTag
    horizon: float
    t_end: float
    r_max: float
    r_min: float
    terminal_speed: float
    excursions: int
    evidence: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"tag": self.tag.value, "horizon": self.horizon, "t_end": self.t_end,
                "r_max": self.r_max, "r_min": self.r_min,
                "terminal_speed": self.terminal_speed, "excursions": self.excursions,
                **self.evidence}


def terminal_speed(p: PhasePoint, ctx: EnergyContext) -> float:
    """Signed speed at infinity of the osculating Kepler orbit about the centre of mass.

    sqrt(2E) for E >= 0, -sqrt(-2E) otherwise.
    """
    r, _, R, Th = convert(p, Chart.RotPolarCM, ctx).x
    E = 0.5 * R * R + 0.5 * Th * Th / (r * r) - 1.0 / r
    return math.copysign(math.sqrt(2.0 * abs(E)), E)


def _radial(p, ctx):
    return convert(p, Chart.RotPolarCM, ctx).x[2]


def _count_excursions(log):
    """Upcrossings of R_box each preceded (after the first) by a downcrossing of R_near."""
    n = 0
    armed = True
    for kind in log:
        if kind == "up" and armed:
            n += 1
            armed = False
        elif kind == "down":
            armed = True
    return n


def classify_final_motion(p: PhasePoint, ctx: EnergyContext, direction: str = "forward",
                          horizon: float = 1e4, thresholds: Thresholds = Thresholds(),
                          opts: Tolerances = DEFAULT_TOLERANCES) -> FinalMotion:
    """Label the forward or backward motion of ``p`` up to |t - t0| = horizon.

    Collisions: the regularised distance to a primary falls below the
    collision tolerance. Escape: at |q| = R_esc moving outward, the terminal
    speed (of the osculating Kepler orbit about the centre of mass) decides
    between Hyperbolic (>= c_min) and Parabolic (|.| <= c_par); an orbit
    with negative energy is followed further. At the horizon the same test
    is applied if the orbit is beyond R_box and moving out. Bounded means the
    radius never exceeded R_box, or exceeded it once and either came back or
    has a bound far-field Kepler orbit; two or more excursions beyond R_box
    separated by returns inside R_near are reported as Oscillatory evidence.
    """
    if not horizon > 0:
        raise ParameterError("horizon must be positive")
    if direction not in ("forward", "backward"):
        raise ParameterError("direction must be 'forward' or 'backward'")
    th = thresholds
    sgn = 1.0 if direction == "forward" else -1.0
    t_end = p.t + sgn * horizon
    # event directions are in physical time: "outward" along a backward run is -1.
    # A near-collision passes tol twice within one regularised step, so closest
    # approaches (z . w = 0 in Levi-Civita, v = 0 at the Sun) are tested as well.
    d = int(sgn)
    named = [("sun", UserEvent(K.EV_SUN, th.collision_tol, -d, True)),
             ("peri", UserEvent(K.EV_PERI, 0.0, +1, True)),
             ("esc", UserEvent(K.EV_CM, th.R_esc, d, True)),
             ("up", UserEvent(K.EV_CM, th.R_box, d, False)),
             ("down", UserEvent(K.EV_CM, th.R_near, -d, False))]
    if ctx.mu > 0.0:
        named.insert(0, ("jup", UserEvent(K.EV_JUP, th.collision_tol, -d, True)))
    names = [n for n, _ in named]
    events = tuple(e for _, e in named)
    cur = p
    log = []
    r_max, r_min = 0.0, math.inf
    tag = None
    v_inf = math.nan
    while True:
        seg_end = t_end if abs(t_end - cur.t) <= th.chunk else cur.t + sgn * th.chunk
        try:
            traj, hit = flow(cur, ctx, seg_end, opts, events=events, record=True,
                             backward=(sgn < 0))
        except NumericFailure as exc:
            return _result(MotionTag.UNDETERMINED, horizon, cur, ctx, r_max, r_min, log,
                           {"failure": type(exc).__name__})
        xy = traj.cm_positions(ctx.mu)
        rr = np.hypot(xy[:, 0], xy[:, 1])
        r_max, r_min = max(r_max, float(rr.max())), min(r_min, float(rr.min()))
        log.extend(names[j] for j, _ in traj.events if names[j] in ("up", "down"))
        cur = traj.end
        name = None if hit is None else names[hit]
        if name == "jup":
            tag = MotionTag.COLLISION_J
            break
        if name == "sun":
            tag = MotionTag.COLLISION_S
            break
        if name == "peri":
            x = cur.x
            if cur.chart == Chart.LeviCivita and 2.0 * (x[0] ** 2 + x[1] ** 2) < th.collision_tol:
                tag = MotionTag.COLLISION_J
                break
            if cur.chart == Chart.McGeheeSun and x[0] < th.collision_tol:
                tag = MotionTag.COLLISION_S
                break
            continue
        if name == "esc":
            r_max = max(r_max, th.R_esc)
            v_inf = terminal_speed(cur, ctx)
            if v_inf >= th.c_min:
                tag = MotionTag.HYPERBOLIC
                break
            if abs(v_inf) <= th.c_par:
                tag = MotionTag.PARABOLIC
                break
            # bound Kepler orbit beyond R_esc: it turns back, keep following it
            continue
        if hit is None and (t_end - cur.t) * sgn > 1e-9 * max(1.0, abs(t_end)):
            continue
        break
    extra = {}
    if tag is None:
        r_end = convert(cur, Chart.RotPolarCM, ctx).x[0]
        outward = _radial(cur, ctx) * sgn > 0
        v_inf = terminal_speed(cur, ctx)
        n_exc = _count_excursions(log)
        if n_exc >= 2:
            tag = MotionTag.OSCILLATORY
        elif r_end >= th.R_box and outward and v_inf >= th.c_min:
            tag = MotionTag.HYPERBOLIC
        elif r_end >= th.R_box and outward and abs(v_inf) <= th.c_par:
            tag = MotionTag.PARABOLIC
        elif r_max < th.R_box:
            tag = MotionTag.BOUNDED
        elif n_exc <= 1 and (r_end < th.R_box or v_inf <= -th.c_par):
            # one excursion past R_box that came back or is bound in the far field
            tag = MotionTag.BOUNDED
            extra["single_excursion"] = True
        else:
            tag = MotionTag.UNDETERMINED
    return _result(tag, horizon, cur, ctx, r_max, r_min, log, extra, v_inf)


def _result(tag, horizon, cur, ctx, r_max, r_min, log, extra, v_inf=math.nan):
    if not math.isfinite(v_inf):
        try:
            v_inf = terminal_speed(cur, ctx)
        except Exception:
            v_inf = math.nan
    ev = {"oscillatory_is_evidence_only": True} if tag == MotionTag.OSCILLATORY else {}
    ev.update(extra)
    return FinalMotion(tag, horizon, float(cur.t), float(r_max), float(r_min), float(v_inf),
                       _count_excursions(log), ev)
