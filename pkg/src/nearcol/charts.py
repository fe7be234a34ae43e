"""Coordinate charts of the rotating problem and the maps between them.

Every chart stores four coordinates; ``PhasePoint.t`` is always physical
time. Conversions are routed along the shortest path of elementary maps so
that Jupiter-centred charts never pass through the centre-of-mass frame.

Natural conserved quantity returned by :func:`energy`, and how it relates
to the rotating-frame energy ``h``::

    RotCartCM, RotPolarCM, RotPolarSun, RotPolarJup, McGeheeInf   value = h
    NonRotPolarCM                                                 value = h
    RotCartJup                                                    value = g = h + (1-mu)(1+(1-mu)/2)
    LeviCivita, StraightenedLC     value = xi^2 |z|^2 (G - g), zero on the level
    McGeheeSun                     value = rbar (H - h), zero on the level
"""
from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, replace

import numpy as np

from .core import EnergyContext, ParameterError, NumericFailure, wrap_angle


class OutOfDomain(ParameterError):
    pass


class BranchRequired(ParameterError):
    pass


class OutsideValidity(ParameterError):
    pass


class CollisionSingularity(NumericFailure):
    pass


class Chart(enum.IntEnum):
    RotCartCM = 0
    RotPolarCM = 1
    RotPolarSun = 2
    RotPolarJup = 3
    RotCartJup = 4
    LeviCivita = 5
    StraightenedLC = 6
    McGeheeSun = 7
    McGeheeInf = 8
    NonRotPolarCM = 9


# which coordinate slots hold angles, for wrapping and error measures
ANGLE_SLOTS = {
    Chart.RotPolarCM: (1,), Chart.RotPolarSun: (1,), Chart.RotPolarJup: (1,),
    Chart.McGeheeSun: (1,), Chart.McGeheeInf: (1,), Chart.NonRotPolarCM: (1,),
}


@dataclass(frozen=True)
class PhasePoint:
    chart: Chart
    x: tuple
    t: float = 0.0

    def __post_init__(self):
        x = tuple(float(v) for v in self.x)
        if len(x) != 4:
            raise ParameterError("a phase point has four coordinates")
        if not all(math.isfinite(v) for v in x):
            raise ParameterError(f"non-finite coordinates {x}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "chart", Chart(self.chart))

    @property
    def state(self) -> np.ndarray:
        return np.array(self.x)

    def __getitem__(self, i):
        return self.x[i]


def _wrap(x):
    return wrap_angle(x)


# --- elementary maps -----------------------------------------------------------

def _cart_to_polar(q1, q2, p1, p2):
    r = np.hypot(q1, q2)
    if np.any(r == 0):
        raise OutOfDomain("polar chart undefined at r = 0")
    th = np.arctan2(q2, q1)
    R = (q1 * p1 + q2 * p2) / r
    Th = q1 * p2 - q2 * p1
    return r, th, R, Th


def _polar_to_cart(r, th, R, Th):
    if np.any(np.asarray(r) <= 0):
        raise OutOfDomain("polar radius must be positive")
    c, s = np.cos(th), np.sin(th)
    return r * c, r * s, R * c - Th / r * s, R * s + Th / r * c


def _cm_to_polarcm(x, ctx, t, br):
    return _cart_to_polar(*x)


def _polarcm_to_cm(x, ctx, t, br):
    return _polar_to_cart(*x)


def _cm_to_jupcart(x, ctx, t, br):
    a = 1.0 - ctx.mu
    return x[0] - a, x[1], x[2], x[3] - a


def _jupcart_to_cm(x, ctx, t, br):
    a = 1.0 - ctx.mu
    return x[0] + a, x[1], x[2], x[3] + a


def _cm_to_sunpolar(x, ctx, t, br):
    return _cart_to_polar(x[0] + ctx.mu, x[1], x[2], x[3])


def _sunpolar_to_cm(x, ctx, t, br):
    q1, q2, p1, p2 = _polar_to_cart(*x)
    return q1 - ctx.mu, q2, p1, p2


def _jupcart_to_juppolar(x, ctx, t, br):
    return _cart_to_polar(*x)


def _juppolar_to_jupcart(x, ctx, t, br):
    return _polar_to_cart(*x)


def lc_to_cart(z1, z2, w1, w2, xi):
    """Levi-Civita map: q = 2 z^2, p = w / (xi conj(z)) in complex notation."""
    n2 = z1 * z1 + z2 * z2
    if np.any(n2 == 0):
        raise CollisionSingularity("Levi-Civita point on the collision circle has no (q, p)")
    q1 = 2.0 * (z1 * z1 - z2 * z2)
    q2 = 4.0 * z1 * z2
    # w / conj(z) = w z / |z|^2
    p1 = (w1 * z1 - w2 * z2) / (xi * n2)
    p2 = (w1 * z2 + w2 * z1) / (xi * n2)
    return q1, q2, p1, p2


def cart_to_lc(q1, q2, p1, p2, xi, branch=None):
    """Inverse Levi-Civita map.

    ``branch`` is ``"upper"`` (z2 >= 0, and z1 > 0 on the positive q1 axis),
    ``"lower"`` (its negative) or a reference ``(z1, z2)`` whose nearest root
    is returned. Without a branch the ray q2 = 0, q1 > 0 is ambiguous.
    """
    q1 = np.asarray(q1, dtype=float)
    q2 = np.asarray(q2, dtype=float)
    if np.any((q1 == 0) & (q2 == 0)):
        raise CollisionSingularity("q = 0 maps to the whole collision circle")
    zc = np.sqrt((q1 + 1j * q2) / 2.0)  # principal root, Re >= 0
    if branch is None:
        if np.any((q2 == 0) & (q1 > 0)):
            raise BranchRequired("q2 = 0, q1 > 0 needs an explicit Levi-Civita branch")
        branch = "upper"
    if isinstance(branch, str):
        if branch not in ("upper", "lower"):
            raise ParameterError(f"unknown branch {branch!r}")
        flip = (zc.imag < 0) | ((zc.imag == 0) & (zc.real < 0))
        zc = np.where(flip, -zc, zc)
        if branch == "lower":
            zc = -zc
    else:
        ref = complex(branch[0], branch[1])
        zc = np.where((zc * np.conj(ref)).real < 0, -zc, zc)
    p = p1 + 1j * np.asarray(p2)
    w = xi * np.conj(zc) * p
    return zc.real, zc.imag, w.real, w.imag


def _jupcart_to_lc(x, ctx, t, br):
    return cart_to_lc(*x, ctx.xi, branch=br)


def _lc_to_jupcart(x, ctx, t, br):
    return lc_to_cart(*x, ctx.xi)


SQ2 = math.sqrt(2.0)


def _lc_to_straight(x, ctx, t, br):
    z1, z2, w1, w2 = x
    return (z1 - w1) / SQ2, (z2 - w2) / SQ2, (z1 + w1) / SQ2, (z2 + w2) / SQ2


def _straight_to_lc(x, ctx, t, br):
    s1, s2, u1, u2 = x
    return (s1 + u1) / SQ2, (s2 + u2) / SQ2, (u1 - s1) / SQ2, (u2 - s2) / SQ2


def _sunpolar_to_mcg(x, ctx, t, br):
    r, th, R, Th = x
    mu = ctx.mu
    sr = np.sqrt(r)
    v = (R + mu * np.sin(th)) * sr
    u = (Th - r * r + mu * r * np.cos(th)) / sr
    return r, th, v, u


def _mcg_to_sunpolar(x, ctx, t, br):
    r, th, v, u = x
    if np.any(np.asarray(r) <= 0):
        raise CollisionSingularity("McGehee point on the collision manifold has no polar image")
    mu = ctx.mu
    sr = np.sqrt(r)
    return r, th, v / sr - mu * np.sin(th), u * sr + r * r - mu * r * np.cos(th)


def _polarcm_to_inf(x, ctx, t, br):
    r, th, R, Th = x
    return np.sqrt(2.0 / r), th, R, Th


def _inf_to_polarcm(x, ctx, t, br):
    xx, th, R, Th = x
    if np.any(np.asarray(xx) <= 0):
        raise CollisionSingularity("x = 0 is infinity")
    return 2.0 / (xx * xx), th, R, Th


def _polarcm_to_nonrot(x, ctx, t, br):
    r, th, R, Th = x
    return r, th + t, R, Th


def _nonrot_to_polarcm(x, ctx, t, br):
    r, th, R, Th = x
    return r, th - t, R, Th


_EDGES = {
    (Chart.RotCartCM, Chart.RotPolarCM): _cm_to_polarcm,
    (Chart.RotPolarCM, Chart.RotCartCM): _polarcm_to_cm,
    (Chart.RotCartCM, Chart.RotCartJup): _cm_to_jupcart,
    (Chart.RotCartJup, Chart.RotCartCM): _jupcart_to_cm,
    (Chart.RotCartCM, Chart.RotPolarSun): _cm_to_sunpolar,
    (Chart.RotPolarSun, Chart.RotCartCM): _sunpolar_to_cm,
    (Chart.RotCartJup, Chart.RotPolarJup): _jupcart_to_juppolar,
    (Chart.RotPolarJup, Chart.RotCartJup): _juppolar_to_jupcart,
    (Chart.RotCartJup, Chart.LeviCivita): _jupcart_to_lc,
    (Chart.LeviCivita, Chart.RotCartJup): _lc_to_jupcart,
    (Chart.LeviCivita, Chart.StraightenedLC): _lc_to_straight,
    (Chart.StraightenedLC, Chart.LeviCivita): _straight_to_lc,
    (Chart.RotPolarSun, Chart.McGeheeSun): _sunpolar_to_mcg,
    (Chart.McGeheeSun, Chart.RotPolarSun): _mcg_to_sunpolar,
    (Chart.RotPolarCM, Chart.McGeheeInf): _polarcm_to_inf,
    (Chart.McGeheeInf, Chart.RotPolarCM): _inf_to_polarcm,
    (Chart.RotPolarCM, Chart.NonRotPolarCM): _polarcm_to_nonrot,
    (Chart.NonRotPolarCM, Chart.RotPolarCM): _nonrot_to_polarcm,
}


def _route(src: Chart, dst: Chart) -> list:
    prev = {src: None}
    queue = deque([src])
    while queue:
        c = queue.popleft()
        if c == dst:
            break
        for (a, b) in _EDGES:
            if a == c and b not in prev:
                prev[b] = c
                queue.append(b)
    path = [dst]
    while path[-1] != src:
        path.append(prev[path[-1]])
    return path[::-1]


_ROUTES = {(a, b): _route(a, b) for a in Chart for b in Chart}


def convert_state(x, src: Chart, dst: Chart, ctx: EnergyContext, t=0.0, branch=None):
    """Convert raw coordinates (tuple of four scalars or arrays)."""
    src, dst = Chart(src), Chart(dst)
    path = _ROUTES[(src, dst)]
    y = tuple(x)
    for a, b in zip(path[:-1], path[1:]):
        y = _EDGES[(a, b)](y, ctx, t, branch)
    if dst in ANGLE_SLOTS:
        y = list(y)
        for i in ANGLE_SLOTS[dst]:
            y[i] = _wrap(y[i])
        y = tuple(y)
    return y


def convert(p: PhasePoint, target: Chart, ctx: EnergyContext, branch=None) -> PhasePoint:
    """Express ``p`` in chart ``target``; the physical time stamp is kept."""
    y = convert_state(p.x, p.chart, target, ctx, t=p.t, branch=branch)
    return PhasePoint(target, tuple(float(v) for v in y), p.t)


def coordinate_error(a: PhasePoint, b: PhasePoint) -> float:
    """Max coordinate difference, wrapping angle slots."""
    if a.chart != b.chart:
        raise ParameterError("points are in different charts")
    d = np.abs(np.array(a.x) - np.array(b.x))
    for i in ANGLE_SLOTS.get(a.chart, ()):
        d[i] = abs(wrap_angle(a.x[i] - b.x[i]))
    return float(d.max())


# --- energies ------------------------------------------------------------------

def hamiltonian_cm(q1, q2, p1, p2, mu):
    """Rotating-frame Hamiltonian in centre-of-mass Cartesian coordinates."""
    r1 = np.hypot(q1 + mu, q2)
    r2 = np.hypot(q1 - 1.0 + mu, q2)
    if np.any(r1 == 0) or np.any((r2 == 0) & (mu > 0)):
        raise CollisionSingularity("Hamiltonian evaluated at a collision")
    with np.errstate(divide="ignore"):
        jup = np.where(r2 > 0, mu / np.where(r2 > 0, r2, 1.0), 0.0) if mu > 0 else 0.0
    return 0.5 * (p1 * p1 + p2 * p2) - (q1 * p2 - q2 * p1) - (1.0 - mu) / r1 - jup


def _sun_correction(q1, q2):
    """F(q) = 1/|q + e1| - 1 + q1, the O(|q|^2) part of the Sun potential seen from Jupiter."""
    d = np.hypot(q1 + 1.0, q2)
    return 1.0 / d - 1.0 + q1


def hamiltonian_jupcart(q1, q2, p1, p2, mu):
    """Jupiter-centred Cartesian Hamiltonian shifted by (1-mu)(1+(1-mu)/2)."""
    r = np.hypot(q1, q2)
    if np.any(r == 0):
        raise CollisionSingularity("Jupiter collision")
    return (0.5 * (p1 * p1 + p2 * p2) - (q1 * p2 - q2 * p1) - mu / r
            - (1.0 - mu) * _sun_correction(q1, q2))


def lc_hamiltonian(z1, z2, w1, w2, mu, xi):
    """Regularised Hamiltonian, equal to xi^2 |z|^2 (G - g); vanishes on the energy level."""
    n2 = z1 * z1 + z2 * z2
    q1 = 2.0 * (z1 * z1 - z2 * z2)
    q2 = 4.0 * z1 * z2
    return (0.5 * (w1 * w1 + w2 * w2) - 0.5 * n2 - 0.5 * xi * xi * mu
            - 2.0 * xi * n2 * (z1 * w2 - z2 * w1)
            - xi * xi * n2 * (1.0 - mu) * _sun_correction(q1, q2))


def mcgehee_sun_energy(r, th, v, u, mu, h):
    """rbar (H - h) written in McGehee variables; regular at rbar = 0."""
    D = 1.0 + r * r - 2.0 * r * np.cos(th)
    return (-r * h + 0.5 * (v * v + u * u) - 0.5 * r**3 - 1.0 + mu
            + mu * r * (-0.5 * mu + r * np.cos(th) - 1.0 / np.sqrt(D)))


def energy(p: PhasePoint, ctx: EnergyContext) -> float:
    """The chart's natural conserved quantity (see the module docstring)."""
    c = p.chart
    mu = ctx.mu
    if c == Chart.LeviCivita:
        return float(lc_hamiltonian(*p.x, mu, ctx.xi))
    if c == Chart.StraightenedLC:
        return float(lc_hamiltonian(*_straight_to_lc(p.x, ctx, p.t, None), mu, ctx.xi))
    if c == Chart.McGeheeSun:
        return float(mcgehee_sun_energy(*p.x, mu, ctx.h))
    if c == Chart.RotCartJup:
        return float(hamiltonian_jupcart(*p.x, mu))
    if c == Chart.RotPolarJup:
        return float(hamiltonian_jupcart(*_juppolar_to_jupcart(p.x, ctx, p.t, None), mu)
                     - (1.0 - mu) * (1.0 + 0.5 * (1.0 - mu)))
    if c == Chart.McGeheeInf:
        x, th, R, Th = p.x
        return float(0.5 * R * R + Th * Th * x**4 / 8.0 - Th - 0.5 * x * x
                     - infinity_potential(x, th, mu))
    y = convert_state(p.x, c, Chart.RotCartCM, ctx, t=p.t)
    return float(hamiltonian_cm(*y, mu))


def recovered_h(p: PhasePoint, ctx: EnergyContext) -> float:
    """Rotating-frame energy of ``p`` computed from its coordinates alone."""
    c = p.chart
    mu = ctx.mu
    shift = (1.0 - mu) * (1.0 + 0.5 * (1.0 - mu))
    if c in (Chart.LeviCivita, Chart.StraightenedLC):
        y = p.x if c == Chart.LeviCivita else _straight_to_lc(p.x, ctx, p.t, None)
        return float(hamiltonian_jupcart(*lc_to_cart(*y, ctx.xi), mu) - shift)
    if c == Chart.RotCartJup:
        return float(hamiltonian_jupcart(*p.x, mu) - shift)
    if c == Chart.McGeheeSun:
        return float(hamiltonian_cm(*convert_state(p.x, c, Chart.RotCartCM, ctx), mu))
    return energy(p, ctx)


def infinity_potential(x, th, mu):
    """Perturbing potential at radius 2/x^2 and rotating angle th.

    Equals (1-mu)/r_sun + mu/r_jup - 1/r written so that it is smooth at x = 0.
    """
    x2 = x * x
    c = np.cos(th)
    a = 1.0 + x2 * mu * c + 0.25 * x2 * x2 * mu * mu
    b = 1.0 - x2 * (1.0 - mu) * c + 0.25 * x2 * x2 * (1.0 - mu) ** 2
    return 0.5 * x2 * ((1.0 - mu) / np.sqrt(a) + mu / np.sqrt(b) - 1.0)


def straighten_leading(zw: PhasePoint) -> PhasePoint:
    """Linear-order straightening s = (z - w)/sqrt2, u = (z + w)/sqrt2."""
    if zw.chart != Chart.LeviCivita:
        raise ParameterError("straighten_leading expects a Levi-Civita point")
    z1, z2, w1, w2 = zw.x
    if max(math.hypot(z1, z2), math.hypot(w1, w2)) >= 0.1:
        raise OutsideValidity("|z| and |w| must be below 0.1")
    return PhasePoint(Chart.StraightenedLC, _lc_to_straight(zw.x, None, zw.t, None), zw.t)


def unstraighten_leading(su: PhasePoint) -> PhasePoint:
    if su.chart != Chart.StraightenedLC:
        raise ParameterError("expected a straightened point")
    return PhasePoint(Chart.LeviCivita, _straight_to_lc(su.x, None, su.t, None), su.t)


def reflect(p: PhasePoint) -> PhasePoint:
    """The time-reversal symmetry of the rotating problem, in any chart.

    Cartesian: (q1, q2, p1, p2) -> (q1, -q2, -p1, p2). Polar-type charts:
    (r, th, R, Th) -> (r, -th, -R, Th). McGehee-Sun: (r, th, v, u) -> (r, -th, -v, u).
    Levi-Civita: (z1, z2, w1, w2) -> (z1, -z2, -w1, w2).
    """
    a, b, c, d = p.x
    if p.chart in (Chart.RotCartCM, Chart.RotCartJup, Chart.LeviCivita):
        y = (a, -b, -c, d)
    elif p.chart == Chart.StraightenedLC:
        # z -> conj(z), w -> -conj(w) swaps s and u up to conjugation
        y = (c, -d, a, -b)
    elif p.chart == Chart.NonRotPolarCM:
        raise ParameterError("the reflection is a symmetry of the rotating frame only")
    else:
        y = (a, wrap_angle(-b), -c, d)
    return PhasePoint(p.chart, y, -p.t)


def solve_radial_momentum(chart: Chart, r: float, theta: float, Theta: float,
                          ctx: EnergyContext, sign: float) -> float:
    """Radial momentum putting a polar-type point on the energy level h.

    The Hamiltonian is quadratic in R, so three evaluations fix it exactly.
    Raises OutOfDomain when the level has no real solution there.
    """
    if chart not in (Chart.RotPolarCM, Chart.RotPolarSun, Chart.RotPolarJup):
        raise ParameterError(f"radial momentum solve needs a rotating polar chart, got {chart}")
    f = [energy(PhasePoint(chart, (r, theta, R, Theta)), ctx) - ctx.h for R in (-1.0, 0.0, 1.0)]
    a = 0.5 * (f[2] + f[0]) - f[1]
    b = 0.5 * (f[2] - f[0])
    c = f[1]
    disc = b * b - 4.0 * a * c
    if disc < 0:
        raise OutOfDomain("energy level not reached at this point of the section")
    return (-b + math.copysign(1.0, sign) * math.sqrt(disc)) / (2.0 * a)
