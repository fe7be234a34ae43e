"""Closed-form two-body (mu = 0) orbits used as oracles.

All angles are in the non-rotating frame centred at the primary of unit
mass. Jupiter sits on the unit circle at angle ``t``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .core import NearcolError, ParameterError

LAMBDA = (9.0 / 2.0) ** (1.0 / 3.0)
SQRT2 = math.sqrt(2.0)
BOUNDARY_TOL = 1e-12


class SingularAtZero(ParameterError):
    pass


class BelowPericenter(ParameterError):
    pass


class ConicClass(enum.Enum):
    ELLIPTIC = "Elliptic"
    PARABOLIC = "Parabolic"
    HYPERBOLIC = "Hyperbolic"
    OUT_OF_TABLE = "OutOfTable"


@dataclass(frozen=True)
class ParabolicState:
    r: float
    theta: float
    R: float
    Theta: float

    def energy(self) -> float:
        return 0.5 * (self.R**2 + self.Theta**2 / self.r**2) - 1.0 / self.r


def classify_conic(h: float, Theta: float) -> ConicClass:
    """Conic type of an orbit through Jupiter's circle, from (h, Theta).

    Equality with the parabolic boundary ``Theta = -h`` is detected with an
    absolute tolerance and reported as parabolic.
    """
    if abs(Theta + h) <= BOUNDARY_TOL and -SQRT2 - BOUNDARY_TOL <= h <= SQRT2 + BOUNDARY_TOL:
        return ConicClass.PARABOLIC
    if h > -SQRT2 and Theta > -h:
        return ConicClass.HYPERBOLIC
    disc = 2.0 * h + 3.0
    if disc >= 0.0:
        lo = 1.0 - math.sqrt(disc)
        if -1.5 < h < -SQRT2 and lo <= Theta <= 1.0 + math.sqrt(disc):
            return ConicClass.ELLIPTIC
        if -SQRT2 <= h < SQRT2 and lo <= Theta < -h:
            return ConicClass.ELLIPTIC
    return ConicClass.OUT_OF_TABLE


def t_of_w(w, Theta0: float):
    w = np.asarray(w, dtype=float)
    return 0.5 * (w**3 / 3.0 + Theta0**2 * w)


def w_of_t(t, Theta0: float):
    """Real root of ``w**3 + 3 Theta0**2 w = 6 t``.

    Cardano's formula is rearranged as ``6|t| / (A**2 + Theta0**2 + Theta0**4/A**2)``,
    which has no cancellation for small ``t``; one Newton step polishes it.
    """
    scalar = np.ndim(t) == 0
    t = np.asarray(t, dtype=float)
    th2 = Theta0 * Theta0
    at = np.abs(t)
    big = np.cbrt(3.0 * at + np.sqrt(9.0 * t * t + th2**3))
    with np.errstate(invalid="ignore", divide="ignore"):
        w = 6.0 * at / (big * big + th2 + np.where(big > 0, th2 * th2 / big**2, 0.0))
    w = np.where(at == 0.0, 0.0, w) * np.sign(t)
    dt = 0.5 * (w * w + th2)
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.where(dt > 0, (t_of_w(w, Theta0) - t) / dt, 0.0)
    w = w - corr
    return float(w) if scalar else w


def _check_theta0(Theta0: float) -> None:
    if abs(Theta0) > SQRT2 + 1e-15:
        raise ParameterError(f"Theta0 = {Theta0} outside [-sqrt2, sqrt2]")


def parabolic_state(t: float, theta0: float, Theta0: float) -> ParabolicState:
    """State at time ``t`` of the zero-energy orbit with angular momentum Theta0.

    For ``Theta0 != 0`` the pericentre (``r = Theta0**2/2``) is reached at
    ``t = 0`` with angle ``theta0``. The complex-log angle of the closed form
    reduces to ``theta0 + 2 atan(w/Theta0)``, continuous in ``t``.
    For ``Theta0 = 0`` the orbit is the collision ray at angle ``theta0``
    and ``t = 0`` is the collision itself.
    """
    _check_theta0(Theta0)
    if Theta0 == 0.0:
        if t == 0.0:
            raise SingularAtZero("the radial parabolic orbit collides at t = 0")
        at = abs(t)
        return ParabolicState(LAMBDA * at ** (2.0 / 3.0), theta0,
                              math.copysign(math.sqrt(2.0 / LAMBDA), t) * at ** (-1.0 / 3.0), 0.0)
    w = w_of_t(t, Theta0)
    d = w * w + Theta0 * Theta0
    return ParabolicState(0.5 * d, theta0 + 2.0 * math.atan(w / Theta0), 2.0 * w / d, Theta0)


def collision_parameters(Theta0: float) -> tuple[float, float]:
    """Time and pericentre angle of the parabolic orbit that meets Jupiter.

    The orbit ``parabolic_state(t, theta_c, Theta0)`` reaches radius 1 at
    ``t = t_c`` exactly when Jupiter is there (angle ``t_c``).
    """
    _check_theta0(Theta0)
    wc = math.sqrt(max(2.0 - Theta0 * Theta0, 0.0))
    tc = wc * (1.0 + Theta0 * Theta0) / 3.0
    if Theta0 == 0.0:
        return tc, tc
    return tc, tc - 2.0 * math.atan(wc / Theta0)


def kepler_infinity_graph(r_hat, Theta0: float, branch: str):
    """Radial momentum of the parabolic orbit at radius ``r_hat``.

    Branch ``"s"`` (outgoing, approaching infinity forward in time) has
    ``R > 0``; branch ``"u"`` (incoming) has ``R < 0``.
    """
    r_hat = np.asarray(r_hat, dtype=float)
    if np.any(r_hat <= 0.5 * Theta0 * Theta0):
        raise BelowPericenter("radius at or below the pericentre")
    sign = {"s": 1.0, "u": -1.0}.get(branch)
    if sign is None:
        raise ParameterError(f"branch must be 's' or 'u', got {branch!r}")
    R = sign * np.sqrt(2.0 * r_hat - Theta0 * Theta0) / r_hat
    if R.ndim == 0:
        return float(R), float(Theta0)
    return R, np.full_like(R, Theta0)


def kepler_elements(h_inertial: float, Theta: float) -> tuple[float, float]:
    """Semi-major axis and eccentricity of a bound two-body orbit."""
    if h_inertial >= 0:
        raise NearcolError("orbit is not bound")
    a = -1.0 / (2.0 * h_inertial)
    e = math.sqrt(max(0.0, 1.0 + 2.0 * h_inertial * Theta * Theta))
    return a, e
