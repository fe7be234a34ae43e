"""Shared context, tolerances and error types."""
from __future__ import annotations

import math
from dataclasses import dataclass, field


class NearcolError(Exception):
    """Base class for every error raised by the package."""

    code = "NearcolError"

    def to_dict(self) -> dict:
        return {"error": type(self).__name__, "module": self.origin(), "message": str(self)}

    def origin(self) -> str:
        """Package module that raised the error (the innermost nearcol frame)."""
        mod = type(self).__module__
        tb = self.__traceback__
        while tb is not None:
            name = tb.tb_frame.f_globals.get("__name__", "")
            if name.startswith("nearcol."):
                mod = name
            tb = tb.tb_next
        return mod.split(".")[-1]


class ParameterError(NearcolError, ValueError):
    """An input violates a documented precondition."""


class NumericFailure(NearcolError, RuntimeError):
    """A computation ran but could not produce a valid answer."""


class NonPositiveShiftedEnergy(ParameterError):
    pass


class Unsupported(ParameterError):
    pass


@dataclass(frozen=True)
class Tolerances:
    abs_tol: float = 1e-12
    rel_tol: float = 1e-12
    event_tol: float = 1e-12
    root_tol: float = 1e-10
    max_steps: int = 10_000_000

    def __post_init__(self):
        for name in ("abs_tol", "rel_tol", "event_tol", "root_tol"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive")
        if self.max_steps < 1:
            raise ParameterError("max_steps must be >= 1")


DEFAULT_TOLERANCES = Tolerances()


def shifted_energy(mu: float, h: float) -> float:
    return h + (1.0 - mu) * (1.0 + 0.5 * (1.0 - mu))


@dataclass(frozen=True)
class EnergyContext:
    """Mass ratio, rotating-frame energy and the constants derived from them.

    ``g`` is the energy seen from Jupiter after the constant shift and ``xi``
    the Levi-Civita length scale ``(2 g)**-0.5``.
    """

    mu: float
    h: float
    g: float = field(init=False)
    xi: float = field(init=False)

    def __post_init__(self):
        if not (0.0 <= self.mu <= 0.5):
            raise ParameterError(f"mu must lie in [0, 1/2], got {self.mu}")
        g = shifted_energy(self.mu, self.h)
        if not g > 0.0:
            raise NonPositiveShiftedEnergy(f"shifted energy g = {g} is not positive")
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "xi", 1.0 / math.sqrt(2.0 * g))

    @property
    def jupiter(self) -> tuple[float, float]:
        return (1.0 - self.mu, 0.0)

    @property
    def sun(self) -> tuple[float, float]:
        return (-self.mu, 0.0)

    def with_energy(self, h: float) -> "EnergyContext":
        return EnergyContext(self.mu, h)


def make_context(mu: float, h: float) -> EnergyContext:
    """Build an EnergyContext.

    ``mu = 0`` is accepted so that the Kepler limit can be run through the
    same code paths; the physical range is ``0 < mu <= 1/2``.
    """
    return EnergyContext(float(mu), float(h))


def wrap_angle(a):
    """Map angles into (-pi, pi]."""
    import numpy as np

    w = np.mod(np.asarray(a, dtype=float) + np.pi, 2.0 * np.pi) - np.pi
    w = np.where(w == -np.pi, np.pi, w)
    return float(w) if np.ndim(w) == 0 else w


def angle_diff(a, b):
    """Wrapped difference a - b in (-pi, pi]."""
    import numpy as np

    return wrap_angle(np.asarray(a) - np.asarray(b))


def default_threads() -> int:
    import os

    env = os.environ.get("NEARCOL_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ParameterError(f"NEARCOL_THREADS={env!r} is not an integer") from None
    return os.cpu_count() or 1


def parallel_map(fn, items, threads: int | None = None) -> list:
    """Ordered map over ``items``; compiled kernels release the GIL."""
    items = list(items)
    n = threads or default_threads()
    if n <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
