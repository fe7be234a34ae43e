"""Sampled section curves written as graphs over the section angle."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .core import NumericFailure, ParameterError
from .dynamics import SectionSpec

CSV_SCHEMA = "nearcol-curve/1"


class NonGraph(NumericFailure):
    pass


@dataclass
class SectionCurve:
    """Samples (theta, R, Theta) on a section, ordered by increasing theta.

    ``theta`` is unwrapped (strictly increasing), so a curve may extend past
    pi; use :meth:`wrap_shift` to move it as a whole.
    """

    section: SectionSpec
    theta: np.ndarray
    R: np.ndarray
    Theta: np.ndarray
    meta: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        self.R = np.asarray(self.R, dtype=float)
        self.Theta = np.asarray(self.Theta, dtype=float)
        if not (self.theta.shape == self.R.shape == self.Theta.shape):
            raise ParameterError("sample arrays must have equal length")
        if self.theta.size >= 2 and not np.all(np.diff(self.theta) > 0):
            raise NonGraph("theta samples are not strictly increasing")
        self._iR = None
        self._iT = None

    @classmethod
    def from_samples(cls, section, theta, R, Theta, meta=None, extra=None, sort=True):
        """Build from samples in parameter order: unwrap, check monotonicity, sort."""
        theta = np.unwrap(np.asarray(theta, dtype=float))
        d = np.diff(theta)
        if theta.size >= 2 and not (np.all(d > 0) or np.all(d < 0)):
            raise NonGraph("the section angle is not monotone along the parameter")
        order = np.argsort(theta) if sort else np.arange(theta.size)
        extra = {k: np.asarray(v)[order] for k, v in (extra or {}).items()}
        return cls(section, theta[order], np.asarray(R)[order], np.asarray(Theta)[order],
                   dict(meta or {}), extra)

    def __len__(self):
        return self.theta.size

    def _interp(self):
        if self._iR is None:
            self._iR = PchipInterpolator(self.theta, self.R, extrapolate=False)
            self._iT = PchipInterpolator(self.theta, self.Theta, extrapolate=False)
        return self._iR, self._iT

    def R_of(self, theta):
        return self._interp()[0](self._fold(theta))

    def Theta_of(self, theta):
        return self._interp()[1](self._fold(theta))

    def dTheta(self, theta):
        return self._interp()[1].derivative()(self._fold(theta))

    def dR(self, theta):
        return self._interp()[0].derivative()(self._fold(theta))

    def _fold(self, theta):
        """Shift angles by multiples of 2 pi into the sampled range when possible."""
        th = np.asarray(theta, dtype=float)
        lo, hi = self.theta[0], self.theta[-1]
        k = np.floor((th - lo) / (2 * math.pi))
        shifted = th - 2 * math.pi * k
        return np.where((th >= lo) & (th <= hi), th, shifted)

    @property
    def range(self) -> tuple[float, float]:
        return float(self.theta[0]), float(self.theta[-1])

    def wrap_shift(self, k: int) -> "SectionCurve":
        return SectionCurve(self.section, self.theta + 2 * math.pi * k, self.R, self.Theta,
                            dict(self.meta), dict(self.extra))

    def restrict(self, lo: float, hi: float) -> "SectionCurve":
        m = (self.theta >= lo) & (self.theta <= hi)
        return SectionCurve(self.section, self.theta[m], self.R[m], self.Theta[m],
                            dict(self.meta), {k: v[m] for k, v in self.extra.items()})

    def reflected(self, meta=None) -> "SectionCurve":
        """Image under (theta, R, Theta) -> (-theta, -R, Theta)."""
        sign = {"R>0": "R<0", "R<0": "R>0", "both": "both"}[self.section.sign]
        sec = SectionSpec(self.section.kind, sign, self.section.param, self.section.check)
        return SectionCurve(sec, -self.theta[::-1], -self.R[::-1], self.Theta[::-1],
                            dict(meta if meta is not None else self.meta),
                            {k: v[::-1] for k, v in self.extra.items()})

    def to_csv(self, path) -> None:
        from .io import write_csv
        write_csv(path, ["theta", "R", "Theta"], np.column_stack([self.theta, self.R, self.Theta]))

    def to_json(self) -> dict:
        return {
            "schema_version": CSV_SCHEMA,
            "section": {"kind": self.section.kind, "sign": self.section.sign,
                        "param": self.section.param},
            "meta": self.meta,
            "theta": self.theta.tolist(), "R": self.R.tolist(), "Theta": self.Theta.tolist(),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), allow_nan=False)
