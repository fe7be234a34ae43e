"""Manifolds of parabolic infinity: Hamilton-Jacobi correction and section curves."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .charts import Chart, PhasePoint, infinity_potential, reflect, solve_radial_momentum
from .core import (DEFAULT_TOLERANCES, EnergyContext, NumericFailure, ParameterError,
                   Tolerances, parallel_map)
from .curves import SectionCurve
from .dynamics import SectionSpec, flow_to_section, jupiter_section, outer_section
from .kepler import collision_parameters, t_of_w, w_of_t

__all__ = ["GridFourierFunction", "HJSolution", "TailDivergence", "NoConvergence",
           "DomainTooSmall", "SeedInvalid", "g_operator", "g_operator_at", "g_operator_quad",
           "hj_solve", "hj_domain_u_max", "hj_strip_width", "infinity_manifold_curve",
           "THETA0_WINDOW_CURVES", "THETA0_WINDOW_ROOTS", "R_FAR"]

SQRT3 = math.sqrt(3.0)
# admissible angular momenta: the curve construction and the transversality theorem
# state different windows; both are kept, neither is enforced by the code below
THETA0_WINDOW_CURVES = ((1.0 - SQRT3) / 2.0, (1.0 + SQRT3) / 2.0)
THETA0_WINDOW_ROOTS = ((1.0 - SQRT3) / 3.0, (1.0 + SQRT3) / 3.0)
R_FAR = 1e3
NORM_EXPONENT = 1.0 / 3.0
NORM_CUTOFF = 1.0


class TailDivergence(NumericFailure):
    pass


class NoConvergence(NumericFailure):
    pass


class DomainTooSmall(ParameterError):
    pass


class SeedInvalid(ParameterError):
    pass


# --------------------------------------------------------------------------
# grid functions


def _sup_a(g, u, a, kc=NORM_CUTOFF):
    w = np.where(np.abs(u) > kc, np.abs(u) ** a, 1.0)
    return np.max(w[:, None] * np.abs(g), axis=0)


@dataclass
class GridFourierFunction:
    """Samples f(u, v) = sum_k f_k(u) e^{ikv} on a grid of u values.

    ``u_grid`` is stored in increasing order, i.e. from the truncation point
    u_min up to u_max. ``modes[:, j]`` holds the coefficient of k = j - K.
    """

    u_grid: np.ndarray
    modes: np.ndarray
    sigma: float = 0.0

    def __post_init__(self):
        self.u_grid = np.asarray(self.u_grid, dtype=float)
        self.modes = np.asarray(self.modes, dtype=complex)
        if self.modes.ndim != 2 or self.modes.shape[0] != self.u_grid.size:
            raise ParameterError("modes must have shape (len(u_grid), 2K+1)")
        if self.modes.shape[1] % 2 != 1:
            raise ParameterError("need an odd number of modes")
        if np.any(np.diff(self.u_grid) <= 0):
            raise ParameterError("u_grid must be strictly increasing")

    @property
    def K(self) -> int:
        return (self.modes.shape[1] - 1) // 2

    @property
    def ks(self) -> np.ndarray:
        return np.arange(-self.K, self.K + 1)

    @classmethod
    def from_callable(cls, fn, u_grid, K: int, n_v: int | None = None, sigma: float = 0.0):
        """Sample a real function fn(u, v) (broadcasting) and keep modes |k| <= K."""
        u_grid = np.asarray(u_grid, dtype=float)
        n_v = n_v or max(4 * K, 64)
        if n_v < 2 * K + 1:
            raise ParameterError("n_v must be at least 2K+1")
        v = 2.0 * np.pi * np.arange(n_v) / n_v
        vals = np.asarray(fn(u_grid[:, None], v[None, :]), dtype=float)
        return cls(u_grid, _truncate(np.fft.fft(vals, axis=1) / n_v, K), sigma)

    def realness_defect(self) -> float:
        return float(np.max(np.abs(self.modes - np.conj(self.modes[:, ::-1])), initial=0.0))

    def values(self, v) -> np.ndarray:
        """Real values on the grid at angles v, shape (len(u_grid), len(v))."""
        v = np.atleast_1d(np.asarray(v, dtype=float))
        return np.real(self.modes @ np.exp(1j * np.outer(self.ks, v)))

    def d_v(self) -> "GridFourierFunction":
        return GridFourierFunction(self.u_grid, 1j * self.ks * self.modes, self.sigma)

    def mode_norms(self, a: float = NORM_EXPONENT) -> np.ndarray:
        """Per-mode ||f_k||_a = sup_{|u|>1} |u|^a |f_k| + sup_{|u|<=1} |f_k|."""
        u = self.u_grid
        far = np.abs(u) > NORM_CUTOFF
        out = np.zeros(self.modes.shape[1])
        if np.any(far):
            out += _sup_a(self.modes[far], u[far], a)
        if np.any(~far):
            out += np.max(np.abs(self.modes[~far]), axis=0)
        return out

    def weighted_norm(self, a: float = NORM_EXPONENT, sigma: float | None = None) -> float:
        s = self.sigma if sigma is None else sigma
        return float(np.sum(self.mode_norms(a) * np.exp(np.abs(self.ks) * s)))

    def __add__(self, other):
        return GridFourierFunction(self.u_grid, self.modes + other.modes, self.sigma)

    def __sub__(self, other):
        return GridFourierFunction(self.u_grid, self.modes - other.modes, self.sigma)

    def scale(self, c) -> "GridFourierFunction":
        return GridFourierFunction(self.u_grid, c * self.modes, self.sigma)

    def to_json(self) -> dict:
        return {"u_grid": self.u_grid.tolist(), "K": self.K, "sigma": self.sigma,
                "modes_re": self.modes.real.tolist(), "modes_im": self.modes.imag.tolist()}

    @classmethod
    def from_json(cls, d: dict) -> "GridFourierFunction":
        return cls(np.array(d["u_grid"]), np.array(d["modes_re"]) + 1j * np.array(d["modes_im"]),
                   d.get("sigma", 0.0))


def _truncate(fft_coeffs, K):
    idx = np.arange(-K, K + 1) % fft_coeffs.shape[1]
    return fft_coeffs[:, idx]


def _to_physical(modes, n_v):
    """Real values at v_j = 2 pi j / n_v from modes |k| <= K."""
    K = (modes.shape[1] - 1) // 2
    buf = np.zeros((modes.shape[0], n_v), dtype=complex)
    buf[:, np.arange(-K, K + 1) % n_v] = modes
    return np.real(np.fft.ifft(buf, axis=1) * n_v)


# --------------------------------------------------------------------------
# the inverse of (d_u - d_v)


def _moments(z, m_max=3):
    """E_m(z) = int_0^1 s^m e^{zs} ds for m = 0..m_max, elementwise in z."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1.0
    out = np.empty((m_max + 1,) + z.shape, dtype=complex)
    zs = np.where(small, z, 0.0)
    for m in range(m_max + 1):
        term = np.ones_like(zs)
        acc = term / (m + 1)
        for n in range(1, 30):
            term = term * zs / n
            acc = acc + term / (m + n + 1)
        out[m] = acc
    zl = np.where(small, 1.0, z)
    ez = np.exp(zl)
    e = (ez - 1.0) / zl
    big = [e]
    for m in range(1, m_max + 1):
        e = (ez - m * e) / zl
        big.append(e)
    for m in range(m_max + 1):
        out[m] = np.where(small, out[m], big[m])
    return out


def _interval_integral(coef, x, k):
    """int_0^x p(s) e^{-iks} ds for the cubic pieces p (scipy coefficient order)."""
    z = -1j * k[None, :] * x[:, None]
    E = _moments(z)
    acc = 0.0
    for p in range(4):
        acc = acc + coef[3 - p] * x[:, None] ** (p + 1) * E[p]
    return acc


def _powerlaw_tail(f0, L, a, k):
    """int_L^inf f0 (x/L)^(-a) e^{ik(x-L)} dx."""
    if k == 0:
        return f0 * L / (a - 1.0)
    kl = abs(k) * L
    if kl >= max(40.0, 4.0 * a):
        # asymptotic series, stopped at its smallest term
        acc, term = 0.0, -1.0 / (1j * k)
        best = abs(term)
        for n in range(60):
            acc += term
            term = term * (a + n) / (1j * k * L)
            if abs(term) >= best or abs(term) < 1e-18 * abs(acc):
                break
            best = abs(term)
        return f0 * acc
    # moderate kL: oscillatory quadrature of the model
    c, ec = quad(lambda x: (x / L) ** (-a), L, np.inf, weight="cos", wvar=k)
    s, es = quad(lambda x: (x / L) ** (-a), L, np.inf, weight="sin", wvar=k)
    return f0 * (c + 1j * s) * np.exp(-1j * k * L)


def _tail_values(f: GridFourierFunction, check: bool):
    """Contribution of u < u_grid[0] to each mode of G(f) at the first node."""
    u = f.u_grid
    ks = f.ks
    out = np.zeros(ks.size, dtype=complex)
    if u.size < 2:
        return out
    scale = max(1.0, float(np.max(np.abs(f.modes))))
    L0, L1 = abs(u[0]), abs(u[1])
    for j, k in enumerate(ks):
        f0, f1 = f.modes[0, j], f.modes[1, j]
        if abs(f0) <= 1e-15 * scale:
            continue
        if abs(f1) == 0.0 or L0 <= L1 or u[1] >= 0:
            raise TailDivergence("cannot fit a decay law at the end of the grid")
        a = math.log(abs(f1) / abs(f0)) / math.log(L0 / L1)
        if a > 20.0:
            # faster than any modest power: local exponential model
            beta = a / L0
            out[j] = f0 / (beta - 1j * k)
            continue
        if check and a <= 1.0:
            raise TailDivergence(f"mode k={k} decays like |u|^-{a:.3g}, need an exponent above 1")
        out[j] = _powerlaw_tail(f0, L0, a, k)
    return out


def _march(f: GridFourierFunction, tail: bool = True, check: bool = True):
    u = f.u_grid
    ks = f.ks.astype(float)
    spl = CubicSpline(u, f.modes, axis=0)
    h = np.diff(u)
    I = _interval_integral(spl.c, h, ks)
    ph = np.exp(1j * np.outer(h, ks))
    g = np.empty_like(f.modes)
    g[0] = _tail_values(f, check) if tail else 0.0
    for j in range(u.size - 1):
        g[j + 1] = ph[j] * (g[j] + I[j])
    return g, spl


def g_operator(f: GridFourierFunction, tail: bool = True, check: bool = True) -> GridFourierFunction:
    """Right inverse of (d_u - d_v) decaying as u -> -infinity.

    Mode by mode, g_k(u) = int_{-inf}^u f_k(s) e^{-ik(s-u)} ds. Between
    nodes f is replaced by its cubic spline and the oscillatory weight is
    integrated exactly (Filon); beyond the first node f_k is extrapolated
    by a fitted power law |u|^-a and integrated in closed form.
    """
    g, _ = _march(f, tail, check)
    return GridFourierFunction(f.u_grid, g, f.sigma)


def g_operator_at(f: GridFourierFunction, u_eval, g: GridFourierFunction | None = None,
                  tail: bool = True) -> np.ndarray:
    """Modes of G(f) at arbitrary points inside the grid, shape (len(u_eval), 2K+1)."""
    u_eval = np.atleast_1d(np.asarray(u_eval, dtype=float))
    u = f.u_grid
    if np.any(u_eval < u[0]) or np.any(u_eval > u[-1]):
        raise ParameterError("evaluation point outside the grid")
    spl = CubicSpline(u, f.modes, axis=0)
    gm = g.modes if g is not None else _march(f, tail)[0]
    j = np.clip(np.searchsorted(u, u_eval, side="right") - 1, 0, u.size - 2)
    x = u_eval - u[j]
    ks = f.ks.astype(float)
    coef = spl.c[:, j, :]
    part = _interval_integral(coef, x, ks)
    return np.exp(1j * np.outer(x, ks)) * (gm[j] + part)


def g_operator_quad(fn, u: float, k: int) -> complex:
    """Independent evaluation of int_0^inf fn(u - x) e^{ikx} dx by oscillatory quadrature."""
    def re(x):
        return float(np.real(fn(u - x)))

    def im(x):
        return float(np.imag(fn(u - x)))

    if k == 0:
        a = quad(re, 0.0, np.inf, epsabs=1e-14, epsrel=1e-12, limit=500)[0]
        b = quad(im, 0.0, np.inf, epsabs=1e-14, epsrel=1e-12, limit=500)[0]
        return complex(a, b)
    kw = dict(wvar=abs(k), epsabs=1e-14, limlst=200)
    sg = 1.0 if k > 0 else -1.0
    rc = quad(re, 0.0, np.inf, weight="cos", **kw)[0]
    rs = quad(re, 0.0, np.inf, weight="sin", **kw)[0]
    ic = quad(im, 0.0, np.inf, weight="cos", **kw)[0]
    is_ = quad(im, 0.0, np.inf, weight="sin", **kw)[0]
    # (re + i im)(cos + i sg sin)
    return complex(rc - sg * is_, sg * rs + ic)


# --------------------------------------------------------------------------
# Hamilton-Jacobi correction


def hj_domain_u_max(mu: float, nu: float, Theta0: float, kappa: float = 1.0) -> float:
    """Largest u of the domain: where the incoming parabola reaches 1 - mu + kappa mu^nu."""
    rr = 1.0 - mu + kappa * mu**nu
    d = 2.0 * rr - Theta0 * Theta0
    if d <= 0:
        raise DomainTooSmall("the parabola never reaches the Jupiter circle")
    return -math.sqrt(d) * (rr + Theta0 * Theta0) / 3.0


def hj_strip_width(mu: float, nu: float, kappa: float = 1.0) -> float:
    return 0.5 * math.log((1.0 - mu + kappa * mu**nu) / (1.0 - mu))


def _kepler_coefficients(u, Theta0):
    w = w_of_t(u, Theta0)
    r = 0.5 * (w * w + Theta0 * Theta0)
    R = w / r
    phi = 2.0 * np.arctan(w / Theta0) if Theta0 != 0.0 else np.zeros_like(w)
    return r, R, phi


@dataclass
class HJSolution:
    T1: GridFourierFunction
    F: GridFourierFunction      # F(T) at the last iterate; d_u T1 = d_v T1 + F
    Theta0: float
    mu: float
    h: float
    nu: float
    kappa: float
    residual: float
    iterations: int
    history: list = field(default_factory=list)
    v_hat_max: float = 0.0

    def d_u(self) -> GridFourierFunction:
        return self.T1.d_v() + self.F

    def norm(self) -> float:
        """Weighted norm |T|_{1/3} + |d_u T|_{4/3} + |d_v T|_{4/3} with strip width sigma."""
        a = NORM_EXPONENT
        return (self.T1.weighted_norm(a) + self.d_u().weighted_norm(a + 1.0)
                + self.T1.d_v().weighted_norm(a + 1.0))

    def manifold_point(self, u: float, v: float):
        """(r, theta, R, Theta) of the corrected unstable manifold at parameters (u, v)."""
        grid = self.T1.u_grid
        if not grid[0] <= u <= grid[-1]:
            raise ParameterError("u outside the solution grid")
        ks = self.T1.ks
        Tk = CubicSpline(grid, self.T1.modes, axis=0)(u)
        Fk = CubicSpline(grid, self.F.modes, axis=0)(u)
        e = np.exp(1j * ks * v)
        Tv = float(np.real(np.sum(1j * ks * Tk * e)))
        Tu = float(np.real(np.sum((1j * ks * Tk + Fk) * e)))
        r, R, phi = _kepler_coefficients(np.array([u]), self.Theta0)
        r, R, phi = float(r[0]), float(R[0]), float(phi[0])
        return r, v + phi, R + (Tu - self.Theta0 * Tv / r**2) / R, self.Theta0 + Tv

    def to_json(self) -> dict:
        return {"schema_version": 1, "Theta0": self.Theta0, "mu": self.mu, "h": self.h,
                "nu": self.nu, "kappa": self.kappa, "residual": self.residual,
                "iterations": self.iterations, "history": list(self.history),
                "v_hat_max": self.v_hat_max, "norm": self.norm(),
                "T1": self.T1.to_json(), "F": self.F.to_json()}


def _hj_rhs(Tm, Tum, coeffs, Vk, n_v):
    """Modes of F(T) = -(T_u - Theta0 T_v/r^2)^2/(2R^2) - T_v^2/(2r^2) + V."""
    r, R, Theta0, ks = coeffs
    K = (Tm.shape[1] - 1) // 2
    tv = _to_physical(1j * ks * Tm, n_v)
    tu = _to_physical(Tum, n_v)
    q = -((tu - Theta0 * tv / r[:, None] ** 2) ** 2) / (2.0 * R[:, None] ** 2) \
        - tv * tv / (2.0 * r[:, None] ** 2)
    return _truncate(np.fft.fft(q, axis=1) / n_v, K) + Vk


def hj_solve(ctx: EnergyContext, Theta0: float, nu: float = 0.3, kappa: float = 1.0,
             K: int = 32, n_nodes: int = 400, u_min: float = -1e5, n_v: int | None = None,
             n_pot: int = 1024, tol: float = 1e-12, max_iter: int = 100,
             margin: float = 1e-3) -> HJSolution:
    """Fixed point T = G(F(T)) for the correction of the unstable manifold of infinity.

    The grid is geometric in |u| between |u_min| and the domain bound
    u_max; the potential is sampled on ``n_pot`` angles before truncation to
    |k| <= K, products are formed on ``n_v`` angles.
    """
    if abs(Theta0) > math.sqrt(2.0) - margin:
        raise ParameterError("Theta0 too close to +-sqrt2")
    if not 0.0 < nu < 0.5:
        raise ParameterError("nu must lie in (0, 1/2)")
    mu = ctx.mu
    u_max = hj_domain_u_max(mu, nu, Theta0, kappa)
    if not (u_min < u_max < 0.0) or abs(u_min) < 10.0 * abs(u_max):
        raise DomainTooSmall("grid does not cover the domain below the Jupiter circle")
    n_v = n_v or 4 * K
    sigma = hj_strip_width(mu, nu, kappa) if mu > 0 else 0.0
    u = -np.geomspace(abs(u_min), abs(u_max), n_nodes)
    r, R, phi = _kepler_coefficients(u, Theta0)
    ks = np.arange(-K, K + 1)
    vp = 2.0 * np.pi * np.arange(n_pot) / n_pot
    x = np.sqrt(2.0 / r)
    if mu > 0:
        Vs = infinity_potential(x[:, None], vp[None, :] + phi[:, None], mu)
    else:
        Vs = np.zeros((n_nodes, n_pot))
    v_hat_max = float(np.max(np.abs(Vs)))
    Vk = _truncate(np.fft.fft(Vs, axis=1) / n_pot, K)
    coeffs = (r, R, Theta0, ks)

    T = np.zeros((n_nodes, 2 * K + 1), dtype=complex)
    Tu = np.zeros_like(T)
    history = []
    F = Vk.copy()
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        F = _hj_rhs(T, Tu, coeffs, Vk, n_v)
        f = GridFourierFunction(u, F, sigma)
        Tn = g_operator(f).modes
        Tun = 1j * ks * Tn + F
        dT = GridFourierFunction(u, Tn - T, sigma)
        change = (dT.weighted_norm(NORM_EXPONENT)
                  + GridFourierFunction(u, Tun - Tu, sigma).weighted_norm(NORM_EXPONENT + 1.0)
                  + dT.d_v().weighted_norm(NORM_EXPONENT + 1.0))
        history.append(float(change))
        T, Tu = Tn, Tun
        if not np.all(np.isfinite(T)):
            raise NoConvergence("iteration produced non-finite values")
        if change < tol:
            converged = True
            break
    if not converged:
        raise NoConvergence(f"no convergence after {max_iter} iterations (change {history[-1]:.3e})")
    Tg = GridFourierFunction(u, T, sigma)
    Fg = GridFourierFunction(u, F, sigma)
    res = _hj_residual(Tg, Fg, coeffs, Vk, n_v)
    return HJSolution(Tg, Fg, Theta0, mu, ctx.h, nu, kappa, res, it, history, v_hat_max)


def _hj_residual(Tg, Fg, coeffs, Vk, n_v, skip=3):
    """max over interior nodes and angles of |(d_u - d_v)T - F(T)| with d_u by finite differences."""
    u = Tg.u_grid
    ks = Tg.ks
    idx = np.arange(skip, u.size - skip)
    if idx.size == 0:
        return 0.0
    d = 1e-3 * np.minimum(u[idx + 1] - u[idx], u[idx] - u[idx - 1])
    off = [g_operator_at(Fg, u[idx] + s * d, Tg) for s in (-2, -1, 1, 2)]
    Tu = (off[0] - 8.0 * off[1] + 8.0 * off[2] - off[3]) / (12.0 * d[:, None])
    T = Tg.modes[idx]
    r, R, Theta0, _ = coeffs
    lhs = Tu - 1j * ks * T
    rhs = _hj_rhs(T, Tu, (r[idx], R[idx], Theta0, ks), Vk[idx], n_v)
    return float(np.max(np.abs(_to_physical(lhs - rhs, n_v))))


# --------------------------------------------------------------------------
# section curves


def _nr_angle(w, Theta0):
    """Non-rotating angle of the zero-energy Kepler orbit relative to its pericentre."""
    return 2.0 * np.arctan(w / Theta0) if Theta0 != 0.0 else np.zeros_like(np.asarray(w, float))


def _jupiter_entry_angles(offsets, Theta0, mu, nu):
    """First entry angle into |q - (1-mu) e1| = mu^nu of the incoming mu = 0 parabolas.

    The orbit with offset 0 passes through Jupiter at t = -t_c. Returns nan
    where the orbit misses the disc.
    """
    tc, _ = collision_parameters(Theta0)
    wc = math.sqrt(2.0 - Theta0 * Theta0)
    th_hit = -tc - float(_nr_angle(-wc, Theta0))
    rad = mu**nu
    ts = np.linspace(-tc - 0.5, -tc + 0.5, 2001)
    w = w_of_t(ts, Theta0)
    r = 0.5 * (w * w + Theta0 * Theta0)
    base = _nr_angle(w, Theta0) - ts

    def gap(t, dth):
        ww = w_of_t(t, Theta0)
        rr = 0.5 * (ww * ww + Theta0 * Theta0)
        a = th_hit + dth + float(_nr_angle(ww, Theta0)) - t
        return math.hypot(rr * math.cos(a) - (1.0 - mu), rr * math.sin(a)) - rad

    out = np.full(len(offsets), np.nan)
    for i, dth in enumerate(offsets):
        a = th_hit + dth + base
        g = np.hypot(r * np.cos(a) - (1.0 - mu), r * np.sin(a)) - rad
        j = np.nonzero((g[:-1] > 0) & (g[1:] <= 0))[0]
        if j.size == 0:
            continue
        t_in = brentq(gap, ts[j[0]], ts[j[0] + 1], args=(dth,), xtol=1e-15)
        ww = w_of_t(t_in, Theta0)
        rr = 0.5 * (ww * ww + Theta0 * Theta0)
        ang = th_hit + dth + float(_nr_angle(ww, Theta0)) - t_in
        out[i] = math.atan2(rr * math.sin(ang), rr * math.cos(ang) - (1.0 - mu))
    return out, th_hit


def _seed(theta0_peri, Theta0, ctx, r_far, hj=None):
    """Incoming point of the (unperturbed or corrected) unstable manifold at radius r_far."""
    w = -math.sqrt(2.0 * r_far - Theta0 * Theta0)
    t = float(t_of_w(w, Theta0))
    if hj is not None:
        u_par, v_par = t, theta0_peri - t
        r, th, _, Th = hj.manifold_point(u_par, v_par)
    else:
        r, th, Th = r_far, theta0_peri + float(_nr_angle(w, Theta0)) - t, Theta0
    th = math.remainder(th, 2.0 * math.pi)
    R = solve_radial_momentum(Chart.RotPolarCM, r, th, Th, ctx, -1.0)
    return PhasePoint(Chart.RotPolarCM, (r, th, R, Th), t)


def _to_section(p, ctx, section, direction, opts, t_max):
    return flow_to_section(p, ctx, section, direction, opts, t_max=t_max).point


def infinity_manifold_curve(ctx: EnergyContext, Theta0: float, branch: str = "u",
                            section: SectionSpec | None = None, n: int = 64, nu: float = 0.3,
                            r_far: float = R_FAR, hj: HJSolution | None = None,
                            opts: Tolerances = DEFAULT_TOLERANCES,
                            threads: int | None = None) -> SectionCurve:
    """Trace of the unstable (u) or stable (s) manifold of infinity on a section.

    Seeds lie on the zero-energy Kepler graph at radius ``r_far`` (or on
    the Hamilton-Jacobi parameterisation when ``hj`` is given). On the
    Jupiter section the seeds are those whose unperturbed orbit enters the
    circle at an angle in (-pi/4, pi/4), padded by 15%; the returned curve is
    restricted to that window. Branch u is integrated forward to the inbound
    side (R < 0), branch s uses the time-reversed seeds integrated backward to
    the outbound side (R > 0). On an outer section the seeds cover a full turn.
    """
    if branch not in ("u", "s"):
        raise ParameterError("branch must be 'u' or 's'")
    if abs(ctx.h + Theta0) > 1e-12:
        raise SeedInvalid("the energy level must satisfy h = -Theta0")
    if section is None:
        section = jupiter_section(nu, "R<0" if branch == "u" else "R>0")
    want = "R<0" if branch == "u" else "R>0"
    section = SectionSpec(section.kind, want, section.param, section.check)
    if section.kind == "SigmaBarSun":
        raise ParameterError("infinity curves are built on the Jupiter or outer sections")
    if hj is not None and abs(hj.Theta0 - Theta0) > 1e-14:
        raise SeedInvalid("HJ solution computed for a different Theta0")

    tc = collision_parameters(Theta0)[0]
    if section.kind == "SigmaGamma":
        nu = section.param
        lim = 1.15 * math.pi / 4.0
        spread = 4.0 * ctx.mu**nu * math.sqrt(2.0) / max(math.sqrt(2.0 - Theta0**2), 0.1)
        offs = np.linspace(-spread, spread, 801)
        ang, th_hit = _jupiter_entry_angles(offs, Theta0, ctx.mu, nu)
        ok = np.isfinite(ang) & (np.abs(ang) < lim)
        if not np.any(ok):
            raise SeedInvalid("no unperturbed orbit enters the Jupiter circle in the window")
        lo, hi = offs[ok].min(), offs[ok].max()
        peri = th_hit + np.linspace(lo, hi, n)
        window = (-math.pi / 4.0, math.pi / 4.0)
    else:
        if not section.param < r_far:
            raise SeedInvalid("outer section must lie inside the seed radius")
        peri = -math.pi + 2.0 * math.pi * np.arange(n) / n
        window = None

    seeds = [_seed(a, Theta0, ctx, r_far, hj) for a in peri]
    t_max = abs(seeds[0].t) + 5.0 + 2.0 * tc
    if branch == "u":
        pts = parallel_map(lambda p: _to_section(p, ctx, section, "forward", opts, t_max),
                           seeds, threads)
    else:
        pts = parallel_map(lambda p: _to_section(reflect(p), ctx, section, "backward", opts, t_max),
                           seeds, threads)
    theta = np.array([p.x[1] for p in pts])
    R = np.array([p.x[2] for p in pts])
    Th = np.array([p.x[3] for p in pts])
    t = np.array([p.t for p in pts])
    meta = {"manifold": "infinity-" + ("unstable" if branch == "u" else "stable"),
            "mu": ctx.mu, "h": ctx.h, "Theta0": Theta0, "r_far": r_far,
            "seeding": "hj" if hj is not None else "kepler"}
    if section.kind == "SigmaGamma":
        meta["nu"] = section.param
    else:
        meta["r0"] = section.param
    curve = SectionCurve.from_samples(section, theta, R, Th, meta,
                                      {"seed": np.asarray(peri), "t": t})
    if window is not None:
        lo, hi = window if branch == "u" else (-window[1], -window[0])
        curve = curve.restrict(lo, hi)
    return curve
