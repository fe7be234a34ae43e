"""Compiled vector fields, event functions and the Dormand-Prince integrator.

State vectors have five slots: the four chart coordinates and physical time.
Chart ids match :class:`nearcol.charts.Chart`.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

CART_CM = 0
POLAR_CM = 1
POLAR_SUN = 2
POLAR_JUP = 3
CART_JUP = 4
LEVI_CIVITA = 5
MCGEHEE_SUN = 7
MCGEHEE_INF = 8
NONROT_CM = 9

EV_JUP = 1
EV_SUN = 2
EV_CM = 3
EV_TIME = 4
EV_RADVEL_CM = 5
EV_LC_UNSTABLE = 6
EV_LC_STABLE = 7
# closest approach in a regularised chart: z . w in Levi-Civita, v at the Sun
EV_PERI = 8

ST_DONE = 0
ST_EVENT = 1
ST_BUDGET = 2
ST_UNDERFLOW = 3
ST_NONFINITE = 4

# Far from the primaries the perturbation is tiny but still turns once per unit
# of 2 pi in time; longer steps alias it and the energy random-walks.
INF_MAX_STEP = 2.0


@njit(cache=True)
def _polar_cm_field(y, mu, rotating, f):
    r, th, R, Th, t = y[0], y[1], y[2], y[3], y[4]
    phi = th if rotating else th - t
    c, s = math.cos(phi), math.sin(phi)
    r1s = r * r + 2.0 * mu * r * c + mu * mu
    r2s = r * r - 2.0 * (1.0 - mu) * r * c + (1.0 - mu) ** 2
    r13 = r1s * math.sqrt(r1s)
    f[0] = R
    f[1] = Th / (r * r) - (1.0 if rotating else 0.0)
    f[2] = Th * Th / (r * r * r) - (1.0 - mu) * (r + mu * c) / r13
    f[3] = (1.0 - mu) * mu * r * s / r13
    if mu > 0.0:
        r23 = r2s * math.sqrt(r2s)
        f[2] -= mu * (r - (1.0 - mu) * c) / r23
        f[3] -= mu * (1.0 - mu) * r * s / r23
    f[4] = 1.0


@njit(cache=True)
def field(chart, y, mu, xi, f):
    """Derivative of the five-slot state with respect to the chart's own time."""
    if chart == CART_CM:
        q1, q2, p1, p2 = y[0], y[1], y[2], y[3]
        dx = q1 + mu
        r1s = dx * dx + q2 * q2
        r13 = r1s * math.sqrt(r1s)
        gx = (1.0 - mu) * dx / r13
        gy = (1.0 - mu) * q2 / r13
        if mu > 0.0:
            ex = q1 - 1.0 + mu
            r2s = ex * ex + q2 * q2
            r23 = r2s * math.sqrt(r2s)
            gx += mu * ex / r23
            gy += mu * q2 / r23
        f[0] = p1 + q2
        f[1] = p2 - q1
        f[2] = p2 - gx
        f[3] = -p1 - gy
        f[4] = 1.0
    elif chart == POLAR_CM:
        _polar_cm_field(y, mu, True, f)
    elif chart == NONROT_CM:
        _polar_cm_field(y, mu, False, f)
    elif chart == POLAR_SUN:
        r, th, R, Th = y[0], y[1], y[2], y[3]
        c, s = math.cos(th), math.sin(th)
        D = 1.0 + r * r - 2.0 * r * c
        D32 = D * math.sqrt(D)
        f[0] = R + mu * s
        f[1] = Th / (r * r) - 1.0 + mu * c / r
        f[2] = Th * Th / (r * r * r) - (1.0 - mu) / (r * r) + mu * Th * c / (r * r) - mu * (r - c) / D32
        f[3] = -mu * (R * c - Th * s / r) - mu * r * s / D32
        f[4] = 1.0
    elif chart == POLAR_JUP:
        r, th, R, Th = y[0], y[1], y[2], y[3]
        c, s = math.cos(th), math.sin(th)
        rho2 = r * r + 2.0 * r * c + 1.0
        rho3 = rho2 * math.sqrt(rho2)
        a = 1.0 - mu
        dUr = a * c - a * (r + c) / rho3 - mu / (r * r)
        dUt = -a * r * s + a * r * s / rho3
        f[0] = R
        f[1] = Th / (r * r) - 1.0
        f[2] = Th * Th / (r * r * r) + dUr
        f[3] = dUt
        f[4] = 1.0
    elif chart == CART_JUP:
        q1, q2, p1, p2 = y[0], y[1], y[2], y[3]
        rs = q1 * q1 + q2 * q2
        r3 = rs * math.sqrt(rs)
        d2 = (q1 + 1.0) ** 2 + q2 * q2
        d3 = d2 * math.sqrt(d2)
        a = 1.0 - mu
        f[0] = p1 + q2
        f[1] = p2 - q1
        f[2] = p2 - mu * q1 / r3 + a * (1.0 - (q1 + 1.0) / d3)
        f[3] = -p1 - mu * q2 / r3 - a * q2 / d3
        f[4] = 1.0
    elif chart == LEVI_CIVITA:
        z1, z2, w1, w2 = y[0], y[1], y[2], y[3]
        n2 = z1 * z1 + z2 * z2
        cr = z1 * w2 - z2 * w1
        q1 = 2.0 * (z1 * z1 - z2 * z2)
        q2 = 4.0 * z1 * z2
        d2 = (q1 + 1.0) ** 2 + q2 * q2
        d = math.sqrt(d2)
        F = 1.0 / d - 1.0 + q1
        g1 = 1.0 - (q1 + 1.0) / (d2 * d)
        g2 = -q2 / (d2 * d)
        jt1 = 4.0 * (z1 * g1 + z2 * g2)
        jt2 = 4.0 * (z1 * g2 - z2 * g1)
        k = xi * xi * (1.0 - mu)
        dz1 = -z1 - 2.0 * xi * (2.0 * z1 * cr + n2 * w2) - k * (2.0 * z1 * F + n2 * jt1)
        dz2 = -z2 - 2.0 * xi * (2.0 * z2 * cr - n2 * w1) - k * (2.0 * z2 * F + n2 * jt2)
        f[0] = w1 + 2.0 * xi * n2 * z2
        f[1] = w2 - 2.0 * xi * n2 * z1
        f[2] = -dz1
        f[3] = -dz2
        f[4] = 4.0 * xi * n2
    elif chart == MCGEHEE_SUN:
        r, th, v, u = y[0], y[1], y[2], y[3]
        c, s = math.cos(th), math.sin(th)
        r32 = r * math.sqrt(r)
        D = 1.0 + r * r - 2.0 * r * c
        Dm32 = 1.0 / (D * math.sqrt(D))
        f[0] = r * v
        f[1] = u
        f[2] = (0.5 * v * v + u * u + 2.0 * u * r32 + r * r * r - 1.0
                + mu * (1.0 - r * r * (c + (r - c) * Dm32)))
        f[3] = -0.5 * u * v - 2.0 * v * r32 + mu * r * r * s * (1.0 - Dm32)
        f[4] = r32
    elif chart == MCGEHEE_INF:
        x, th, R, Th = y[0], y[1], y[2], y[3]
        x2 = x * x
        c, s = math.cos(th), math.sin(th)
        a = 1.0 - mu
        A = 1.0 + x2 * mu * c + 0.25 * x2 * x2 * mu * mu
        B = 1.0 - x2 * a * c + 0.25 * x2 * x2 * a * a
        As = math.sqrt(A)
        Bs = math.sqrt(B)
        bracket = a / As + mu / Bs - 1.0
        dA = 2.0 * x * mu * c + x2 * x * mu * mu
        dB = -2.0 * x * a * c + x2 * x * a * a
        dbr = -0.5 * a * dA / (A * As) - 0.5 * mu * dB / (B * Bs)
        dVx = x * bracket + 0.5 * x2 * dbr
        dVt = 0.5 * x2 * (0.5 * a * x2 * mu * s / (A * As) - 0.5 * mu * x2 * a * s / (B * Bs))
        x3 = x2 * x
        f[0] = -0.25 * R * x3
        f[1] = 0.25 * Th * x2 * x2 - 1.0
        f[2] = -0.25 * x2 * x2 + 0.125 * Th * Th * x3 * x3 - 0.25 * x3 * dVx
        f[3] = dVt
        f[4] = 1.0
    else:
        for i in range(5):
            f[i] = math.nan


@njit(cache=True)
def cm_position(chart, y, mu):
    """Rotating centre-of-mass Cartesian position of the state."""
    a = 1.0 - mu
    if chart == CART_CM:
        return y[0], y[1]
    if chart == POLAR_CM:
        return y[0] * math.cos(y[1]), y[0] * math.sin(y[1])
    if chart == NONROT_CM:
        return y[0] * math.cos(y[1] - y[4]), y[0] * math.sin(y[1] - y[4])
    if chart == POLAR_SUN or chart == MCGEHEE_SUN:
        return y[0] * math.cos(y[1]) - mu, y[0] * math.sin(y[1])
    if chart == POLAR_JUP:
        return y[0] * math.cos(y[1]) + a, y[0] * math.sin(y[1])
    if chart == CART_JUP:
        return y[0] + a, y[1]
    if chart == LEVI_CIVITA:
        return 2.0 * (y[0] * y[0] - y[1] * y[1]) + a, 4.0 * y[0] * y[1]
    if chart == MCGEHEE_INF:
        r = 2.0 / (y[0] * y[0])
        return r * math.cos(y[1]), r * math.sin(y[1])
    return math.nan, math.nan


@njit(cache=True)
def event_value(kind, c, chart, y, mu, xi):
    if kind == EV_TIME:
        return y[4] - c
    if kind == EV_JUP:
        if chart == LEVI_CIVITA:
            return 2.0 * (y[0] * y[0] + y[1] * y[1]) - c
        if chart == CART_JUP:
            return math.hypot(y[0], y[1]) - c
        if chart == POLAR_JUP:
            return y[0] - c
        X, Y = cm_position(chart, y, mu)
        return math.hypot(X - 1.0 + mu, Y) - c
    if kind == EV_SUN:
        if chart == POLAR_SUN or chart == MCGEHEE_SUN:
            return y[0] - c
        X, Y = cm_position(chart, y, mu)
        return math.hypot(X + mu, Y) - c
    if kind == EV_CM:
        if chart == POLAR_CM or chart == NONROT_CM:
            return y[0] - c
        if chart == MCGEHEE_INF:
            return 2.0 / (y[0] * y[0]) - c
        X, Y = cm_position(chart, y, mu)
        return math.hypot(X, Y) - c
    if kind == EV_LC_UNSTABLE or kind == EV_LC_STABLE:
        # squared norm of the linear-order straightened coordinate u or s
        if chart != LEVI_CIVITA:
            return math.nan
        sg = 1.0 if kind == EV_LC_UNSTABLE else -1.0
        a = y[0] + sg * y[2]
        b = y[1] + sg * y[3]
        return 0.5 * (a * a + b * b) - c
    if kind == EV_RADVEL_CM:
        if chart == POLAR_CM or chart == MCGEHEE_INF or chart == NONROT_CM:
            return y[2] - c
        if chart == CART_CM:
            return (y[0] * y[2] + y[1] * y[3]) / math.hypot(y[0], y[1]) - c
        return math.nan
    if kind == EV_PERI:
        if chart == LEVI_CIVITA:
            return y[0] * y[2] + y[1] * y[3] - c
        if chart == MCGEHEE_SUN:
            return y[2] - c
        return math.nan
    return math.nan


# Dormand-Prince 5(4) tableau
C2, C3, C4, C5 = 0.2, 0.3, 0.8, 8.0 / 9.0
A21 = 0.2
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
A61, A62, A63, A64, A65 = 9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0
A71, A73, A74, A75, A76 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
E1, E3, E4, E5, E6, E7 = (71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0,
                          -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)
D1, D3, D4, D5, D6, D7 = (-12715105075.0 / 11282082432.0, 87487479700.0 / 32700410799.0,
                          -10690763975.0 / 1880347072.0, 701980252875.0 / 199316789632.0,
                          -1453857185.0 / 822651844.0, 69997945.0 / 29380423.0)


@njit(cache=True)
def _dp_step(chart, y, h, mu, xi, K, ynew, ytmp):
    """One Dormand-Prince step; K[0] must hold f(y). Fills K[1..6] and ynew."""
    n = y.shape[0]
    for i in range(n):
        ytmp[i] = y[i] + h * A21 * K[0, i]
    field(chart, ytmp, mu, xi, K[1])
    for i in range(n):
        ytmp[i] = y[i] + h * (A31 * K[0, i] + A32 * K[1, i])
    field(chart, ytmp, mu, xi, K[2])
    for i in range(n):
        ytmp[i] = y[i] + h * (A41 * K[0, i] + A42 * K[1, i] + A43 * K[2, i])
    field(chart, ytmp, mu, xi, K[3])
    for i in range(n):
        ytmp[i] = y[i] + h * (A51 * K[0, i] + A52 * K[1, i] + A53 * K[2, i] + A54 * K[3, i])
    field(chart, ytmp, mu, xi, K[4])
    for i in range(n):
        ytmp[i] = y[i] + h * (A61 * K[0, i] + A62 * K[1, i] + A63 * K[2, i]
                              + A64 * K[3, i] + A65 * K[4, i])
    field(chart, ytmp, mu, xi, K[5])
    for i in range(n):
        ynew[i] = y[i] + h * (A71 * K[0, i] + A73 * K[2, i] + A74 * K[3, i]
                              + A75 * K[4, i] + A76 * K[5, i])
    field(chart, ynew, mu, xi, K[6])


@njit(cache=True)
def _err_norm(y, ynew, h, K, rtol, atol):
    s = 0.0
    m = 4
    for i in range(m):
        e = h * (E1 * K[0, i] + E3 * K[2, i] + E4 * K[3, i] + E5 * K[4, i]
                 + E6 * K[5, i] + E7 * K[6, i])
        sk = atol + rtol * max(abs(y[i]), abs(ynew[i]))
        s += (e / sk) ** 2
    return math.sqrt(s / m)


@njit(cache=True)
def _dense_coeffs(y, ynew, h, K, R):
    for i in range(y.shape[0]):
        ydiff = ynew[i] - y[i]
        bspl = h * K[0, i] - ydiff
        R[0, i] = y[i]
        R[1, i] = ydiff
        R[2, i] = bspl
        R[3, i] = ydiff - h * K[6, i] - bspl
        R[4, i] = h * (D1 * K[0, i] + D3 * K[2, i] + D4 * K[3, i] + D5 * K[4, i]
                       + D6 * K[5, i] + D7 * K[6, i])


@njit(cache=True)
def _dense_eval(R, s, out):
    s1 = 1.0 - s
    for i in range(R.shape[1]):
        out[i] = R[0, i] + s * (R[1, i] + s1 * (R[2, i] + s * (R[3, i] + s1 * R[4, i])))


@njit(cache=True)
def _initial_step(chart, y, f0, direction, mu, xi, rtol, atol, hmax):
    n = 4
    dnf = 0.0
    dny = 0.0
    for i in range(n):
        sk = atol + rtol * abs(y[i])
        dnf += (f0[i] / sk) ** 2
        dny += (y[i] / sk) ** 2
    if dnf <= 1e-10 or dny <= 1e-10:
        h = 1e-6
    else:
        h = math.sqrt(dny / dnf) * 0.01
    h = min(h, hmax)
    y1 = np.empty_like(y)
    f1 = np.empty_like(y)
    for i in range(y.shape[0]):
        y1[i] = y[i] + direction * h * f0[i]
    field(chart, y1, mu, xi, f1)
    der2 = 0.0
    for i in range(n):
        sk = atol + rtol * abs(y[i])
        der2 += ((f1[i] - f0[i]) / sk) ** 2
    der2 = math.sqrt(der2) / h
    der12 = max(abs(der2), math.sqrt(dnf))
    if der12 <= 1e-15:
        h1 = max(1e-6, abs(h) * 1e-3)
    else:
        h1 = (0.01 / der12) ** 0.2
    return min(100.0 * h, h1, hmax)


@njit(cache=True)
def _locate(R, kind, c, chart, mu, xi, g0, g1, tmp):
    """Root in (0, 1] of the event along the dense output, by the Illinois method."""
    a, b = 0.0, 1.0
    ga, gb = g0, g1
    side = 0
    s = 1.0
    for _ in range(200):
        s = (a * gb - b * ga) / (gb - ga)
        _dense_eval(R, s, tmp)
        gs = event_value(kind, c, chart, tmp, mu, xi)
        if gs == 0.0:
            return s
        if (gs > 0.0) == (gb > 0.0):
            b, gb = s, gs
            if side == 1:
                ga *= 0.5
            side = 1
        else:
            a, ga = s, gs
            if side == -1:
                gb *= 0.5
            side = -1
        if b - a < 1e-15:
            break
    return s


@njit(cache=True)
def _refine(chart, y0, k0, h, s, kind, c, mu, xi, event_tol, K, ynew, ytmp):
    """Secant polish of the event time using genuine Runge-Kutta steps from y0."""
    for i in range(y0.shape[0]):
        K[0, i] = k0[i]
    sa = s
    _dp_step(chart, y0, sa * h, mu, xi, K, ynew, ytmp)
    ga = event_value(kind, c, chart, ynew, mu, xi)
    if abs(ga) <= 0.01 * event_tol:
        return sa
    sb = sa * (1.0 - 1e-7) if sa > 1e-3 else sa + 1e-7
    for _ in range(8):
        for i in range(y0.shape[0]):
            K[0, i] = k0[i]
        _dp_step(chart, y0, sb * h, mu, xi, K, ynew, ytmp)
        gb = event_value(kind, c, chart, ynew, mu, xi)
        if abs(gb) <= 0.01 * event_tol or gb == ga:
            return sb
        sn = sb - gb * (sb - sa) / (gb - ga)
        sa, ga = sb, gb
        sb = sn
    return sb


@njit(cache=True, nogil=True)
def integrate_kernel(chart, y0, tau_end, mu, xi, rtol, atol, event_tol, max_steps,
                     ev_kind, ev_c, ev_dir, ev_term, store, h_init):
    """Integrate from chart time 0 to ``tau_end`` (either sign).

    Returns (status, tau, y, steps, hit, log_tau, log_y, log_idx, traj_tau, traj_y).
    ``hit`` is the index of the terminal event, or -1.
    """
    n = y0.shape[0]
    nev = ev_kind.shape[0]
    direction = 1.0 if tau_end >= 0.0 else -1.0
    span = abs(tau_end)
    y = y0.copy()
    ynew = np.empty(n)
    ytmp = np.empty(n)
    tmp = np.empty(n)
    K = np.empty((7, n))
    Kr = np.empty((7, n))
    R = np.empty((5, n))
    k0 = np.empty(n)
    field(chart, y, mu, xi, K[0])
    cap = 64
    log_tau = np.empty(cap)
    log_y = np.empty((cap, n))
    log_idx = np.empty(cap, dtype=np.int64)
    nlog = 0
    tcap = 1024 if store else 1
    traj_tau = np.empty(tcap)
    traj_y = np.empty((tcap, n))
    ntraj = 0
    if store:
        traj_tau[0] = 0.0
        traj_y[0] = y
        ntraj = 1
    gprev = np.empty(nev)
    for j in range(nev):
        gprev[j] = event_value(ev_kind[j], ev_c[j], chart, y, mu, xi)
    tau = 0.0
    if span == 0.0:
        return ST_DONE, tau, y, 0, -1, log_tau[:0], log_y[:0], log_idx[:0], traj_tau[:ntraj], traj_y[:ntraj]
    if h_init > 0.0:
        h = min(h_init, span)
    else:
        h = _initial_step(chart, y, K[0], direction, mu, xi, rtol, atol, span)
    if chart == MCGEHEE_INF and h > INF_MAX_STEP:
        h = INF_MAX_STEP
    facold = 1e-4
    rejected = False
    steps = 0
    status = ST_BUDGET
    hit = -1
    while steps < max_steps:
        remaining = span - abs(tau)
        last = False
        if h >= remaining:
            h = remaining
            last = True
        if h < 1e-14 * max(1.0, abs(tau)):
            status = ST_UNDERFLOW
            break
        hs = direction * h
        _dp_step(chart, y, hs, mu, xi, K, ynew, ytmp)
        steps += 1
        err = _err_norm(y, ynew, hs, K, rtol, atol)
        if not math.isfinite(err):
            h *= 0.1
            rejected = True
            if h < 1e-300:
                status = ST_NONFINITE
                break
            continue
        fac11 = err ** 0.17 if err > 0.0 else 0.0
        if err <= 1.0:
            fac = fac11 / facold ** 0.04
            fac = max(0.1, min(5.0, fac / 0.9))
            hnew = h / fac
            facold = max(err, 1e-4)
            # events on the accepted step
            best = 2.0
            bj = -1
            have_dense = False
            for j in range(nev):
                g1 = event_value(ev_kind[j], ev_c[j], chart, ynew, mu, xi)
                g0 = gprev[j]
                crossed = False
                if g0 != 0.0 and math.isfinite(g0) and math.isfinite(g1):
                    if (g0 < 0.0 and g1 >= 0.0) and ev_dir[j] >= 0:
                        crossed = True
                    elif (g0 > 0.0 and g1 <= 0.0) and ev_dir[j] <= 0:
                        crossed = True
                if crossed:
                    if not have_dense:
                        _dense_coeffs(y, ynew, hs, K, R)
                        have_dense = True
                    s = _locate(R, ev_kind[j], ev_c[j], chart, mu, xi, g0, g1, tmp)
                    if ev_term[j]:
                        if s < best:
                            best = s
                            bj = j
                    else:
                        for i in range(n):
                            k0[i] = K[0, i]
                        s = _refine(chart, y, k0, hs, s, ev_kind[j], ev_c[j], mu, xi,
                                    event_tol, Kr, tmp, ytmp)
                        for i in range(n):
                            Kr[0, i] = k0[i]
                        _dp_step(chart, y, s * hs, mu, xi, Kr, tmp, ytmp)
                        if nlog == cap:
                            cap *= 2
                            lt = np.empty(cap)
                            ly = np.empty((cap, n))
                            li = np.empty(cap, dtype=np.int64)
                            lt[:nlog] = log_tau[:nlog]
                            ly[:nlog] = log_y[:nlog]
                            li[:nlog] = log_idx[:nlog]
                            log_tau, log_y, log_idx = lt, ly, li
                        log_tau[nlog] = tau + s * hs
                        log_y[nlog] = tmp
                        log_idx[nlog] = j
                        nlog += 1
                gprev[j] = g1
            if bj >= 0:
                for i in range(n):
                    k0[i] = K[0, i]
                s = _refine(chart, y, k0, hs, best, ev_kind[bj], ev_c[bj], mu, xi,
                            event_tol, Kr, tmp, ytmp)
                for i in range(n):
                    Kr[0, i] = k0[i]
                _dp_step(chart, y, s * hs, mu, xi, Kr, ynew, ytmp)
                tau = tau + s * hs
                y[:] = ynew
                hit = bj
                status = ST_EVENT
                if store:
                    if ntraj == tcap:
                        tcap *= 2
                        tt = np.empty(tcap)
                        ty = np.empty((tcap, n))
                        tt[:ntraj] = traj_tau[:ntraj]
                        ty[:ntraj] = traj_y[:ntraj]
                        traj_tau, traj_y = tt, ty
                    traj_tau[ntraj] = tau
                    traj_y[ntraj] = y
                    ntraj += 1
                break
            tau = direction * span if last else tau + hs
            y[:] = ynew
            for i in range(n):
                K[0, i] = K[6, i]
            if store:
                if ntraj == tcap:
                    tcap *= 2
                    tt = np.empty(tcap)
                    ty = np.empty((tcap, n))
                    tt[:ntraj] = traj_tau[:ntraj]
                    ty[:ntraj] = traj_y[:ntraj]
                    traj_tau, traj_y = tt, ty
                traj_tau[ntraj] = tau
                traj_y[ntraj] = y
                ntraj += 1
            if last:
                status = ST_DONE
                break
            if rejected:
                hnew = min(hnew, h)
            rejected = False
            h = hnew
            if chart == MCGEHEE_INF and h > INF_MAX_STEP:
                h = INF_MAX_STEP
        else:
            h = h / min(5.0, fac11 / 0.9)
            rejected = True
    return (status, tau, y, steps, hit, log_tau[:nlog], log_y[:nlog], log_idx[:nlog],
            traj_tau[:ntraj], traj_y[:ntraj])
