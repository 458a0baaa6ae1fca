"""Inner loops of the flow and time-stepping solvers.

Written once as plain Python; a numba-compiled copy is used when the
coefficient functions are themselves compiled.  Inner kernels are passed as
arguments so the same source serves both variants.
"""
import math
from types import SimpleNamespace

import numba
import numpy as np
from numba.extending import register_jitable

# Dormand-Prince 5(4)
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = np.array([
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1 / 5, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3 / 40, 9 / 40, 0.0, 0.0, 0.0, 0.0],
    [44 / 45, -56 / 15, 32 / 9, 0.0, 0.0, 0.0],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0.0, 0.0],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656, 0.0],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
])
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])

MAX_STEPS = 100000
OK, TOO_MANY_STEPS, STEP_UNDERFLOW, NOT_FINITE = 0, 1, 2, 3


@register_jitable
def _rhs(sig, dsig, d2sig, p, st, out):
    # state (h, I, J, K): h' = sigma(h), I' = sigma'(h), J = dh/dx, K = dI/dx
    h = st[0]
    ds = dsig(h, p)
    out[0] = sig(h, p)
    out[1] = ds
    out[2] = ds * st[2]
    out[3] = d2sig(h, p) * st[2]


def flow(sig, dsig, d2sig, p, x, y, rtol, atol):
    """Integrate the flow in its second argument from 0 to ``y`` starting at ``x``.

    Returns ``(h, I, dh/dx, dI/dx, status)``.
    """
    st = np.array([x, 0.0, 1.0, 0.0])
    if y == 0.0:
        return st[0], st[1], st[2], st[3], OK
    direction = 1.0 if y > 0 else -1.0
    span = abs(y)
    k = np.zeros((7, 4))
    tmp = np.empty(4)
    new = np.empty(4)
    _rhs(sig, dsig, d2sig, p, st, k[0])
    hs = min(span, 0.05)
    done = 0.0
    steps = 0
    while True:
        steps += 1
        if steps > MAX_STEPS:
            return st[0], st[1], st[2], st[3], TOO_MANY_STEPS
        last = done + hs >= span
        if last:
            hs = span - done
        dh = direction * hs
        for i in range(1, 7):
            for j in range(4):
                acc = 0.0
                for q in range(i):
                    acc += _A[i, q] * k[q, j]
                tmp[j] = st[j] + dh * acc
            _rhs(sig, dsig, d2sig, p, tmp, k[i])
        # the last row holds the fifth-order weights, so k[6] is the FSAL stage
        for j in range(4):
            new[j] = tmp[j]
        err = 0.0
        for j in range(4):
            e = 0.0
            for q in range(7):
                e += _E[q] * k[q, j]
            sc = atol + rtol * max(abs(st[j]), abs(new[j]))
            err += (dh * e / sc) ** 2
        err = math.sqrt(err / 4.0)
        if not math.isfinite(err):
            return st[0], st[1], st[2], st[3], NOT_FINITE
        if err <= 1.0:
            done += hs
            for j in range(4):
                st[j] = new[j]
                k[0, j] = k[6, j]
            if last:
                return st[0], st[1], st[2], st[3], OK
            fac = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
        else:
            fac = max(0.2, 0.9 * err ** -0.2)
        hs *= fac
        if hs < 1e-14 * span:
            return st[0], st[1], st[2], st[3], STEP_UNDERFLOW


def h_euler(sig, p, n, x, y):
    """Euler approximation of the flow on the grid of step ``1/n``, zero outside ``[-n, n]^2``."""
    if abs(x) > n or abs(y) > n:
        return 0.0
    r = 1.0 / n
    ay = abs(y)
    sgn = 1.0 if y >= 0 else -1.0
    k = int(math.floor(ay * n))
    if k > n * n:
        k = n * n
    h = x
    for _ in range(k):
        h += sgn * r * sig(h, p)
    rem = ay - k * r
    if rem > 0.0:
        h += sgn * rem * sig(h, p)
    return h


@register_jitable
def _simpson_cell(sig, dsig, p, h, length, sgn):
    h1 = h + sgn * length * sig(h, p)
    val = length / 6.0 * (dsig(h, p) + 4.0 * dsig(0.5 * (h + h1), p) + dsig(h1, p))
    return h1, val


def f_euler(sig, dsig, b, p, n, x, y):
    """``exp(-int_0^y sigma'(h^n(x, u)) du) * b(h^n(x, y))`` with Simpson's rule per grid cell."""
    if abs(x) > n:
        return math.exp(-dsig(0.0, p) * y) * b(0.0, p)
    ay = abs(y)
    sgn = 1.0 if y >= 0 else -1.0
    inside = min(ay, float(n))
    r = 1.0 / n
    k = int(math.floor(inside * n))
    if k > n * n:
        k = n * n
    h = x
    integ = 0.0
    for _ in range(k):
        h, v = _simpson_cell(sig, dsig, p, h, r, sgn)
        integ += v
    rem = inside - k * r
    if rem > 0.0:
        h, v = _simpson_cell(sig, dsig, p, h, rem, sgn)
        integ += v
    integ *= sgn
    if ay > n:
        # the Euler flow is zero outside the square
        integ += sgn * (ay - n) * dsig(0.0, p)
        h = 0.0
    return math.exp(-integ) * b(h, p)


@register_jitable
def f_exact(flow, sig, dsig, d2sig, b, p, x, y, rtol, atol):
    h, integ, _, _, status = flow(sig, dsig, d2sig, p, x, y, rtol, atol)
    return math.exp(-integ) * b(h, p), status


def rk4_y(flow, sig, dsig, d2sig, b, p, x0, grid, bvals, step, rtol, atol):
    """Classical RK4 for ``Y' = f(Y, B_t)`` with ``B`` linear between grid nodes.

    Each grid cell is split into equal substeps no longer than ``step``.
    """
    out = np.empty(len(grid))
    out[0] = x0
    yv = x0
    worst = OK
    for i in range(len(grid) - 1):
        dt = grid[i + 1] - grid[i]
        nsub = max(1, int(math.ceil(dt / step - 1e-9)))
        hs = dt / nsub
        b0 = bvals[i]
        slope = (bvals[i + 1] - b0) / dt
        for j in range(nsub):
            t0 = j * hs
            k1, s1 = f_exact(flow, sig, dsig, d2sig, b, p, yv, b0 + slope * t0, rtol, atol)
            k2, s2 = f_exact(flow, sig, dsig, d2sig, b, p, yv + 0.5 * hs * k1,
                             b0 + slope * (t0 + 0.5 * hs), rtol, atol)
            k3, s3 = f_exact(flow, sig, dsig, d2sig, b, p, yv + 0.5 * hs * k2,
                             b0 + slope * (t0 + 0.5 * hs), rtol, atol)
            k4, s4 = f_exact(flow, sig, dsig, d2sig, b, p, yv + hs * k3,
                             b0 + slope * (t0 + hs), rtol, atol)
            worst = max(worst, s1, s2, s3, s4)
            yv = yv + hs / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[i + 1] = yv
    return out, worst


def euler_y(f_euler, sig, dsig, b, p, n, m, T, x0, bnodes, tout):
    """Explicit Euler in time with step ``T/m``, read off at ``tout`` by the linear rule inside steps."""
    r = T / m
    yk = np.empty(m + 1)
    fk = np.empty(m + 1)
    yk[0] = x0
    for k in range(m):
        fk[k] = f_euler(sig, dsig, b, p, n, yk[k], bnodes[k])
        yk[k + 1] = yk[k] + r * fk[k]
    out = np.empty(len(tout))
    for i in range(len(tout)):
        u = tout[i] / r
        k = int(round(u))
        if abs(u - k) <= 1e-9 and 0 <= k <= m:
            out[i] = yk[k]
            continue
        k = min(max(int(math.floor(u)), 0), m - 1)
        out[i] = yk[k] + (tout[i] - k * r) * fk[k]
    return out


def flow_many(flow, sig, dsig, d2sig, p, xs, ys, rtol, atol):
    out = np.empty((len(xs), 4))
    worst = OK
    for i in range(len(xs)):
        h, integ, dh, dI, s = flow(sig, dsig, d2sig, p, xs[i], ys[i], rtol, atol)
        out[i, 0] = h
        out[i, 1] = integ
        out[i, 2] = dh
        out[i, 3] = dI
        worst = max(worst, s)
    return out, worst


def h_euler_many(h_euler, sig, p, n, xs, ys):
    out = np.empty(len(xs))
    for i in range(len(xs)):
        out[i] = h_euler(sig, p, n, xs[i], ys[i])
    return out


def f_euler_many(f_euler, sig, dsig, b, p, n, xs, ys):
    out = np.empty(len(xs))
    for i in range(len(xs)):
        out[i] = f_euler(sig, dsig, b, p, n, xs[i], ys[i])
    return out


_NAMES = ("flow", "h_euler", "f_euler", "f_exact", "rk4_y", "euler_y",
          "flow_many", "h_euler_many", "f_euler_many")

PY = SimpleNamespace(**{k: globals()[k] for k in _NAMES})
_jit = None


def _compiled():
    global _jit
    if _jit is None:
        _jit = SimpleNamespace(**{k: numba.njit(nogil=True)(globals()[k]) for k in _NAMES})
    return _jit


def kernels_for(coeffs):
    """Compiled kernels for compiled coefficients, plain Python otherwise."""
    return _compiled() if coeffs.compiled else PY
