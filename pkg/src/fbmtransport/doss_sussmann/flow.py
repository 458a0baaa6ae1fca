"""The flow ``h`` of ``dh/dy = sigma(h), h(x, 0) = x`` and its Euler approximation.

``HFlow`` integrates the flow adaptively (Dormand-Prince 5(4)) together with
``I(x, y) = int_0^y sigma'(h(x, u)) du`` and the x-derivatives ``dh/dx`` and
``dI/dx``, so that ``dh/dx = exp(I)`` can be checked rather than assumed.

``EulerGridH`` is the explicit Euler recursion on the grid of step ``1/n``
over ``[-n, n]`` with linear interpolation inside cells, defined to be zero
outside the square ``[-n, n]^2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .._validation import check_positive, check_positive_int
from ..errors import IntegrationError
from . import _kernels

DEFAULT_RTOL = 1e-12
DEFAULT_ATOL = 1e-13

_STATUS = {
    _kernels.TOO_MANY_STEPS: f"more than {_kernels.MAX_STEPS} steps",
    _kernels.STEP_UNDERFLOW: "step size underflow",
    _kernels.NOT_FINITE: "non-finite error estimate",
}


def _raise_status(status, where=""):
    if status != _kernels.OK:
        raise IntegrationError(f"flow integration failed{where}: {_STATUS.get(status, status)}")


def _pairs(x, y):
    xb, yb = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    return xb.shape, np.ascontiguousarray(xb.ravel()), np.ascontiguousarray(yb.ravel())


def _shaped(vals, shape):
    return float(vals[0]) if shape == () else vals.reshape(shape)


@dataclass(frozen=True, eq=False)
class HFlow:
    """Adaptive evaluator of the flow and its companion integrals."""

    coeffs: object
    rtol: float = DEFAULT_RTOL
    atol: float = DEFAULT_ATOL

    def __post_init__(self):
        check_positive(self.rtol, "rtol")
        check_positive(self.atol, "atol")

    @property
    def _k(self):
        return _kernels.kernels_for(self.coeffs)

    def state(self, x, y):
        """Array ``[..., 4]`` of ``(h, I, dh/dx, dI/dx)``."""
        c = self.coeffs
        shape, xs, ys = _pairs(x, y)
        k = self._k
        out, status = k.flow_many(k.flow, c.sigma, c.dsigma, c.d2sigma, c.params,
                                  xs, ys, self.rtol, self.atol)
        _raise_status(status)
        return out.reshape(shape + (4,))

    def __call__(self, x, y):
        st = self.state(x, y)
        return float(st[0]) if st.ndim == 1 else st[..., 0]

    def evaluate(self, x, y):
        """``(h, dh/dx, I)``."""
        st = self.state(x, y)
        if st.ndim == 1:
            return float(st[0]), float(st[2]), float(st[1])
        return st[..., 0], st[..., 2], st[..., 1]

    def f(self, x, y):
        """Right-hand side ``exp(-I(x, y)) * b(h(x, y))`` of the equation for Y."""
        st = self.state(x, y)
        c = self.coeffs
        b = np.vectorize(lambda h: c.b(float(h), c.params))(st[..., 0])
        out = np.exp(-st[..., 1]) * b
        return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True, eq=False)
class EulerGridH:
    """Euler-grid approximation ``h^n`` with step ``1/n`` on ``[-n, n]``."""

    coeffs: object
    n: int

    def __post_init__(self):
        check_positive_int(self.n, "n")

    @property
    def step(self):
        return 1.0 / self.n

    def __call__(self, x, y):
        c = self.coeffs
        shape, xs, ys = _pairs(x, y)
        k = _kernels.kernels_for(c)
        vals = k.h_euler_many(k.h_euler, c.sigma, c.params, self.n, xs, ys)
        return _shaped(vals, shape)

    def f(self, x, y):
        """``exp(-int_0^y sigma'(h^n(x, u)) du) * b(h^n(x, y))``."""
        c = self.coeffs
        shape, xs, ys = _pairs(x, y)
        k = _kernels.kernels_for(c)
        vals = k.f_euler_many(k.f_euler, c.sigma, c.dsigma, c.b, c.params, self.n, xs, ys)
        return _shaped(vals, shape)


def h_flow(c, x, y, tol=DEFAULT_RTOL):
    """``(h(x, y), dh/dx(x, y), I(x, y))`` by adaptive integration in ``y``."""
    tol = check_positive(tol, "tol")
    return HFlow(c, rtol=tol, atol=min(DEFAULT_ATOL, tol)).evaluate(x, y)


def h_euler(c, n, x, y):
    """Euler-grid value ``h^n(x, y)``; zero outside ``[-n, n]^2``."""
    return EulerGridH(c, n)(x, y)


def f_exact(c, x, y, tol=DEFAULT_RTOL):
    tol = check_positive(tol, "tol")
    return HFlow(c, rtol=tol, atol=min(DEFAULT_ATOL, tol)).f(x, y)


def f_euler(c, n, x, y, tol=None):
    """Euler-grid right-hand side; ``tol`` is accepted for symmetry and unused (Simpson per cell)."""
    return EulerGridH(c, n).f(x, y)


def inverse_derivative_slope(state):
    """``d/dx (dh/dx)^-1 = -exp(-I) dI/dx`` from a flow state array."""
    st = np.asarray(state)
    return -np.exp(-st[..., 1]) * st[..., 3]


def flow_error_bound(c, n, l):
    """``Mbar^2 (n / l) exp(Mbar n)`` bounding ``|h - h^l|`` on ``[-n, n]^2`` for ``l > n``."""
    mb = c.flow_bound
    return mb * mb * (n / l) * math.exp(mb * n)
