"""Transport-driven approximation of fractional Brownian motion.

The approximant is assembled from three independent transport processes via
the Mandelbrot-van Ness moving-average kernels

    f_t(s) = (t - s)^(H-1/2) - (-s)^(H-1/2),   s < 0 <= t
    g_t(s) = (t - s)^(H-1/2),                  s < t

with the far past mapped onto ``[1/a, 0)`` by time inversion.  A cutoff
``eps_n = -n^(-beta/|H-1/2|)`` keeps every kernel bounded, so each Stieltjes
integral against a transport path is a finite sum of closed-form piece
integrals.

An exact fBm sampler (dense Cholesky of the covariance) serves as the oracle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate

from ._validation import (check_grid, check_open_interval, check_positive,
                          check_positive_int)
from .errors import (ConfigurationError, DomainError, FactorizationError,
                     InvalidParameterError, NotApplicableError, QuadratureError)
from .reports import BoundReport
from .transport import Orientation, RngSeed, eval_transport, generate_transport

TRANSPORT_APPROX = "transport-approx"
EXACT_FBM = "exact-fbm"
MAX_CHOLESKY_POINTS = 4096
CHOLESKY_JITTER = 1e-12


@dataclass(frozen=True)
class ApproxParams:
    """Parameters of the transport approximation.

    ``delta`` only enters the target rate; when omitted it defaults to half of
    ``min(beta, 1/2 - beta)``, the midpoint of its admissible range.
    """

    H: float
    beta: float
    n: int
    a: float = -1.0
    T: float = 1.0
    delta: float | None = None

    def __post_init__(self):
        H = check_open_interval(self.H, 0.0, 1.0, "H")
        if H == 0.5:
            raise InvalidParameterError("H = 1/2 has no transport approximation here")
        d = abs(H - 0.5)
        if not (d < self.beta < 0.5):
            raise InvalidParameterError(
                f"beta must satisfy |H - 1/2| = {d:g} < beta < 1/2, got {self.beta!r}")
        check_positive_int(self.n, "n")
        if not (isinstance(self.a, (int, float)) and self.a < 0 and math.isfinite(self.a)):
            raise InvalidParameterError(f"a must be a negative real, got {self.a!r}")
        check_positive(self.T, "T")
        delta = self.delta
        if delta is None:
            delta = 0.5 * min(self.beta, 0.5 - self.beta)
            object.__setattr__(self, "delta", delta)
        if not (0 < delta < self.beta and self.beta + delta < 0.5):
            raise InvalidParameterError(
                f"delta must satisfy 0 < delta < beta and beta + delta < 1/2, got {delta!r}")
        eps = self.epsilon
        if not (self.a < eps < 0):
            raise InvalidParameterError(
                f"cutoff eps_n = {eps:g} is not inside (a, 0) = ({self.a:g}, 0); increase n")

    @property
    def epsilon(self):
        return -float(self.n) ** (-self.beta / abs(self.H - 0.5))

    def with_n(self, n):
        return ApproxParams(self.H, self.beta, n, self.a, self.T, self.delta)


def epsilon_n(params):
    """Negative cutoff level ``-n^(-beta/|H-1/2|)``."""
    return params.epsilon


# -- kernels -----------------------------------------------------------------

def _powdiff(x, t, q):
    """``(x + t)**q - x**q`` for ``x >= 0, t >= 0`` without cancellation."""
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        out = x ** q * np.expm1(q * np.log1p(t / x))
    if np.any(x == 0):
        out = np.where(x == 0, t ** q if q > 0 else np.inf, out)
    return out


def _scalar(out):
    return float(out) if np.ndim(out) == 0 else out


def kernel_f(H, t, s):
    """``(t - s)^(H-1/2) - (-s)^(H-1/2)`` for ``s < 0 <= t``."""
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(s >= 0) or np.any(t < 0):
        raise DomainError("kernel_f requires s < 0 <= t")
    return _scalar(_powdiff(-s, t, H - 0.5))


def kernel_g(H, t, s):
    """``(t - s)^(H-1/2)`` for ``s < t``."""
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(s >= t):
        raise DomainError("kernel_g requires s < t")
    return _scalar((t - s) ** (H - 0.5))


def kernel_df(H, t, s):
    """Derivative in ``s`` of :func:`kernel_f`."""
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(s >= 0) or np.any(t < 0):
        raise DomainError("kernel_df requires s < 0 <= t")
    return _scalar(-(H - 0.5) * _powdiff(-s, t, H - 1.5))


def _f_primitive(H, t, s):
    # d/ds of this equals f_t(s); s <= 0
    q = H + 0.5
    return -_powdiff(-s, t, q) / q


def _g_primitive(H, t, s, shift=0.0):
    # d/ds of this equals (t - shift - s)^(H-1/2)
    q = H + 0.5
    return -np.maximum(t - shift - s, 0.0) ** q / q


def _u_df_primitive(H, t, u):
    # antiderivative of u * d/du f_t(u) for u < 0
    q = H + 0.5
    return -(H - 0.5) / q * _powdiff(-u, t, q) + t * (t - u) ** (H - 0.5)


@lru_cache(maxsize=None)
def normalization_c(H):
    """Constant making the moving-average representation have unit variance at t = 1.

    Computed from its defining property by quadrature of the squared kernels.
    """
    H = check_open_interval(H, 0.0, 1.0, "H")
    if H == 0.5:
        raise DomainError("the normalization is only defined here for H != 1/2")
    p = H - 0.5

    def sq(x):
        return float(_powdiff(x, 1.0, p)) ** 2

    near, e1 = integrate.quad(sq, 0.0, 1.0, epsabs=1e-15, epsrel=1e-13, limit=400)
    far, e2 = integrate.quad(sq, 1.0, np.inf, epsabs=1e-15, epsrel=1e-13, limit=400)
    total = near + far + 1.0 / (2.0 * H)
    if e1 + e2 > 1e-10 * total:
        raise QuadratureError("normalization quadrature did not converge",
                              error_estimate=e1 + e2)
    return 1.0 / math.sqrt(total)


def _third_cut(params, s):
    s = np.asarray(s, dtype=float)
    return np.minimum(s, params.epsilon) if params.H > 0.5 else s


def third_segment_kernel(params, t, s, method="closed", tol=1e-10):
    """Kernel integrated against the time-inverted transport path on ``[1/a, 0)``.

    Value of ``-int_{1/a}^{c} (d/ds f_t)(1/v) v^-3 dv`` where ``c = min(s, eps_n)``
    for H > 1/2 and ``c = s`` otherwise.  ``method="closed"`` uses the
    substitution ``u = 1/v`` and the antiderivative of ``u * d/du f_t(u)``;
    ``method="quad"`` integrates in ``v`` adaptively.
    """
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    lo = 1.0 / params.a
    if np.any(s < lo) or np.any(s >= 0):
        raise DomainError("third_segment_kernel requires 1/a <= s < 0")
    if np.any(t < 0):
        raise DomainError("third_segment_kernel requires t >= 0")
    c = _third_cut(params, s)
    if method == "closed":
        H = params.H
        out = _u_df_primitive(H, t, 1.0 / c) - _u_df_primitive(H, t, params.a)
        return _scalar(np.where(c == lo, 0.0, out))
    if method != "quad":
        raise ValueError(f"unknown method {method!r}")

    def one(tt, cc):
        if cc == lo:
            return 0.0
        val, err, *rest = integrate.quad(
            lambda v: float(kernel_df(params.H, tt, 1.0 / v)) / v ** 3,
            lo, cc, epsabs=1e-14, epsrel=tol, limit=400, full_output=1)
        if len(rest) > 1:
            raise QuadratureError("third-segment kernel quadrature failed",
                                  interval=(lo, float(cc)), error_estimate=err)
        return -val

    tb, cb = np.broadcast_arrays(t, c)
    out = np.array([one(tt, cc) for tt, cc in zip(tb.ravel(), cb.ravel())]).reshape(tb.shape)
    return _scalar(out)


def _third_primitive(params, t, s):
    """Antiderivative in ``s`` of :func:`third_segment_kernel` (up to a constant)."""
    H = params.H
    c = _third_cut(params, s)
    with np.errstate(divide="ignore"):
        u = 1.0 / c
    finite = np.isfinite(u)
    u_safe = np.where(finite, u, params.a)
    phi = _u_df_primitive(H, t, u_safe) - _u_df_primitive(H, t, params.a)
    out = s * phi - _powdiff(-u_safe, t, H - 0.5)
    # s -> 0- without cutoff: s*phi -> 0 and f_t(1/s) -> 0
    return np.where(finite, out, 0.0)


# -- driver paths -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DriverPath:
    """A driver sampled on a time grid, linearly interpolated in between."""

    grid: np.ndarray
    values: np.ndarray
    kind: str
    H: float
    params: ApproxParams | None = None
    lipschitz_certificate: float | None = None
    seed: RngSeed | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        grid = check_grid(self.grid)
        values = np.asarray(self.values, dtype=float).reshape(-1)
        if values.shape != grid.shape:
            raise ConfigurationError("grid and values differ in length")
        if grid[0] < 0:
            raise InvalidParameterError("driver grid must lie in [0, T]")
        if grid[0] == 0 and values[0] != 0:
            raise InvalidParameterError("driver value at t = 0 must be 0")
        if self.kind not in (TRANSPORT_APPROX, EXACT_FBM):
            raise InvalidParameterError(f"unknown driver kind {self.kind!r}")
        grid.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    def __call__(self, t):
        return np.interp(t, self.grid, self.values)

    @property
    def sup_abs(self):
        return float(np.max(np.abs(self.values)))

    @property
    def T(self):
        return float(self.grid[-1])


def _stieltjes_rows(path, t, lo, hi, primitive):
    """Row ``i``: integral over ``[lo[i], hi[i]]`` of a ``t[i]``-dependent kernel against ``path``."""
    knots, _, slopes = path.pieces
    out = np.empty(len(t))
    rows = max(1, (1 << 21) // len(knots))
    for i in range(0, len(t), rows):
        sl = slice(i, i + rows)
        S = np.clip(knots[None, :], lo[sl, None], hi[sl, None])
        P = primitive(t[sl, None], S)
        out[sl] = (np.diff(P, axis=1) * slopes).sum(axis=1)
    return out


def _check_component(path, n, orientation, interval, name):
    if path.rate != n:
        raise ConfigurationError(f"{name} has rate {path.rate}, expected n = {n}")
    if path.orientation is not Orientation(orientation):
        raise ConfigurationError(f"{name} must be {Orientation(orientation).value}-anchored")
    u, v = path.interval
    if u > interval[0] + 1e-12 or v < interval[1] - 1e-12:
        raise ConfigurationError(f"{name} interval {path.interval} does not cover {interval}")
    if orientation == Orientation.BACKWARD and path.anchor != 0.0:
        raise ConfigurationError(f"{name} must be anchored at 0")


def build_bn(params, z1, z2, z3, grid, seed=None):
    """Evaluate the transport approximation of fBm on ``grid``.

    ``z1`` drives ``[0, T]`` forward from 0, ``z2`` and ``z3`` are anchored at 0
    and run backward over ``[a, 0]`` and ``[1/a, 0]``.
    """
    grid = check_grid(grid, lo=0.0, hi=params.T)
    n, H, a, eps = params.n, params.H, params.a, params.epsilon
    _check_component(z1, n, Orientation.FORWARD, (0.0, params.T), "z1")
    _check_component(z2, n, Orientation.BACKWARD, (a, 0.0), "z2")
    _check_component(z3, n, Orientation.BACKWARD, (1.0 / a, 0.0), "z3")
    if z1.anchor != 0.0:
        raise ConfigurationError("z1 must start at 0")

    t = grid
    zeros = np.zeros_like(t)
    boundary = _powdiff(-a, t, H - 0.5) * eval_transport(z2, a)
    third = _stieltjes_rows(z3, t, np.full_like(t, 1.0 / a), zeros,
                            lambda tt, s: _third_primitive(params, tt, s))
    if H > 0.5:
        first = _stieltjes_rows(z1, t, zeros, t, lambda tt, s: _g_primitive(H, tt, s))
        second = _stieltjes_rows(z2, t, np.full_like(t, a), zeros,
                                 lambda tt, s: _f_primitive(H, tt, s))
        total = first + second + boundary + third
    else:
        split = np.maximum(t + eps, 0.0)
        # shifted kernel is bounded by (-eps)^(H-1/2) since t - eps - s >= -eps
        assert np.all(t - eps - split >= -eps * (1 - 1e-12))
        first = _stieltjes_rows(z1, t, zeros, split, lambda tt, s: _g_primitive(H, tt, s))
        shifted = _stieltjes_rows(z1, t, split, t,
                                  lambda tt, s: _g_primitive(H, tt, s, shift=eps))
        second = _stieltjes_rows(z2, t, np.full_like(t, a), np.full_like(t, eps),
                                 lambda tt, s: _f_primitive(H, tt, s))
        total = first + shifted + second + boundary + third
    values = normalization_c(H) * total
    if t[0] == 0.0:
        values[0] = 0.0
    lip = _grid_lipschitz(t, values)
    return DriverPath(t, values, TRANSPORT_APPROX, H, params, lip, seed)


def transport_components(params, seed):
    """The three independent transport paths of one replica."""
    n = params.n
    z1 = generate_transport(n, params.T, Orientation.FORWARD, seed.with_substream(1))
    z2 = generate_transport(n, -params.a, Orientation.BACKWARD, seed.with_substream(2))
    z3 = generate_transport(n, -1.0 / params.a, Orientation.BACKWARD, seed.with_substream(3))
    return z1, z2, z3


def sample_bn(params, grid, seed):
    """Generate the transport components from ``seed`` and build the approximant."""
    z1, z2, z3 = transport_components(params, seed)
    return build_bn(params, z1, z2, z3, grid, seed=seed)


# -- exact fBm oracle -----------------------------------------------------------

def fbm_covariance(H, s, t):
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s < 0) or np.any(t < 0):
        raise DomainError("fbm_covariance requires s, t >= 0")
    h2 = 2.0 * H
    return _scalar(0.5 * (s ** h2 + t ** h2 - np.abs(s - t) ** h2))


@lru_cache(maxsize=32)
def _cholesky_cached(H, times):
    tt = np.array(times)
    cov = fbm_covariance(H, tt[:, None], tt[None, :])
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    try:
        return np.linalg.cholesky(cov + CHOLESKY_JITTER * np.eye(len(tt)))
    except np.linalg.LinAlgError as exc:
        raise FactorizationError(
            f"fBm covariance not positive definite after jitter {CHOLESKY_JITTER:g}") from exc


def fbm_cholesky(H, grid):
    """Lower Cholesky factor of the fBm covariance on the positive grid points."""
    grid = check_grid(grid, lo=0.0)
    pos = tuple(float(x) for x in grid if x > 0)
    if len(pos) > MAX_CHOLESKY_POINTS:
        raise InvalidParameterError(f"grid too large for dense factorization (> {MAX_CHOLESKY_POINTS})")
    return _cholesky_cached(float(H), pos)


def exact_fbm(H, grid, seed):
    """Exact fBm sample on ``grid`` via the Cholesky factor of its covariance."""
    H = check_open_interval(H, 0.0, 1.0, "H")
    grid = check_grid(grid, lo=0.0)
    L = fbm_cholesky(H, grid)
    rng = seed.generator()
    values = np.zeros(len(grid))
    pos = grid > 0
    if L.shape[0]:
        values[pos] = L @ rng.standard_normal(L.shape[0])
    return DriverPath(grid, values, EXACT_FBM, H, None, None, seed)


# -- Lipschitz audit ------------------------------------------------------------

def _grid_lipschitz(grid, values):
    if len(grid) < 2:
        return 0.0
    return float(np.max(np.abs(np.diff(values)) / np.diff(grid)))


def lipschitz_audit(driver, params=None):
    """Measured grid Lipschitz constant, normalized by ``n^(1+beta)``."""
    if driver.kind != TRANSPORT_APPROX:
        raise NotApplicableError("the Lipschitz audit applies to transport-approx drivers only")
    params = params or driver.params
    scale = float(params.n) ** (1.0 + params.beta)
    measured = _grid_lipschitz(driver.grid, driver.values)
    k_hat = measured / scale
    # the bound is the measurement itself; max() absorbs the rounding of k_hat * scale
    return BoundReport(
        "grid-lipschitz", measured, max(measured, k_hat * scale),
        {"K_hat": k_hat, "n": params.n, "beta": params.beta, "H": params.H},
    )
