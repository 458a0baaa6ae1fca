"""Error metrics, explicit-bound checkers, Monte Carlo experiments and rate fits.

Every checker returns :class:`BoundReport` objects whose ``bound`` is computed
from measurable path statistics (driver sup norm, grid Lipschitz constant,
container radius) plugged into closed-form estimates.
"""
from __future__ import annotations

import math
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_positive_int, same_grid, uniform_grid
from .doss_sussmann import (EulerGridH, HFlow, arctan_demo, compose_x, euler_bound, euler_y,
                            flow_error_bound, get_preset, inverse_derivative_slope, solve_y,
                            validate_coeffs)
from .errors import (ConfigurationError, InsufficientDataError, InvalidParameterError,
                     NotApplicableError)
from .fbm_driver import ApproxParams, fbm_covariance, lipschitz_audit, sample_bn
from .reports import BoundReport
from .transport import RngSeed

# relative slack absorbing the adaptive flow solver's own error in equality cases
FLOW_SLACK = 1e-9


# -- metrics ---------------------------------------------------------------------

def sup_norm_diff(p1, p2):
    """``max_t |p1(t) - p2(t)|`` over a shared grid."""
    if not same_grid(p1.grid, p2.grid):
        raise ConfigurationError("paths are on different grids")
    return float(np.max(np.abs(np.asarray(p1.values) - np.asarray(p2.values))))


def alpha_n(n, beta, delta):
    """Target rate ``n^(-1/2 + beta + delta) (log n)^(5/2)``."""
    if not (0 < delta < beta < 0.5 and beta + delta < 0.5):
        raise InvalidParameterError("need 0 < delta < beta < 1/2 and beta + delta < 1/2")
    if n <= 1:
        raise InvalidParameterError("alpha_n needs n > 1 so that log n > 0")
    return float(n) ** (-0.5 + beta + delta) * math.log(n) ** 2.5


def rate_fit(ns, errors):
    """Least-squares line through ``(log n, log error)``.

    Returns ``(slope, intercept, residual)`` with ``residual`` the root mean
    square of the fit residuals in log space.
    """
    ns = np.asarray(ns, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if ns.shape != errors.shape or ns.ndim != 1:
        raise InvalidParameterError("ns and errors must be 1-D of equal length")
    if len(ns) < 3:
        raise InsufficientDataError(f"rate fit needs at least 3 points, got {len(ns)}")
    if np.any(ns <= 0) or np.any(errors <= 0) or not np.all(np.isfinite(errors)):
        raise InvalidParameterError("rate fit needs positive n and positive finite errors")
    x, y = np.log(ns), np.log(errors)
    A = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + intercept)
    return float(slope), float(intercept), float(math.sqrt(np.mean(resid ** 2)))


# -- flow bounds --------------------------------------------------------------------

@dataclass(frozen=True)
class HSampleSpec:
    """Deterministic sample grid: ``points`` values per axis on the given ranges."""

    x_range: tuple = (-3.0, 3.0)
    y_range: tuple = (-2.0, 2.0)
    points: int = 10

    def xs(self):
        return np.linspace(*self.x_range, self.points)

    def xs_alt(self):
        # a second, interleaved set of x values for two-point inequalities
        lo, hi = self.x_range
        return np.linspace(lo, hi, self.points)[::-1] * 0.83 + 0.07 * (hi - lo)

    def ys(self):
        return np.linspace(*self.y_range, self.points)

    def ys_alt(self):
        lo, hi = self.y_range
        return np.linspace(lo, hi, self.points)[::-1] * 0.77 - 0.05 * (hi - lo)


def _inequality_report(name, lhs, rhs, points, slack=FLOW_SLACK, extra=None):
    """Report for ``lhs <= rhs`` sampled pointwise; ``points`` are the sample coordinates."""
    lhs = np.asarray(lhs, dtype=float).ravel()
    rhs = np.asarray(rhs, dtype=float).ravel()
    tol = slack * np.maximum(1.0, np.abs(rhs))
    excess = lhs - rhs - tol
    i = int(np.argmax(excess))
    ctx = {
        "samples": int(lhs.size),
        "violations": int(np.sum(excess > 0)),
        "worst_point": tuple(float(v) for v in np.asarray(points)[i]),
        "worst_lhs": float(lhs[i]),
        "worst_rhs": float(rhs[i]),
        "slack": slack,
    }
    if extra:
        ctx.update(extra)
    return BoundReport(name, float(excess[i]), 0.0, ctx)


def check_h_bounds(c, sample_spec=None, rtol=1e-12):
    """Eight pointwise inequalities of the flow and its x-derivative.

    1. ``|dh/dx| <= exp(M2|y|)``
    2. ``|(dh/dx)^-1| <= exp(M2|y|)``
    3. ``|d/dx (dh/dx)^-1| <= M3|y| exp(2 M2|y|)``
    4. ``|h(x1,y) - h(x2,y)| <= exp(M2|y|) |x1 - x2|``
    5. ``|(dh/dx)^-1(x1,y) - (dh/dx)^-1(x2,y)| <= M3|y| exp(2 M2|y|) |x1 - x2|``
    6. ``|b(h(x1,y)) - b(h(x2,y))| <= M4 exp(M2|y|) |x1 - x2|``
    7. ``|b(h(x,y1)) - b(h(x,y2))| <= M4 M5 |y1 - y2|``
    8. ``|f(x1,y) - f(x2,y)| <= exp(2 M2|y|)(M1 M3|y| + M4) |x1 - x2|``
       with ``f = (dh/dx)^-1 b(h)``.
    """
    spec = sample_spec or HSampleSpec()
    M1, M2, M3, M4, M5 = c.bounds
    flow = HFlow(c, rtol=rtol, atol=min(1e-13, rtol))
    bfun = np.vectorize(lambda h: c.b(float(h), c.params))

    xa, xb, ya, yb = spec.xs(), spec.xs_alt(), spec.ys(), spec.ys_alt()
    # single-point items on both x sets
    X, Y = np.meshgrid(np.concatenate([xa, xb]), ya, indexing="ij")
    st = flow.state(X, Y)
    e2 = np.exp(M2 * np.abs(Y))
    single_pts = np.column_stack([X.ravel(), Y.ravel()])
    inv = np.exp(-st[..., 1])
    reports = [
        _inequality_report("h-bound-1 |dh/dx| <= exp(M2|y|)", np.abs(st[..., 2]), e2, single_pts),
        _inequality_report("h-bound-2 |(dh/dx)^-1| <= exp(M2|y|)", inv, e2, single_pts),
        _inequality_report("h-bound-3 |d/dx (dh/dx)^-1| <= M3|y|exp(2M2|y|)",
                           np.abs(inverse_derivative_slope(st)), M3 * np.abs(Y) * e2 ** 2,
                           single_pts),
    ]

    # two-point items in x: all (x1, x2, y) triples
    X1, X2, Yp = np.meshgrid(xa, xb, ya, indexing="ij")
    s1 = flow.state(X1, Yp)
    s2 = flow.state(X2, Yp)
    dx = np.abs(X1 - X2)
    ey = np.exp(M2 * np.abs(Yp))
    pair_pts = np.column_stack([X1.ravel(), X2.ravel(), Yp.ravel()])
    b1, b2 = bfun(s1[..., 0]), bfun(s2[..., 0])
    i1, i2 = np.exp(-s1[..., 1]), np.exp(-s2[..., 1])
    reports += [
        _inequality_report("h-bound-4 |h(x1,y)-h(x2,y)| <= exp(M2|y|)|x1-x2|",
                           np.abs(s1[..., 0] - s2[..., 0]), ey * dx, pair_pts),
        _inequality_report("h-bound-5 inverse-derivative Lipschitz in x",
                           np.abs(i1 - i2), M3 * np.abs(Yp) * ey ** 2 * dx, pair_pts),
        _inequality_report("h-bound-6 |b(h(x1,y))-b(h(x2,y))| <= M4 exp(M2|y|)|x1-x2|",
                           np.abs(b1 - b2), M4 * ey * dx, pair_pts),
    ]

    # two-point item in y
    Xq, Y1, Y2 = np.meshgrid(xa, ya, yb, indexing="ij")
    t1 = flow.state(Xq, Y1)
    t2 = flow.state(Xq, Y2)
    ypts = np.column_stack([Xq.ravel(), Y1.ravel(), Y2.ravel()])
    reports.append(_inequality_report(
        "h-bound-7 |b(h(x,y1))-b(h(x,y2))| <= M4 M5|y1-y2|",
        np.abs(bfun(t1[..., 0]) - bfun(t2[..., 0])), M4 * M5 * np.abs(Y1 - Y2), ypts))

    reports.append(_inequality_report(
        "h-bound-8 |f(x1,y)-f(x2,y)| <= exp(2M2|y|)(M1M3|y|+M4)|x1-x2|",
        np.abs(i1 * b1 - i2 * b2), ey ** 2 * (M1 * M3 * np.abs(Yp) + M4) * dx, pair_pts))
    return reports


def check_inverse_derivative_growth(c=None, sample_spec=None, rtol=1e-12):
    """Lower bound ``(dh/dx)^-1 >= exp(|y| / (1 + x^2))`` for x < 0, y < 0 with sigma = arctan.

    It shows the inverse derivative is unbounded for this diffusion.  The
    report measures ``max(rhs - lhs)`` so it passes when the bound holds
    everywhere on the sample.
    """
    c = c or arctan_demo()
    spec = sample_spec or HSampleSpec(x_range=(-4.0, -0.05), y_range=(-4.0, -0.05), points=32)
    lo_x, hi_x = spec.x_range
    lo_y, hi_y = spec.y_range
    if hi_x >= 0 or hi_y >= 0:
        raise InvalidParameterError("the growth bound is stated for x < 0 and y < 0")
    X, Y = np.meshgrid(spec.xs(), spec.ys(), indexing="ij")
    st = HFlow(c, rtol=rtol, atol=min(1e-13, rtol)).state(X, Y)
    lhs = np.exp(-st[..., 1])
    rhs = np.exp(np.abs(Y) / (1.0 + X ** 2))
    pts = np.column_stack([X.ravel(), Y.ravel()])
    # lower bound: check rhs <= lhs
    rep = _inequality_report("inverse-derivative growth (dh/dx)^-1 >= exp(|y|/(1+x^2))",
                             rhs, lhs, pts, extra={"max_inverse_derivative": float(lhs.max())})
    return rep


def check_h_euler_bound(c, n, l, sample_spec=None, points=41, rtol=1e-12):
    """``|h - h^l| <= Mbar^2 (n / l) exp(Mbar n)`` on a full grid of ``[-n, n]^2``, ``l > n``."""
    n = check_positive_int(n, "n")
    l = check_positive_int(l, "l")
    if l <= n:
        raise InvalidParameterError("the Euler-grid bound needs l > n")
    spec = sample_spec or HSampleSpec((-n, n), (-n, n), points)
    X, Y = np.meshgrid(spec.xs(), spec.ys(), indexing="ij")
    exact = HFlow(c, rtol=rtol, atol=min(1e-13, rtol))(X, Y)
    approx = EulerGridH(c, l)(X, Y)
    err = np.abs(exact - approx)
    i = np.unravel_index(int(np.argmax(err)), err.shape)
    return BoundReport(
        f"euler-grid h error (n={n}, l={l})", float(err[i]), flow_error_bound(c, n, l),
        {"n": n, "l": l, "samples": int(err.size),
         "worst_point": (float(X[i]), float(Y[i]))},
    )


def h_euler_order(c, n, ls, sample_spec=None, points=41):
    """Empirical order of ``max |h - h^l|`` in ``l``; returns ``(order, reports)``."""
    reports = [check_h_euler_bound(c, n, l, sample_spec, points) for l in ls]
    slope, _, _ = rate_fit(ls, [r.measured for r in reports])
    return -slope, reports


# -- Y bounds -------------------------------------------------------------------------

@dataclass(frozen=True)
class PathConstants:
    """Path statistics and the random constants built from them."""

    driver_sup: float
    grid_lipschitz: float
    container: float
    Z1: float
    Z2: float
    J: float
    y_gap_bound: float


def path_constants(c, n, m, driver, y_euler):
    """Constants of the Euler-in-time error estimate for one path.

    ``container`` is the measured radius ``max(||B||, ||Y^{n,m}||)`` of the
    square holding the pair ``(Y^{n,m}, B)``.
    """
    M1, M2, M3, M4, M5 = c.bounds
    mb = c.flow_bound
    T = float(driver.grid[-1])
    bs = driver.sup_abs
    lip = driver.lipschitz_certificate
    if lip is None:
        lip = lipschitz_audit(driver).measured
    N = max(bs, float(np.max(np.abs(y_euler.y))))
    e = math.exp(M2 * bs)
    Z1 = e * e * (M1 * M3 * bs + M4)
    Z2 = (M1 * M2 + M5 * M4) * e
    r = T / m
    J = (Z1 * M1 * e * r + Z2 * lip * r
         + mb * mb * e * math.exp(mb * N) * (M1 * M3 * bs + M4) * N / n)
    with np.errstate(over="ignore"):
        gap = J * T * float(np.exp(Z1 * T))
    return PathConstants(bs, lip, N, Z1, Z2, J, gap)


def _params_of(driver, n):
    if driver.kind != "transport-approx":
        raise NotApplicableError("the Y bounds need a transport-approx driver")
    if driver.params.n != n:
        raise ConfigurationError(f"driver was built with n={driver.params.n}, not {n}")
    return driver.params


def check_y_bounds(c, n, m, driver, reference=None, reference_step=None):
    """Pathwise checks of the Euler-in-time scheme on one driver.

    * a priori bound ``|Y^{n,m}| <= |x0| + T M1 exp(M2 ||B||)``;
    * ``|Y^n - Y^{n,m}| <= J T exp(Z1 T)`` against the reference solution;
    * containment ``n >= max(||B||, ||Y^{n,m}||)``, the hypothesis of the
      second estimate.
    """
    _params_of(driver, n)
    ye = euler_y(c, n, m, driver)
    ref = reference if reference is not None else solve_y(c, driver, step=reference_step)
    T = float(driver.grid[-1])
    k = path_constants(c, n, m, driver, ye)
    ctx = {"n": n, "m": m, "seed": driver.seed, "driver_sup": k.driver_sup}
    a_priori = BoundReport("euler-Y a priori bound", float(np.max(np.abs(ye.y))),
                           euler_bound(c, T, k.driver_sup), ctx)
    # the reference is itself numerical: allow for its error on top of the estimate
    allowance = FLOW_SLACK * max(1.0, float(np.max(np.abs(ref.y))))
    gap = BoundReport("reference vs euler-Y gap", float(np.max(np.abs(ref.y - ye.y))),
                      k.y_gap_bound + allowance,
                      dict(ctx, Z1=k.Z1, Z2=k.Z2, J=k.J, container=k.container,
                           grid_lipschitz=k.grid_lipschitz, estimate=k.y_gap_bound,
                           numerical_allowance=allowance))
    contain = BoundReport("square containment", k.container, float(n), ctx)
    return [a_priori, gap, contain]


def _logsum(logs):
    out = -math.inf
    for v in logs:
        out = np.logaddexp(out, v)
    return float(out)


def _log(v):
    return math.log(v) if v > 0 else -math.inf


def log_rate_constant(c, N, K, T):
    """Logarithm of the constant ``Z3`` bounding ``n^(1-beta) |Y^n - Y^{n,n^2}|``.

    ``M`` is the largest declared bound, ``N`` the container radius and ``K``
    the normalized Lipschitz constant of the driver.  Computed in log space
    because the constant overflows double precision for moderate ``N``.
    """
    M = c.overall_bound
    grow = T * math.exp(2 * M * N) * (M * M * N + M)
    inner = _logsum([
        3 * M * N + _log(M ** 3 * N + M * M) + _log(T),
        _log(2 * M * M * K) + M * N + _log(T),
        _log(M * M * N) + 2 * M * N + _log(M * M * N + M),
    ])
    return inner + _log(T) + grow


def _exp_or_inf(v):
    return math.exp(v) if v < 709 else math.inf


def check_rate_bounds(c, params, driver, y_ref, y_euler, x_tilde, x_euler):
    """Pathwise rate bounds for ``m = n^2`` on one driver.

    * ``|Y^n - Y^{n,n^2}| <= Z3 n^-(1-beta)``
    * ``|X~ - X^n| <= Z5 Z3 n^-(1-beta) + Z6 / n`` with ``Z5 = exp(M2 N)`` and
      ``Z6 = Mbar^2 N exp(Mbar N)``.
    """
    n, beta = params.n, params.beta
    T = float(driver.grid[-1])
    N = max(driver.sup_abs, float(np.max(np.abs(y_euler.y))))
    K = driver.lipschitz_certificate / float(n) ** (1 + beta)
    logz3 = log_rate_constant(c, N, K, T)
    log_y = logz3 - (1 - beta) * math.log(n)
    mb = c.flow_bound
    log_x = _logsum([c.diffusion_slope_bound * N + log_y,
                     _log(mb * mb * N) + mb * N - math.log(n)])
    ctx = {"n": n, "container": N, "K_hat": K, "log_Z3": logz3, "seed": driver.seed}
    y_gap = float(np.max(np.abs(y_ref.y - y_euler.y)))
    x_gap = float(np.max(np.abs(x_tilde.x - x_euler.x)))
    return [
        BoundReport("Y rate bound Z3 n^-(1-beta)", y_gap, _exp_or_inf(log_y),
                    dict(ctx, log_bound=log_y)),
        BoundReport("X rate bound Z5 Z3 n^-(1-beta) + Z6/n", x_gap, _exp_or_inf(log_x),
                    dict(ctx, log_bound=log_x)),
        BoundReport("square containment", N, float(n), ctx),
    ]


# -- Monte Carlo ------------------------------------------------------------------------

def _map(fn, items, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(fn, items))
    return [fn(i) for i in items]


def sample_matrix(params, grid, replicas, master_seed, threads=1):
    """``replicas x len(grid)`` samples of the approximant, replica ``r`` on stream ``r``."""
    replicas = check_positive_int(replicas, "replicas")
    return np.array(_map(lambda r: sample_bn(params, grid, RngSeed(master_seed, r)).values,
                         range(replicas), threads))


def covariance_experiment(params, replicas, grid, seed, tolerance=None, bias_allowance=0.05,
                          threads=1):
    """Monte Carlo covariance of the approximant against the fBm covariance.

    Passes when the largest entrywise error is within ``tolerance``, which
    defaults to three standard errors (largest over entries) plus
    ``bias_allowance``.
    """
    if replicas is None or replicas < 2:
        raise InsufficientDataError("covariance estimation needs at least 2 replicas")
    master = seed.master_seed if isinstance(seed, RngSeed) else int(seed)
    grid = np.asarray(grid, dtype=float)
    S = sample_matrix(params, grid, replicas, master, threads)
    centered = S - S.mean(axis=0)
    prods = centered[:, :, None] * centered[:, None, :]
    cov = prods.sum(axis=0) / (replicas - 1)
    se = prods.std(axis=0, ddof=1) / math.sqrt(replicas)
    exact = fbm_covariance(params.H, grid[:, None], grid[None, :])
    err = np.abs(cov - exact)
    tol = 3.0 * float(se.max()) + bias_allowance if tolerance is None else float(tolerance)
    return BoundReport(
        "covariance vs fBm", float(err.max()), tol,
        {"H": params.H, "n": params.n, "replicas": replicas, "seed": master,
         "max_se": float(se.max()), "mc_cov": cov.tolist(), "exact_cov": exact.tolist()},
    )


def lipschitz_trend(H, beta, ns, seed, a=-1.0, T=1.0, steps_per_unit=None):
    """Normalized grid Lipschitz constants over an ``n`` sweep.

    The driver for each ``n`` is sampled on a uniform grid of ``n^2`` steps
    per unit time unless ``steps_per_unit`` is given.  Returns the list of
    audits and ``max/min`` of their normalized constants.
    """
    reports = []
    master = seed.master_seed if isinstance(seed, RngSeed) else int(seed)
    for n in ns:
        p = ApproxParams(H, beta, n, a, T)
        steps = int(round((steps_per_unit or n * n) * T))
        d = sample_bn(p, uniform_grid(T, steps), RngSeed(master, 0))
        reports.append(lipschitz_audit(d))
    ks = [r.context["K_hat"] for r in reports]
    ratio = max(ks) / min(ks) if min(ks) > 0 else math.inf
    return reports, ratio


@dataclass(frozen=True)
class RateRow:
    n: int
    replicas: int
    mean_err: float
    median_err: float
    max_err: float


@dataclass
class RateTable:
    """Sup-error statistics per ``n`` and the log-log fit of the mean error."""

    rows: list
    slope: float
    intercept: float
    residual: float
    reports: list = field(default_factory=list)
    errors: dict = field(default_factory=dict)

    @property
    def ns(self):
        return [r.n for r in self.rows]

    @property
    def passed(self):
        return all(r.passed for r in self.reports)


@dataclass
class ConvergenceConfig:
    """Settings of the same-driver convergence experiment (``m = n^2`` throughout)."""

    coeffs: object = "sin-cos"
    H: float = 0.75
    beta: float = 0.3
    delta: float | None = None
    a: float = -1.0
    T: float = 1.0
    ns: tuple = (8, 16, 32, 64)
    replicas: int = 20
    master_seed: int = 0
    reference_substeps: int = 1
    threads: int = 1
    check_bounds: bool = True

    def coefficient_set(self):
        return get_preset(self.coeffs) if isinstance(self.coeffs, str) else self.coeffs


def same_driver_errors(c, params, seed, reference_substeps=1, check_bounds=True):
    """``sup_t |X~ - X^n|`` on one driver, with the pathwise rate reports."""
    n, T = params.n, params.T
    grid = uniform_grid(T, n * n)
    drv = sample_bn(params, grid, seed)
    y_ref = solve_y(c, drv, step=T / (n * n) / reference_substeps, validate=False)
    x_tilde = compose_x(HFlow(c), y_ref, drv)
    y_eu = euler_y(c, n, n * n, drv, validate=False)
    x_eu = compose_x(EulerGridH(c, n), y_eu, drv)
    err = sup_norm_diff(x_tilde, x_eu)
    reps = check_rate_bounds(c, params, drv, y_ref, y_eu, x_tilde, x_eu) if check_bounds else []
    return err, reps


def convergence_experiment(config):
    """Same-driver error between X~ = h(Y^n, B^n) and X^n = h^n(Y^{n,n^2}, B^n) over an n sweep."""
    ns = [int(n) for n in config.ns]
    if len(ns) < 3:
        raise InsufficientDataError(f"a rate fit needs at least 3 values of n, got {len(ns)}")
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise InvalidParameterError("the n sweep must be strictly increasing")
    c = config.coefficient_set()
    rep = validate_coeffs(c)
    if not rep.passed:
        raise InvalidParameterError(f"coefficients violate their bounds: {rep.context['violations']}")
    replicas = check_positive_int(config.replicas, "replicas")
    rows, reports, errors = [], [], {}
    for n in ns:
        params = ApproxParams(config.H, config.beta, n, config.a, config.T, config.delta)
        out = _map(lambda r: same_driver_errors(c, params, RngSeed(config.master_seed, r),
                                                config.reference_substeps, config.check_bounds),
                   range(replicas), config.threads)
        errs = [e for e, _ in out]
        for _, rs in out:
            reports.extend(rs)
        errors[n] = errs
        rows.append(RateRow(n, replicas, math.fsum(errs) / replicas,
                            float(statistics.median(errs)), max(errs)))
    means = [r.mean_err for r in rows]
    if all(m > 0 for m in means):
        slope, intercept, resid = rate_fit(ns, means)
    else:
        slope = intercept = resid = math.nan
    return RateTable(rows, slope, intercept, resid, reports, errors)
