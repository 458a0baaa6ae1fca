"""Solvers for the random ODE ``Y' = f(Y, B_t)`` and the composition ``X = h(Y, B)``."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .._validation import check_positive, check_positive_int, same_grid
from ..errors import ConfigurationError, IntegrationError, InvalidParameterError
from . import _kernels
from .coefficients import validate_coeffs
from .flow import DEFAULT_ATOL, DEFAULT_RTOL, EulerGridH, HFlow, _raise_status

REFERENCE_Y = "reference-Y"
EULER_Y = "euler-Y"
X_EXACT_H = "X-exact-h"
X_EULER = "X-euler"
X_TILDE = "X-tilde"
PROVENANCES = (REFERENCE_Y, EULER_Y, X_EXACT_H, X_EULER, X_TILDE)


@dataclass(frozen=True, eq=False)
class SolutionPath:
    """Solution values on a time grid.

    ``y`` holds the transformed process, ``x`` the SDE solution when it has
    been composed.  ``provenance`` names the solver chain that produced the
    path and ``meta`` holds its resolutions (``n``, ``m``, step).
    """

    grid: np.ndarray
    provenance: str
    y: np.ndarray | None = None
    x: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise InvalidParameterError(f"unknown provenance {self.provenance!r}")
        grid = np.asarray(self.grid, dtype=float)
        for name in ("y", "x"):
            v = getattr(self, name)
            if v is not None:
                v = np.asarray(v, dtype=float)
                if v.shape != grid.shape:
                    raise ConfigurationError(f"{name} values do not match the grid")
                v.setflags(write=False)
                object.__setattr__(self, name, v)
        grid.setflags(write=False)
        object.__setattr__(self, "grid", grid)

    @property
    def values(self):
        """X values if present, otherwise Y values."""
        return self.x if self.x is not None else self.y

    @property
    def label(self):
        if self.provenance == EULER_Y:
            return f"euler-Y({self.meta.get('n')},{self.meta.get('m')})"
        return self.provenance

    def __call__(self, t):
        return np.interp(t, self.grid, self.values)


def _require_valid(c):
    rep = validate_coeffs(c)
    if not rep.passed:
        raise InvalidParameterError(
            f"coefficients violate their declared bounds: {rep.context['violations']}")


def solve_y(c, driver, step=None, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL, validate=True):
    """Reference solution of ``Y' = exp(-I(Y, B_t)) b(h(Y, B_t))``, ``Y_0 = x0``.

    Fixed-step classical RK4 with the driver linearly interpolated between
    its grid nodes; each grid cell is split into equal substeps no longer
    than ``step`` (default: one step per cell).  The flow inside ``f`` is
    integrated adaptively to ``rtol``/``atol``.
    """
    if validate:
        _require_valid(c)
    grid = driver.grid
    if grid[0] != 0.0:
        raise ConfigurationError("driver grid must start at t = 0")
    if step is None:
        step = float(np.max(np.diff(grid))) if len(grid) > 1 else 1.0
    step = check_positive(step, "step")
    k = _kernels.kernels_for(c)
    ys, status = k.rk4_y(k.flow, c.sigma, c.dsigma, c.d2sigma, c.b, c.params, c.x0,
                         np.ascontiguousarray(grid), np.ascontiguousarray(driver.values),
                         step, rtol, atol)
    _raise_status(status, " inside the RK4 solve")
    return SolutionPath(grid, REFERENCE_Y, y=ys, meta={"step": step, "coeffs": c.name})


def euler_bound(c, T, driver_sup):
    """``|x0| + T M1 exp(M2 ||B||)``: a priori bound on the Euler iterates."""
    return abs(c.x0) + T * c.drift_bound * math.exp(c.diffusion_slope_bound * driver_sup)


def euler_y(c, n, m=None, driver=None, validate=True):
    """Euler scheme in time with step ``T/m`` using the Euler-grid right-hand side ``f^n``.

    The driver enters only through its values at ``t_k = k T / m``; the
    result is reported on the driver grid, linear inside each Euler step.
    ``m`` defaults to ``n**2``.
    """
    if driver is None:
        raise ConfigurationError("euler_y needs a driver")
    n = check_positive_int(n, "n")
    m = n * n if m is None else check_positive_int(m, "m")
    if validate:
        _require_valid(c)
    grid = driver.grid
    if grid[0] != 0.0:
        raise ConfigurationError("driver grid must start at t = 0")
    T = float(grid[-1])
    nodes = np.arange(m + 1) * (T / m)
    bnodes = np.ascontiguousarray(driver(nodes))
    k = _kernels.kernels_for(c)
    ys = k.euler_y(k.f_euler, c.sigma, c.dsigma, c.b, c.params, n, m, T, c.x0,
                   bnodes, np.ascontiguousarray(grid))
    bound = euler_bound(c, T, float(np.max(np.abs(bnodes))))
    worst = float(np.max(np.abs(ys)))
    if worst > bound * (1 + 1e-12) + 1e-300:
        raise IntegrationError(f"Euler iterates left their a priori bound: {worst} > {bound}")
    return SolutionPath(grid, EULER_Y, y=ys, meta={"n": n, "m": m, "coeffs": c.name})


def compose_x(h_evaluator, y, driver):
    """``X_t = h(Y_t, B_t)`` on the shared grid.

    Provenance: Euler-grid ``h^n`` with ``Y^{n, n^2}`` gives X-euler; the
    adaptive flow with the reference Y gives X-tilde on a transport driver
    and X-exact-h otherwise; the adaptive flow with an Euler Y also gives
    X-exact-h.  Other combinations are rejected.
    """
    if not same_grid(y.grid, driver.grid):
        raise ConfigurationError("solution and driver grids differ")
    if y.y is None:
        raise ConfigurationError("solution path has no Y values")
    xs = h_evaluator(y.y, driver.values)
    meta = dict(y.meta)
    if isinstance(h_evaluator, EulerGridH):
        if y.provenance != EULER_Y:
            raise ConfigurationError("the Euler-grid h composes only with an Euler Y")
        n, m = y.meta.get("n"), y.meta.get("m")
        if n != h_evaluator.n or m != n * n:
            raise ConfigurationError(
                f"X-euler needs h^n with Y^(n, n^2); got h^{h_evaluator.n} with Y^({n}, {m})")
        prov = X_EULER
    elif isinstance(h_evaluator, HFlow):
        if y.provenance == REFERENCE_Y and driver.kind == "transport-approx":
            prov = X_TILDE
        elif y.provenance in (REFERENCE_Y, EULER_Y):
            prov = X_EXACT_H
        else:
            raise ConfigurationError(f"cannot compose X from a {y.provenance} path")
    else:
        raise ConfigurationError("h_evaluator must be an HFlow or an EulerGridH")
    meta["y_provenance"] = y.label
    return SolutionPath(y.grid, prov, y=y.y, x=xs, meta=meta)
