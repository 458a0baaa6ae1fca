"""Coefficient sets ``(sigma, b)`` with derivatives and declared bounds.

Every coefficient function has the signature ``f(x, p)`` where ``p`` is a
float64 parameter array.  When all five callables are numba-compiled the
solver kernels run compiled; otherwise they fall back to plain Python.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numba
import numpy as np

from ..errors import InvalidParameterError
from ..reports import BoundReport


@dataclass(frozen=True, eq=False)
class CoefficientSet:
    """Diffusion ``sigma`` and drift ``b`` of ``dX = b(X) dt + sigma(X) dB``.

    Declared bounds, all assumed to hold on the whole real line:

    * ``drift_bound``               sup |b|
    * ``diffusion_slope_bound``     sup |sigma'|
    * ``diffusion_curvature_bound`` sup |sigma''|
    * ``drift_lipschitz``           Lipschitz constant of b (and sup |b'|)
    * ``diffusion_bound``           sup |sigma|
    """

    name: str
    sigma: Callable
    dsigma: Callable
    d2sigma: Callable
    b: Callable
    db: Callable
    drift_bound: float
    diffusion_slope_bound: float
    diffusion_curvature_bound: float
    drift_lipschitz: float
    diffusion_bound: float
    x0: float = 0.1
    params: np.ndarray = field(default_factory=lambda: np.zeros(1))

    def __post_init__(self):
        for k in ("drift_bound", "diffusion_slope_bound", "diffusion_curvature_bound",
                  "drift_lipschitz", "diffusion_bound"):
            v = getattr(self, k)
            if not (isinstance(v, (int, float)) and v >= 0 and math.isfinite(v)):
                raise InvalidParameterError(f"{k} must be a nonnegative finite real, got {v!r}")
        p = np.ascontiguousarray(self.params, dtype=np.float64).reshape(-1)
        if p.size == 0:
            p = np.zeros(1)
        p.setflags(write=False)
        object.__setattr__(self, "params", p)
        object.__setattr__(self, "x0", float(self.x0))

    @property
    def bounds(self):
        """``(M1, M2, M3, M4, M5)`` in the order drift, slope, curvature, drift-Lipschitz, diffusion."""
        return (self.drift_bound, self.diffusion_slope_bound, self.diffusion_curvature_bound,
                self.drift_lipschitz, self.diffusion_bound)

    @property
    def flow_bound(self):
        """``max(sup|sigma'|, sup|sigma|)``, the constant of the h-flow error estimates."""
        return max(self.diffusion_slope_bound, self.diffusion_bound)

    @property
    def overall_bound(self):
        return max(self.bounds)

    @property
    def compiled(self):
        return all(isinstance(f, numba.core.registry.CPUDispatcher)
                   for f in (self.sigma, self.dsigma, self.d2sigma, self.b, self.db))

    def with_x0(self, x0):
        return CoefficientSet(self.name, self.sigma, self.dsigma, self.d2sigma, self.b, self.db,
                              *self.bounds, x0=x0, params=self.params)


# -- presets -------------------------------------------------------------------

@numba.njit
def _const0(x, p):
    return p[0]


@numba.njit
def _const1(x, p):
    return p[1]


@numba.njit
def _zero(x, p):
    return 0.0


@numba.njit
def _sin(x, p):
    return math.sin(x)


@numba.njit
def _cos(x, p):
    return math.cos(x)


@numba.njit
def _neg_sin(x, p):
    return -math.sin(x)


@numba.njit
def _atan(x, p):
    return math.atan(x)


@numba.njit
def _datan(x, p):
    return 1.0 / (1.0 + x * x)


@numba.njit
def _d2atan(x, p):
    u = 1.0 + x * x
    return -2.0 * x / (u * u)


def linear(b0=0.5, c=1.0, x0=0.1):
    """Constant drift ``b0`` and constant diffusion ``c``: X = x0 + b0 t + c B."""
    b0, c = float(b0), float(c)
    return CoefficientSet("linear", _const1, _zero, _zero, _const0, _zero,
                          abs(b0), 0.0, 0.0, 0.0, abs(c), x0=x0, params=np.array([b0, c]))


def sin_cos(x0=0.1):
    """``sigma = sin``, ``b = cos``; every declared bound equals 1."""
    return CoefficientSet("sin-cos", _sin, _cos, _neg_sin, _cos, _neg_sin,
                          1.0, 1.0, 1.0, 1.0, 1.0, x0=x0)


def arctan_demo(x0=0.1):
    """``sigma = arctan``, ``b = cos``.

    ``|arctan''|`` peaks at ``x = 1/sqrt(3)`` with value ``9 / (8 sqrt 3)``.
    """
    return CoefficientSet("arctan-demo", _atan, _datan, _d2atan, _cos, _neg_sin,
                          1.0, 1.0, 9.0 / (8.0 * math.sqrt(3.0)), 1.0, math.pi / 2, x0=x0)


PRESETS = {
    "linear": linear,
    "sin-cos": sin_cos,
    "arctan-demo": arctan_demo,
}


def register_preset(name, factory):
    """Make a coefficient factory available by name (CLI ``preset`` key)."""
    if name in PRESETS:
        raise InvalidParameterError(f"preset {name!r} already registered")
    PRESETS[name] = factory


def get_preset(name, **kwargs):
    try:
        factory = PRESETS[name]
    except KeyError:
        raise InvalidParameterError(
            f"unknown coefficient preset {name!r}; known: {sorted(PRESETS)}") from None
    return factory(**kwargs)


# -- validation ------------------------------------------------------------------

def validate_coeffs(c, sample_grid=None):
    """Compare sampled sup norms of sigma, sigma', sigma'', b, b' with the declared bounds.

    ``measured`` is the largest excess of a sampled maximum over its declared
    bound, so the report passes exactly when no bound is exceeded.  Each
    violation is listed in ``context["violations"]`` with a witness point.
    """
    if sample_grid is None:
        sample_grid = np.linspace(-20.0, 20.0, 4001)
    xs = np.asarray(sample_grid, dtype=float).reshape(-1)
    p = c.params
    checks = [
        ("|b|", c.b, c.drift_bound),
        ("|sigma'|", c.dsigma, c.diffusion_slope_bound),
        ("|sigma''|", c.d2sigma, c.diffusion_curvature_bound),
        ("|b'|", c.db, c.drift_lipschitz),
        ("|sigma|", c.sigma, c.diffusion_bound),
    ]
    sampled = {}
    violations = []
    worst = -math.inf
    for label, fn, declared in checks:
        vals = np.abs(np.array([fn(float(x), p) for x in xs]))
        i = int(np.argmax(vals))
        sampled[label] = float(vals[i])
        excess = float(vals[i]) - declared
        worst = max(worst, excess)
        if excess > 0:
            violations.append({"quantity": label, "declared": declared,
                               "sampled": float(vals[i]), "witness": float(xs[i])})
    return BoundReport("coefficient-bounds", worst, 0.0,
                       {"preset": c.name, "sampled": sampled, "violations": violations})
