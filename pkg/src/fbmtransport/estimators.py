"""scikit-learn style wrappers around the driver sampler and the SDE solvers.

The objects follow the ``get_params``/``set_params`` protocol so they can be
cloned and swept in parameter grids.  There is no supervised target: the
sampler's ``fit`` only validates its parameters, and the solver is fitted to
a driver path.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .doss_sussmann import EulerGridH, HFlow, compose_x, euler_y, get_preset, solve_y
from .errors import InvalidParameterError
from .fbm_driver import ApproxParams, sample_bn
from .transport import RngSeed


class TransportFBM(BaseEstimator):
    """Sampler of the transport approximation of fractional Brownian motion."""

    def __init__(self, H=0.75, beta=0.3, n=50, a=-1.0, T=1.0, delta=None, master_seed=0):
        self.H = H
        self.beta = beta
        self.n = n
        self.a = a
        self.T = T
        self.delta = delta
        self.master_seed = master_seed

    def fit(self, X=None, y=None):
        self.params_ = ApproxParams(self.H, self.beta, self.n, self.a, self.T, self.delta)
        return self

    def sample(self, grid, replica=0):
        """One driver path on ``grid``; replica ``r`` uses random stream ``r``."""
        check_is_fitted(self, "params_")
        return sample_bn(self.params_, grid, RngSeed(self.master_seed, replica))

    def sample_many(self, grid, replicas):
        """Array ``replicas x len(grid)`` of driver values."""
        return np.array([self.sample(grid, r).values for r in range(replicas)])


class DossSussmannSolver(BaseEstimator):
    """Solve ``dX = b(X) dt + sigma(X) dB`` pathwise for a given driver.

    ``scheme="euler"`` gives ``h^n(Y^{n,m}, B)`` (``m`` defaults to ``n^2``),
    ``scheme="reference"`` the adaptive flow composed with the RK4 solution.
    """

    def __init__(self, preset="sin-cos", x0=0.1, n=16, m=None, scheme="euler",
                 reference_substeps=1):
        self.preset = preset
        self.x0 = x0
        self.n = n
        self.m = m
        self.scheme = scheme
        self.reference_substeps = reference_substeps

    def fit(self, driver, y=None):
        c = get_preset(self.preset, x0=self.x0)
        if self.scheme == "euler":
            self.y_path_ = euler_y(c, self.n, self.m, driver)
            h = EulerGridH(c, self.n) if (self.m or self.n ** 2) == self.n ** 2 else HFlow(c)
        elif self.scheme == "reference":
            step = (driver.grid[1] - driver.grid[0]) / self.reference_substeps
            self.y_path_ = solve_y(c, driver, step=step)
            h = HFlow(c)
        else:
            raise InvalidParameterError(f"unknown scheme {self.scheme!r}")
        self.path_ = compose_x(h, self.y_path_, driver)
        return self

    def predict(self, t):
        """Solution X at times ``t`` (linear interpolation between grid nodes)."""
        check_is_fitted(self, "path_")
        return self.path_(np.asarray(t, dtype=float))
