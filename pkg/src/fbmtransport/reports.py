"""Measured-versus-bound records emitted by the audits and experiments."""
from __future__ import annotations

import math
from dataclasses import dataclass, field


@dataclass(frozen=True)
class BoundReport:
    """A measured quantity compared against an explicit upper bound.

    ``passed`` is true exactly when ``margin = bound - measured`` is nonnegative;
    a NaN on either side fails.
    """

    name: str
    measured: float
    bound: float
    context: dict = field(default_factory=dict, compare=False)

    @property
    def margin(self):
        return float(self.bound) - float(self.measured)

    @property
    def passed(self):
        m = self.margin
        if math.isnan(m):
            # inf - inf: an infinite measurement never passes
            return False
        return m >= 0.0

    def summary(self):
        flag = "PASS" if self.passed else "FAIL"
        return f"[{flag}] {self.name}: measured={self.measured:.6g} bound={self.bound:.6g}"
