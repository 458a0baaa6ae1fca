"""Uniform transport processes and Stieltjes integrals against them.

A transport process of rate ``n`` moves with velocity ``+n`` or ``-n`` and
flips direction after i.i.d. Exponential(n**2) holding times.  Paths are stored
as holding-time gaps and evaluated as piecewise-linear functions on an interval
of the real line, either anchored at the left end and running forward, or
anchored at the right end and running backward (toward more negative times).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import integrate

from ._validation import check_positive
from .errors import DomainError, InvalidParameterError, QuadratureError

DEFAULT_TOL = 1e-10

__all__ = [
    "Orientation",
    "RngSeed",
    "TransportPath",
    "generate_transport",
    "eval_transport",
    "integrate_against",
    "sup_abs",
]


class Orientation(str, enum.Enum):
    FORWARD = "forward"
    BACKWARD = "backward"


@dataclass(frozen=True)
class RngSeed:
    """Key of a reproducible random stream.

    The stream is a Philox counter-based generator keyed on
    ``(master_seed, stream_index, substream)``; replicas use distinct
    ``stream_index`` values, and the independent pieces of one replica use
    distinct ``substream`` values.
    """

    master_seed: int
    stream_index: int = 0
    substream: int = 0

    def __post_init__(self):
        if not (0 <= int(self.master_seed) < 2**64):
            raise InvalidParameterError("master_seed must be an unsigned 64-bit integer")
        if int(self.stream_index) < 0 or int(self.substream) < 0:
            raise InvalidParameterError("stream_index and substream must be nonnegative")

    def generator(self):
        ss = np.random.SeedSequence(
            int(self.master_seed), spawn_key=(int(self.stream_index), int(self.substream))
        )
        return np.random.Generator(np.random.Philox(ss))

    def with_substream(self, substream):
        return RngSeed(self.master_seed, self.stream_index, substream)


@dataclass(frozen=True, eq=False)
class TransportPath:
    """Piecewise-linear path with slopes alternating between ``+rate`` and ``-rate``.

    ``gaps`` are the holding times between consecutive reversals, measured as
    elapsed time from the anchor.  ``reversal_times`` is their cumulative sum;
    the last one may exceed ``horizon``, in which case the final piece is cut
    at the horizon.  If the gaps stop short of the horizon the last piece is
    extended to it.
    """

    rate: float
    initial_sign: int
    gaps: np.ndarray
    horizon: float
    orientation: Orientation = Orientation.FORWARD
    anchor: float = 0.0

    def __post_init__(self):
        check_positive(self.rate, "rate")
        check_positive(self.horizon, "horizon")
        if self.initial_sign not in (1, -1):
            raise InvalidParameterError("initial_sign must be +1 or -1")
        gaps = np.asarray(self.gaps, dtype=float).reshape(-1)
        if np.any(gaps <= 0) or not np.all(np.isfinite(gaps)):
            raise InvalidParameterError("holding-time gaps must be positive and finite")
        gaps.setflags(write=False)
        object.__setattr__(self, "gaps", gaps)
        object.__setattr__(self, "orientation", Orientation(self.orientation))

    @classmethod
    def from_reversals(cls, rate, initial_sign, reversal_times, horizon,
                       orientation=Orientation.FORWARD, anchor=0.0):
        times = np.asarray(reversal_times, dtype=float).reshape(-1)
        gaps = np.diff(np.concatenate(([0.0], times)))
        return cls(rate, initial_sign, gaps, horizon, orientation, anchor)

    @property
    def reversal_times(self):
        return np.cumsum(self.gaps)

    @property
    def interval(self):
        if self.orientation is Orientation.FORWARD:
            return (self.anchor, self.anchor + self.horizon)
        return (self.anchor - self.horizon, self.anchor)

    @cached_property
    def _elapsed(self):
        # piece lengths in elapsed time, truncated at the horizon
        cum = np.cumsum(self.gaps)
        k = int(np.searchsorted(cum, self.horizon, side="left"))
        lengths = self.gaps[: k + 1].copy()
        if k < len(self.gaps):
            lengths[-1] = self.horizon - (cum[k - 1] if k > 0 else 0.0)
        else:
            tail = self.horizon - (cum[-1] if len(cum) else 0.0)
            if tail > 0:
                lengths = np.append(lengths, tail)
        lengths = lengths[lengths > 0]
        signs = self.initial_sign * np.where(np.arange(len(lengths)) % 2 == 0, 1.0, -1.0)
        knots = np.concatenate(([0.0], np.cumsum(lengths)))
        knots[-1] = self.horizon
        values = np.concatenate(([0.0], np.cumsum(signs * self.rate * lengths)))
        return knots, values, signs * self.rate

    @cached_property
    def pieces(self):
        """``(knots, values, slopes)`` in ascending real-line coordinates.

        ``knots`` has one more entry than ``slopes``; ``values[i]`` is the path
        value at ``knots[i]`` and ``slopes[i]`` the slope on
        ``[knots[i], knots[i + 1]]`` with respect to the line coordinate.
        """
        tau, vals, vel = self._elapsed
        if self.orientation is Orientation.FORWARD:
            knots = self.anchor + tau
            knots[0] = self.anchor
            out = (knots, vals, vel)
        else:
            knots = (self.anchor - tau)[::-1]
            knots[-1] = self.anchor
            knots[0] = self.anchor - self.horizon
            out = (knots, vals[::-1].copy(), -vel[::-1])
        for a in out:
            a.setflags(write=False)
        return out

    @property
    def n_pieces(self):
        return len(self.pieces[2])

    def __call__(self, t):
        return eval_transport(self, t)


def _draw_gaps(rng, rate, horizon):
    expected = horizon * rate * rate
    chunk = int(expected + 6.0 * math.sqrt(expected) + 16)
    parts = []
    total = 0.0
    while total < horizon:
        g = rng.standard_exponential(chunk) / (rate * rate)
        cum = total + np.cumsum(g)
        k = int(np.searchsorted(cum, horizon, side="left"))
        if k < chunk:
            parts.append(g[: k + 1])
            break
        parts.append(g)
        total = float(cum[-1])
    return np.concatenate(parts)


def generate_transport(rate, horizon, orientation=Orientation.FORWARD, seed=None, anchor=0.0):
    """Sample a transport path of velocity ``+-rate`` over ``horizon`` units of time.

    The initial direction is a fair coin; holding times are Exponential with
    rate ``rate**2`` and are drawn until their cumulative sum reaches the
    horizon.
    """
    rate = check_positive(rate, "rate")
    horizon = check_positive(horizon, "horizon")
    if seed is None:
        seed = RngSeed(0)
    rng = seed.generator()
    sign = 1 if rng.random() < 0.5 else -1
    gaps = _draw_gaps(rng, rate, horizon)
    return TransportPath(rate, sign, gaps, horizon, Orientation(orientation), float(anchor))


def _check_in(path, t):
    u, v = path.interval
    t = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(t)) or np.any(t < u) or np.any(t > v):
        raise DomainError(f"evaluation point outside the path interval [{u}, {v}]")
    return t


def eval_transport(path, t):
    """Value of the path at ``t`` (scalar or array) by piecewise-linear interpolation."""
    t = _check_in(path, t)
    knots, values, slopes = path.pieces
    idx = np.clip(np.searchsorted(knots, t, side="right") - 1, 0, len(slopes) - 1)
    out = values[idx] + slopes[idx] * (t - knots[idx])
    # exact knot values, so the anchor evaluates to exactly zero
    hit = knots[idx + 1] == t
    out = np.where(hit, values[idx + 1], out)
    return float(out) if out.ndim == 0 else out


def sup_abs(path):
    """Exact maximum of ``|path|``; attained at a knot."""
    return float(np.max(np.abs(path.pieces[1])))


def _overlaps(path, u, v):
    knots, _, slopes = path.pieces
    a = np.clip(knots[:-1], u, v)
    b = np.clip(knots[1:], u, v)
    keep = b > a
    return a[keep], b[keep], slopes[keep]


def integrate_against(path, kernel, u=None, v=None, primitive=None, tol=DEFAULT_TOL):
    """Stieltjes integral of ``kernel`` against the path over ``[u, v]``.

    On each linear piece ``dZ = slope * ds``, so the integral is a sum of
    ordinary integrals of ``kernel``.  With ``primitive`` (an antiderivative
    of ``kernel`` accepting arrays) the pieces are evaluated in closed form;
    otherwise each piece goes through adaptive Gauss-Kronrod quadrature at
    relative tolerance ``tol``.
    """
    lo, hi = path.interval
    u = lo if u is None else float(u)
    v = hi if v is None else float(v)
    if u > v:
        raise DomainError("integration bounds must satisfy u <= v")
    if u < lo or v > hi:
        raise DomainError(f"[{u}, {v}] is not contained in the path interval [{lo}, {hi}]")
    a, b, slopes = _overlaps(path, u, v)
    if len(a) == 0:
        return 0.0
    if primitive is not None:
        return float(np.sum(slopes * (primitive(b) - primitive(a))))

    total = 0.0
    worst = None
    for ak, bk, sk in zip(a, b, slopes):
        val, err, *rest = integrate.quad(kernel, ak, bk, epsabs=1e-15 * (bk - ak),
                                         epsrel=tol, limit=200, full_output=1)
        # a fourth return value is QUADPACK's non-convergence message
        if len(rest) > 1 and (worst is None or err > worst[1]):
            worst = ((float(ak), float(bk)), float(err))
        total += sk * val
    if worst is not None:
        raise QuadratureError(
            f"adaptive quadrature missed tolerance {tol:g} on {worst[0]}",
            interval=worst[0], error_estimate=worst[1],
        )
    return float(total)
