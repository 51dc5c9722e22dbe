"""Trend functions c(t) and coordinatewise time transforms f(t)."""

from dataclasses import dataclass
from ruinbounds.interfaces import DEFAULT_HOLDER_CAP
from ruinbounds.interfaces import ITimeTransform
from ruinbounds.interfaces import ITrendFunction
from ruinbounds.interfaces import NonMonotoneTransform
from ruinbounds.interfaces import TransformHypothesisViolated
from zope.interface import implementer

import logging
import numpy as np

logger = logging.getLogger(__name__)

TREND_KINDS = ("zero", "linear", "power", "tabulated")
TRANSFORM_KINDS = ("power", "linear", "tabulated")

# Relative spread allowed between the last delta values before the horizon
DELTA_LIMIT_SPREAD = 0.10


@dataclass(frozen=True)
class Holder:
    """Hölder-class certificate |c_i(t) - c_i(t0)| <= M |t - t0|^alpha."""

    t0: float
    alpha: float
    M: float


@dataclass(frozen=True)
class Violation:
    t0: float
    alpha: float
    implied: float
    cap: float


def _points(grid):
    return np.asarray(getattr(grid, "points", grid), dtype=float)


def _table(points, values, dim):
    points = np.asarray(points, dtype=float)
    values = np.asarray(values, dtype=float).reshape(len(points), dim)
    if points.ndim != 1 or len(points) < 2:
        raise ValueError("tabulated points need at least two entries")
    if points[0] != 0.0 or np.any(np.diff(points) <= 0):
        raise ValueError("tabulated points must start at 0 and increase strictly")
    if not np.all(np.isfinite(values)):
        raise ValueError("tabulated values must be finite")
    return points, values


def _interpolate(t, points, values):
    t = np.asarray(t, dtype=float)
    columns = [np.interp(t, points, values[:, i]) for i in range(values.shape[1])]
    return np.stack(columns, axis=-1)


@implementer(ITrendFunction)
class TrendFunction:
    """Continuous trend evaluated coordinatewise.

    Use the ``zero``, ``linear``, ``power`` and ``tabulated`` constructors.
    Tabulated trends interpolate linearly and stay constant beyond the last
    point.
    """

    def __init__(self, kind, dim, coefficients=None, exponents=None, table=None):
        if kind not in TREND_KINDS:
            raise ValueError(f"unknown trend kind {kind!r}")
        self.kind = kind
        self.dim = dim
        self.coefficients = coefficients
        self.exponents = exponents
        self.table = table
        self.holder = None

    @classmethod
    def zero(cls, dim):
        return cls("zero", dim)

    @classmethod
    def linear(cls, coefficients):
        c = np.atleast_1d(np.array(coefficients, dtype=float))
        if not np.all(np.isfinite(c)):
            raise ValueError("linear trend coefficients must be finite")
        return cls("linear", len(c), coefficients=c)

    @classmethod
    def power(cls, coefficients, exponents):
        c = np.atleast_1d(np.array(coefficients, dtype=float))
        p = np.broadcast_to(np.array(exponents, dtype=float), c.shape).copy()
        if np.any(p <= 0):
            raise ValueError("power trend exponents must be positive")
        return cls("power", len(c), coefficients=c, exponents=p)

    @classmethod
    def tabulated(cls, points, values):
        values = np.asarray(values, dtype=float)
        dim = values.shape[1] if values.ndim == 2 else 1
        return cls("tabulated", dim, table=_table(points, values, dim))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "zero":
            return np.zeros(t.shape + (self.dim,))
        if self.kind == "linear":
            return t[..., np.newaxis] * self.coefficients
        if self.kind == "power":
            return self.coefficients * np.power(t[..., np.newaxis], self.exponents)
        return _interpolate(t, *self.table)

    @property
    def is_zero(self):
        if self.kind == "zero":
            return True
        if self.kind in ("linear", "power"):
            return not np.any(self.coefficients)
        return not np.any(self.table[1])

    def with_holder(self, t0, alpha, M):
        """Copy carrying a validated Hölder certificate."""
        trend = TrendFunction(
            self.kind, self.dim, self.coefficients, self.exponents, self.table
        )
        trend.holder = Holder(float(t0), float(alpha), float(M))
        return trend

    def describe(self):
        if self.kind == "zero":
            return "zero"
        if self.kind == "linear":
            return "linear:" + ",".join(f"{c:g}" for c in self.coefficients)
        if self.kind == "power":
            return "power:" + ",".join(
                f"{c:g}*t^{p:g}" for c, p in zip(self.coefficients, self.exponents)
            )
        return f"tabulated:{len(self.table[0])}"

    def __repr__(self):
        return f"<TrendFunction {self.describe()} d={self.dim}>"


def holder_check(trend, t0, alpha, grid, cap=DEFAULT_HOLDER_CAP):
    """Smallest M with |c_i(t) - c_i(t0)| <= M |t - t0|^alpha on the grid.

    Returns a ``Violation`` instead when that M exceeds ``cap``.
    """
    points = _points(grid)
    if t0 < points[0] or t0 > points[-1]:
        raise ValueError(f"t0 = {t0} lies outside [{points[0]}, {points[-1]}]")
    others = points[points != t0]
    if others.size == 0 or trend.is_zero:
        return 0.0
    jumps = np.abs(trend(others) - trend(t0))
    ratios = jumps / np.abs(others - t0)[:, np.newaxis] ** alpha
    implied = float(np.max(ratios))
    if not np.isfinite(implied) or implied > cap:
        return Violation(float(t0), float(alpha), implied, float(cap))
    return implied


@implementer(ITimeTransform)
class TimeTransform:
    """Clocks f_i, strictly increasing with f_i(0) = 0.

    ``power`` clocks are t**p_i (p_i = 2 H_i for the fBm majorant),
    ``linear`` clocks are s_i * t and ``tabulated`` clocks interpolate.
    """

    def __init__(self, kind, parameters=None, table=None):
        if kind not in TRANSFORM_KINDS:
            raise ValueError(f"unknown transform kind {kind!r}")
        self.kind = kind
        self.parameters = parameters
        self.table = table
        if table is not None:
            self.dim = table[1].shape[1]
        else:
            self.dim = len(parameters)

    @classmethod
    def power(cls, exponents):
        p = np.atleast_1d(np.array(exponents, dtype=float))
        if np.any(p <= 0):
            raise NonMonotoneTransform("power clock exponents must be positive")
        return cls("power", p)

    @classmethod
    def from_hurst(cls, hurst):
        return cls.power(2.0 * np.atleast_1d(np.asarray(hurst, dtype=float)))

    @classmethod
    def identity(cls, dim):
        return cls("linear", np.ones(dim))

    @classmethod
    def linear(cls, scales):
        s = np.atleast_1d(np.array(scales, dtype=float))
        if np.any(s <= 0):
            raise NonMonotoneTransform("linear clock scales must be positive")
        return cls("linear", s)

    @classmethod
    def tabulated(cls, points, values):
        values = np.asarray(values, dtype=float)
        dim = values.shape[1] if values.ndim == 2 else 1
        points, values = _table(points, values, dim)
        if np.any(values[0] != 0.0) or np.any(np.diff(values, axis=0) <= 0):
            raise NonMonotoneTransform(
                "tabulated clocks must start at 0 and increase strictly"
            )
        return cls("tabulated", table=(points, values))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "power":
            return np.power(t[..., np.newaxis], self.parameters)
        if self.kind == "linear":
            return t[..., np.newaxis] * self.parameters
        return _interpolate(t, *self.table)

    def delta(self, t, horizon):
        """delta_i(t) = (f_i(T) - f_i(t)) / (f_1(T) - f_1(t)) for t < T."""
        residual = self(horizon) - self(t)
        return residual / residual[..., :1]

    def validate(self, grid):
        """Check monotonicity on the grid and the delta limit at the horizon.

        Returns the delta values at the last grid point before the horizon,
        the limit estimate.
        """
        points = _points(grid)
        values = self(points)
        if np.any(np.abs(values[0]) > 0.0):
            raise NonMonotoneTransform("clocks must vanish at t = 0")
        if np.any(np.diff(values, axis=0) <= 0):
            column = int(np.argmax(np.any(np.diff(values, axis=0) <= 0, axis=0)))
            raise NonMonotoneTransform(
                f"clock {column + 1} is not strictly increasing on the grid"
            )
        if len(points) < 4:
            return self.delta(points[-2], points[-1])
        tail = self.delta(points[-4:-1], points[-1])
        spread = (tail.max(axis=0) - tail.min(axis=0)) / tail[-1]
        if np.any(spread >= DELTA_LIMIT_SPREAD):
            raise TransformHypothesisViolated(
                "delta has no stable limit at the horizon "
                f"(relative spread {float(spread.max()):.3g})"
            )
        return tail[-1]

    def describe(self):
        if self.kind == "tabulated":
            return f"tabulated:{len(self.table[0])}"
        return f"{self.kind}:" + ",".join(f"{p:g}" for p in self.parameters)

    def __repr__(self):
        return f"<TimeTransform {self.describe()}>"
