"""Ruin sets: finite unions of upper sets and their Gaussian probabilities."""

from collections import defaultdict
from dataclasses import dataclass
from itertools import combinations
from ruinbounds.gaussian import covariance_from_sigma
from ruinbounds.gaussian import mvn_rectangle_prob
from ruinbounds.gaussian import orthant_prob
from ruinbounds.gaussian import ProbEstimate
from ruinbounds.gaussian import sample_mvn
from ruinbounds.interfaces import ANALYTIC
from ruinbounds.interfaces import CONFIDENCE_LEVEL
from ruinbounds.interfaces import DimensionMismatch
from ruinbounds.interfaces import FamilyTooLarge
from ruinbounds.interfaces import ICovarianceModel
from ruinbounds.interfaces import INCLUSION_EXCLUSION
from ruinbounds.interfaces import IRuinSet
from ruinbounds.interfaces import MAX_INCLUSION_EXCLUSION_TERMS
from ruinbounds.interfaces import MONTE_CARLO
from ruinbounds.interfaces import OriginInSet
from ruinbounds.utils import binomial_interval
from zope.interface import implementer

import logging
import numpy as np

logger = logging.getLogger(__name__)

# Smallest per-term error target handed to the rectangle integrator
MIN_TERM_ERROR = 1e-8


class GrowingMap:
    """Nondecreasing coordinate map F with a closed-form inverse."""

    def __init__(self, kind="identity", scale=1.0, shift=0.0):
        if kind not in ("identity", "exp", "affine", "sinh"):
            raise ValueError(f"unknown growing map {kind!r}")
        if kind == "affine" and not scale > 0:
            raise ValueError(f"affine maps need a positive scale, got {scale}")
        self.kind = kind
        self.scale = float(scale)
        self.shift = float(shift)

    @classmethod
    def parse(cls, text):
        """Read ``identity``, ``exp``, ``sinh`` or ``affine:<scale>:<shift>``."""
        name, _, rest = text.strip().partition(":")
        if name != "affine":
            if rest:
                raise ValueError(f"map {name!r} takes no parameters")
            return cls(name)
        try:
            scale, shift = (float(part) for part in rest.split(":"))
        except ValueError:
            raise ValueError(f"expected affine:<scale>:<shift>, got {text!r}")
        return cls("affine", scale, shift)

    def __call__(self, x):
        if self.kind == "identity":
            return x
        if self.kind == "exp":
            return np.exp(x)
        if self.kind == "sinh":
            return np.sinh(x)
        return self.scale * x + self.shift

    def inverse(self, y):
        """Largest x with F(x) <= y, so that F(x') > y iff x' > inverse(y)."""
        y = np.asarray(y, dtype=float)
        if self.kind == "identity":
            return y
        if self.kind == "exp":
            with np.errstate(divide="ignore"):
                return np.where(y > 0, np.log(np.where(y > 0, y, 1.0)), -np.inf)
        if self.kind == "sinh":
            return np.arcsinh(y)
        return (y - self.shift) / self.scale

    def __str__(self):
        if self.kind == "affine":
            return f"affine:{self.scale:g}:{self.shift:g}"
        return self.kind

    def __eq__(self, other):
        return isinstance(other, GrowingMap) and str(self) == str(other)

    def __hash__(self):
        return hash(str(self))


@dataclass(frozen=True)
class ConeCertificate:
    epsilon: float
    abs_error: float
    cone_kind: str = "upper_orthant"
    t_dependence: str = "constant_in_t"


@implementer(IRuinSet)
class RuinSet:
    """S = union over the family of S_I = {x : F_i(x_i) > a_i for i in I}.

    ``family`` is a tuple of (indices, thresholds) pairs with 0-based
    indices. ``k`` is set when the family is the full k-of-d family with
    shared thresholds, which allows counting membership.
    """

    def __init__(self, dim, family, k=None, maps=None):
        self.dim = dim
        self.family = family
        self.k = k
        self.maps = maps
        if k is not None:
            self.thresholds = np.full(dim, np.nan)
            for indices, values in family:
                for i, a in zip(indices, values):
                    self.thresholds[i] = a

    def transformed(self, x):
        """Apply the growing maps coordinatewise."""
        x = np.asarray(x, dtype=float)
        if self.maps is None:
            return x
        return np.stack([F(x[..., i]) for i, F in enumerate(self.maps)], axis=-1)

    def contains(self, x, u):
        if not u > 0:
            raise ValueError(f"u must be positive, got {u}")
        y = self.transformed(x)
        if y.shape[-1] != self.dim:
            raise DimensionMismatch(
                f"points of dimension {y.shape[-1]}, set of {self.dim}"
            )
        if self.k is not None:
            count = np.count_nonzero(y > u * self.thresholds, axis=-1)
            return count >= self.k
        inside = np.zeros(y.shape[:-1], dtype=bool)
        for indices, values in self.family:
            inside |= np.all(y[..., list(indices)] > u * np.asarray(values), axis=-1)
        return inside

    def scaled(self, u):
        """The set u S."""
        family = tuple(
            (indices, tuple(u * a for a in values)) for indices, values in self.family
        )
        return RuinSet(self.dim, family, self.k, self.maps)

    def lower_bounds(self, u, mean):
        """Per-member lower bounds on x - mean, -inf off the index set."""
        mean = np.asarray(mean, dtype=float).reshape(self.dim)
        for indices, values in self.family:
            bound = np.full(self.dim, -np.inf)
            for i, a in zip(indices, values):
                threshold = u * a
                if self.maps is not None:
                    threshold = float(self.maps[i].inverse(threshold))
                bound[i] = threshold - mean[i]
            yield bound

    def __repr__(self):
        if self.k is not None:
            return f"<RuinSet {self.k}-of-{self.dim}>"
        return f"<RuinSet d={self.dim} members={len(self.family)}>"


def _check_maps(dim, maps):
    if maps is None:
        return None
    maps = tuple(GrowingMap.parse(F) if isinstance(F, str) else F for F in maps)
    if len(maps) != dim:
        raise DimensionMismatch(f"{len(maps)} growing maps for dimension {dim}")
    if all(F.kind == "identity" for F in maps):
        return None
    return maps


def _check_origin(indices, values, maps):
    at_origin = [0.0 if maps is None else float(maps[i](0.0)) for i in indices]
    if not any(f0 < a for f0, a in zip(at_origin, values)):
        raise OriginInSet(
            f"the origin lies in S_I for I = {tuple(i + 1 for i in indices)}"
        )


def make_k_of_d(d, k, a, maps=None):
    """At least k of the d coordinates exceed their thresholds."""
    if not 1 <= k <= d:
        raise ValueError(f"k must lie in [1, {d}], got {k}")
    a = tuple(float(value) for value in np.asarray(a, dtype=float).reshape(-1))
    if len(a) != d:
        raise DimensionMismatch(f"{len(a)} thresholds for dimension {d}")
    if any(value <= 0 for value in a):
        raise OriginInSet(f"k-of-d thresholds must be positive, got {a}")
    maps = _check_maps(d, maps)
    family = tuple(
        (indices, tuple(a[i] for i in indices))
        for indices in combinations(range(d), k)
    )
    if maps is not None:
        for indices, values in family:
            _check_origin(indices, values, maps)
    return RuinSet(d, family, k=k, maps=maps)


def make_union(d, family, maps=None):
    """General finite union; each member needs a threshold the origin misses."""
    maps = _check_maps(d, maps)
    members = []
    for indices, values in family:
        indices = tuple(int(i) for i in indices)
        values = tuple(float(v) for v in values)
        if not indices or len(set(indices)) != len(indices):
            raise ValueError(f"index sets must be non-empty and distinct: {indices}")
        if min(indices) < 0 or max(indices) >= d:
            raise ValueError(f"indices {indices} out of range for dimension {d}")
        if len(values) != len(indices):
            raise DimensionMismatch(
                f"{len(values)} thresholds for {len(indices)} indices"
            )
        _check_origin(indices, values, maps)
        members.append((indices, values))
    if not members:
        raise ValueError("a ruin set needs at least one member")
    return RuinSet(d, tuple(members), maps=maps)


def contains(S, x, u):
    return S.contains(x, u)


def epsilon_S(S, model, t=1.0, target_abs_error=1e-5, seed=0):
    """Cone constant for upper-orthant cones: P(Z(t) >= 0).

    Brownian scaling makes the value independent of t.
    """
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    if S.dim != model.dim:
        raise DimensionMismatch(f"set of dimension {S.dim}, model of {model.dim}")
    estimate = orthant_prob(model.covariance(t), target_abs_error, seed)
    return ConeCertificate(estimate.value, estimate.abs_error)


def epsilon_scaling_check(S, model, u, target_abs_error=1e-5):
    """Check eps(uS) >= eps(S); equal for orthant cones."""
    if not u > 1:
        raise ValueError(f"u must exceed 1, got {u}")
    base = epsilon_S(S, model, target_abs_error=target_abs_error)
    dilated = epsilon_S(S.scaled(u), model, target_abs_error=target_abs_error)
    return abs(dilated.epsilon - base.epsilon) <= base.abs_error + dilated.abs_error


def epsilon_bar(S, model, delta_min, delta_max, target_abs_error=1e-5):
    """(delta_min / delta_max)^(d/2) eps_S(delta_min)."""
    if not 0 < delta_min <= delta_max:
        raise ValueError(
            f"need 0 < delta_min <= delta_max, got {delta_min}, {delta_max}"
        )
    epsilon = epsilon_S(S, model, delta_min, target_abs_error).epsilon
    return (delta_min / delta_max) ** (S.dim / 2.0) * epsilon


def sub_orthant_bound(S, model, target_abs_error=1e-5):
    """min over members I of P(Z_I(1) >= 0); never below eps_S."""
    values = []
    for indices in {indices for indices, _ in S.family}:
        block = model.sigma[np.ix_(indices, indices)]
        values.append(orthant_prob(block, target_abs_error).value)
    return min(values)


def _as_model(cov):
    if ICovarianceModel.providedBy(cov):
        return cov
    return covariance_from_sigma(np.atleast_2d(np.asarray(cov, dtype=float)))


def inclusion_exclusion_terms(S, u, mean, limit=MAX_INCLUSION_EXCLUSION_TERMS):
    """Signed union terms {lower bounds: coefficient}.

    Intersections of upper sets are upper sets, so every term is one
    rectangle; members with equal intersections are merged.
    """
    terms = {}
    for bound in S.lower_bounds(u, mean):
        update = defaultdict(int)
        update[tuple(bound)] += 1
        for key, coefficient in terms.items():
            update[tuple(np.maximum(key, bound))] -= coefficient
        for key, coefficient in update.items():
            total = terms.get(key, 0) + coefficient
            if total:
                terms[key] = total
            else:
                terms.pop(key, None)
        if len(terms) > limit:
            raise FamilyTooLarge(len(terms), limit)
    return terms


def terminal_prob(S, u, mean, cov, target_abs_error=1e-5, seed=0):
    """P(X in uS) for X ~ N(mean, cov) by inclusion-exclusion."""
    if not u > 0:
        raise ValueError(f"u must be positive, got {u}")
    model = _as_model(cov)
    if model.dim != S.dim:
        raise DimensionMismatch(f"set of dimension {S.dim}, covariance of {model.dim}")
    terms = inclusion_exclusion_terms(S, u, mean)
    weight = sum(abs(c) for c in terms.values())
    term_error = max(target_abs_error / max(weight, 1), MIN_TERM_ERROR)
    value = 0.0
    error = 0.0
    analytic = True
    upper = np.full(S.dim, np.inf)
    for key, coefficient in terms.items():
        estimate = mvn_rectangle_prob(model, np.array(key), upper, term_error, seed)
        value += coefficient * estimate.value
        error += abs(coefficient) * estimate.abs_error
        analytic = analytic and estimate.method == ANALYTIC
    if len(terms) == 1 and analytic:
        method = ANALYTIC
    else:
        method = INCLUSION_EXCLUSION
    logger.debug(
        "terminal_prob: %d terms, value %.6g +- %.2g", len(terms), value, error
    )
    return ProbEstimate(value, error, method)


def terminal_prob_mc(S, u, mean, cov, count=10**6, seed=0, jobs=1):
    """Plain Monte Carlo P(X in uS) with a 99% binomial interval."""
    model = _as_model(cov)
    draws = sample_mvn(model, count, seed, jobs) + np.asarray(mean, dtype=float)
    hits = int(np.count_nonzero(S.contains(draws, u)))
    low, high, _ = binomial_interval(hits, count, CONFIDENCE_LEVEL)
    value = hits / count
    return ProbEstimate(value, max(value - low, high - value), MONTE_CARLO)


def terminal_estimate(S, u, mean, cov, target_abs_error=1e-5, seed=0, count=10**6):
    """terminal_prob, falling back to Monte Carlo for very large families."""
    try:
        return terminal_prob(S, u, mean, cov, target_abs_error, seed)
    except FamilyTooLarge as e:
        logger.warning("%s; using %d Monte Carlo draws", e, count)
        return terminal_prob_mc(S, u, mean, cov, count, seed)
