"""Monte Carlo estimates of sup-over-time ruin probabilities and the
verdicts that compare them with the bounds.
"""

from dataclasses import dataclass
from dataclasses import replace
from ruinbounds.interfaces import CONFIDENCE_LEVEL
from ruinbounds.interfaces import DimensionMismatch
from ruinbounds.interfaces import HOLDS
from ruinbounds.interfaces import HOLDS_WITHIN_CI
from ruinbounds.interfaces import RefinementNotNested
from ruinbounds.interfaces import VACUOUS
from ruinbounds.interfaces import VIOLATED
from ruinbounds.processes import ConvolutionEnsemble
from ruinbounds.processes import refined
from ruinbounds.utils import BLOCK_CELLS
from ruinbounds.utils import binomial_interval
from ruinbounds.utils import block_size_for
from ruinbounds.utils import parallel_map

import logging
import math
import numpy as np

logger = logging.getLogger(__name__)

_STATUS_RANK = {HOLDS: 0, HOLDS_WITHIN_CI: 1, VIOLATED: 2, VACUOUS: 3}


@dataclass(frozen=True)
class SupProbEstimate:
    """Fraction of paths that enter uS at some grid time.

    The estimate is biased low against continuous time; ``refinement_trace``
    holds (m, value) pairs, ``extrapolated`` the sqrt(dt) Richardson value
    from the last two levels when there are at least two.
    """

    value: float
    ci_halfwidth: float
    ci_low: float
    ci_high: float
    n_paths: int
    resolution: int
    hits: int
    terminal_hits: int
    interval_method: str
    refinement_trace: tuple = ()
    extrapolated: float = None
    common_random_numbers: bool = True
    lower_biased: bool = True

    @property
    def low(self):
        return self.ci_low

    @property
    def high(self):
        return self.ci_high

    @property
    def increments(self):
        values = [value for _, value in self.refinement_trace]
        return tuple(b - a for a, b in zip(values, values[1:]))


@dataclass(frozen=True)
class Interval:
    value: float
    low: float
    high: float


@dataclass(frozen=True)
class SandwichVerdict:
    lower: object
    middle: SupProbEstimate
    upper: float
    K: object
    status: str
    margin: tuple
    constant_used: str = ""


def _estimate(hits, terminal_hits, n_paths, resolution):
    low, high, method = binomial_interval(hits, n_paths, CONFIDENCE_LEVEL)
    value = hits / n_paths
    return SupProbEstimate(
        value=value,
        ci_halfwidth=max(value - low, high - value),
        ci_low=low,
        ci_high=high,
        n_paths=n_paths,
        resolution=resolution,
        hits=hits,
        terminal_hits=terminal_hits,
        interval_method=method,
        refinement_trace=((resolution, value),),
    )


def _count(membership):
    """(sup hits, terminal hits) of a (paths, times) membership array."""
    sup = membership.any(axis=1)
    terminal = membership[:, -1]
    return int(np.count_nonzero(sup)), int(np.count_nonzero(terminal))


def mc_sup_prob(ensemble, S, u, trend=None, jobs=1):
    """P(exists grid t: Z(t) - c(t) in uS) estimated over the ensemble."""
    if isinstance(ensemble, ConvolutionEnsemble):
        return mc_sup_prob_convolution(ensemble, S, u, jobs=jobs)
    if ensemble.dim != S.dim or (trend is not None and trend.dim != S.dim):
        raise DimensionMismatch(
            f"ensemble of dimension {ensemble.dim}, set of dimension {S.dim}"
        )
    drift = None if trend is None or trend.is_zero else trend(ensemble.grid.points)

    def count(piece):
        values = ensemble.block(piece[0])
        if drift is not None:
            values = values - drift
        return _count(S.contains(values, u))

    counts = parallel_map(count, ensemble.slices, jobs)
    hits = sum(c[0] for c in counts)
    terminal = sum(c[1] for c in counts)
    return _estimate(hits, terminal, ensemble.n_paths, ensemble.grid.resolution)


def mc_sup_prob_convolution(field, S, u, trends=None, jobs=1):
    """P(exists grid point of the product grid in uS).

    ``trends`` replaces the trends stored with the field.
    """
    if trends is not None:
        field = field.with_trends(trends)
    if field.dim != S.dim:
        raise DimensionMismatch(f"field of dimension {field.dim}, set of {S.dim}")
    chunk = block_size_for(field.cells_per_path, BLOCK_CELLS)

    def count(piece):
        values = field.axis_values(piece[0])
        hits = terminal = 0
        for start in range(0, values[0].shape[0], chunk):
            part = field.field([v[start : start + chunk] for v in values])
            inside = S.contains(part, u).reshape(part.shape[0], -1)
            sup, end = _count(inside)
            hits += sup
            terminal += end
        return hits, terminal

    counts = parallel_map(count, field.slices, jobs)
    hits = sum(c[0] for c in counts)
    terminal = sum(c[1] for c in counts)
    resolution = max(grid.resolution for grid in field.grid)
    return _estimate(hits, terminal, field.n_paths, resolution)


def richardson(trace):
    """sqrt(dt) extrapolation from the last two refinement levels."""
    if len(trace) < 2:
        return None
    (m1, p1), (m2, p2) = trace[-2:]
    if m2 <= m1:
        return None
    value = p2 + (p2 - p1) / (math.sqrt(m2 / m1) - 1.0)
    return min(1.0, max(0.0, value))


def check_nested_trace(trace):
    """Raise RefinementNotNested when a bridge-refined trace decreases.

    Refinement keeps every coarse value, so hits can only grow.
    """
    values = [value for _, value in trace]
    if any(b < a for a, b in zip(values, values[1:])):
        raise RefinementNotNested(trace)


def refinement_study(ensemble, S, u, resolutions, trend=None, jobs=1):
    """Estimate at each nested resolution with common random numbers.

    ``ensemble`` lives on the coarsest resolution and is refined by Brownian
    bridges. Returns the estimate at the finest level with the whole trace.
    """
    resolutions = [int(m) for m in resolutions]
    for coarse, fine in zip(resolutions, resolutions[1:]):
        if fine % coarse:
            raise ValueError(f"resolutions must be nested: {resolutions}")
    current = ensemble
    trace = []
    estimate = None
    for position, m in enumerate(resolutions):
        if position:
            factor = m // resolutions[position - 1]
            if factor > 1:
                if isinstance(current, ConvolutionEnsemble):
                    current = current.refined(factor)
                else:
                    current = refined(current, factor)
        estimate = mc_sup_prob(current, S, u, trend, jobs)
        logger.debug("Refinement level m=%d: %.6g", m, estimate.value)
        trace.append((m, estimate.value))
    check_nested_trace(trace)
    return replace(
        estimate, refinement_trace=tuple(trace), extrapolated=richardson(trace)
    )


def independent_refinement(make_ensemble, S, u, resolutions, trend=None, jobs=1):
    """Refinement trace for processes without bridge refinement.

    Each level is simulated afresh, so the trace is only statistically
    monotone.
    """
    logger.warning(
        "Refinement without common random numbers; the trace is not monotone "
        "by construction"
    )
    trace = []
    estimate = None
    for m in resolutions:
        estimate = mc_sup_prob(make_ensemble(m), S, u, trend, jobs)
        trace.append((m, estimate.value))
    return replace(
        estimate,
        refinement_trace=tuple(trace),
        extrapolated=richardson(trace),
        common_random_numbers=False,
    )


def as_interval(estimate):
    if isinstance(estimate, Interval):
        return estimate
    return Interval(estimate.value, estimate.low, estimate.high)


def ordering_status(left, right):
    """Status of the claim left <= right.

    ``holds`` pointwise, ``violated`` only when the intervals are disjoint in
    the wrong direction, ``holds-within-ci`` otherwise.
    """
    left = as_interval(left)
    right = as_interval(right)
    if left.value <= right.value:
        return HOLDS
    if left.low > right.high:
        return VIOLATED
    return HOLDS_WITHIN_CI


def worst_status(statuses):
    return max(statuses, key=_STATUS_RANK.__getitem__, default=HOLDS)


def scaled_interval(estimate, factor):
    """factor * estimate, or an unbounded interval for an infinite factor."""
    if not math.isfinite(factor):
        return Interval(math.inf, math.inf, math.inf)
    estimate = as_interval(estimate)
    return Interval(
        factor * estimate.value, factor * estimate.low, factor * estimate.high
    )


def sandwich_verdict(lower, middle, K, constant_used=""):
    """Compare lower <= middle <= K * lower with their intervals."""
    upper = scaled_interval(lower, K.value)
    if K.vacuous or not math.isfinite(K.value):
        status = VACUOUS
    else:
        status = worst_status(
            [ordering_status(lower, middle), ordering_status(middle, upper)]
        )
    margin = (middle.value - lower.value, upper.value - middle.value)
    return SandwichVerdict(lower, middle, upper.value, K, status, margin, constant_used)
