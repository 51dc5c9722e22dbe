"""Bound constants for the uniform sandwich inequalities.

The drift penalty is the infimum over t in [0, T) of exp(-q(t)) where q is
a Gaussian quadratic form of the scaled trend increment; K multiplies the
terminal probability.
"""

from dataclasses import dataclass
from dataclasses import field
from ruinbounds.gaussian import orthant_prob
from ruinbounds.interfaces import DEFAULT_HOLDER_CAP
from ruinbounds.interfaces import DEFAULT_INFIMUM_RESOLUTION
from ruinbounds.interfaces import DimensionMismatch
from ruinbounds.interfaces import HolderViolation
from ruinbounds.interfaces import IBoundConstant
from ruinbounds.interfaces import SINGULARITY_TOLERANCE
from ruinbounds.interfaces import SingularDeltaCovariance
from ruinbounds.interfaces import TransformHypothesisViolated
from ruinbounds.interfaces import UNDERFLOW_EXPONENT
from ruinbounds.ruinsets import epsilon_bar
from ruinbounds.ruinsets import epsilon_S
from ruinbounds.trends import holder_check
from ruinbounds.trends import Violation
from scipy.optimize import minimize_scalar
from zope.interface import implementer

import logging
import math
import numpy as np

logger = logging.getLogger(__name__)

CLOSED_FORM = "closed-form"
GRID_REFINED = "grid-refined"

REFINEMENT_TOLERANCE = 1e-6
# relative gap to T at which the approach to the horizon stops
ENDPOINT_GAP = 1e-10


@implementer(IBoundConstant)
@dataclass(frozen=True)
class BoundConstant:
    value: float
    argmin_t: float
    method: str
    components: dict = field(default_factory=dict)
    log_value: float = 0.0
    vacuous: bool = False

    @property
    def finite(self):
        return math.isfinite(self.value)


def infimum_grid(horizon, resolution=DEFAULT_INFIMUM_RESOLUTION):
    """Points in [0, T] clustered cubically toward T."""
    s = np.arange(resolution + 1) / resolution
    points = horizon * (1.0 - (1.0 - s) ** 3)
    points[-1] = horizon
    return points


def endpoint_approach(points):
    """Grid points with the last interval halved repeatedly toward T.

    The sup over [0, T) may only be approached as t -> T; the point closest
    to T carries the limit estimate.
    """
    points = np.asarray(points, dtype=float)
    T = points[-1]
    gap = T - points[-2]
    steps = []
    while gap > 2.0 * ENDPOINT_GAP * T:
        gap /= 2.0
        steps.append(T - gap)
    return np.concatenate([points[:-1], steps, [T]])


def _maximise(q, points, horizon):
    """Max of q over points[:-1], refined by a bounded scalar search around
    the best grid point.
    """
    inner = points[:-1]
    values = q(inner)
    best = int(np.argmax(values))
    left = inner[max(best - 1, 0)]
    right = inner[min(best + 1, len(inner) - 1)]
    argmax_t = float(inner[best])
    sup_q = float(values[best])
    if right > left:
        result = minimize_scalar(
            lambda t: -float(q(np.array([t]))[0]),
            bounds=(left, right),
            method="bounded",
            options={"xatol": REFINEMENT_TOLERANCE * max(horizon, 1e-300)},
        )
        if result.success and -result.fun > sup_q:
            argmax_t = float(result.x)
            sup_q = float(-result.fun)
    logger.debug(
        "Infimum search on %d points: sup q = %.8g at t = %.6g",
        len(inner),
        sup_q,
        argmax_t,
    )
    return sup_q, argmax_t


def _penalty(sup_q, argmax_t, method, components):
    if sup_q > UNDERFLOW_EXPONENT:
        logger.warning(
            "Drift penalty underflows (sup q = %.4g); the bound is vacuous", sup_q
        )
        return BoundConstant(
            0.0, argmax_t, method, components, log_value=-sup_q, vacuous=True
        )
    return BoundConstant(
        math.exp(-sup_q), argmax_t, method, components, log_value=-sup_q
    )


def frak_C(
    T,
    trend,
    model,
    resolution=DEFAULT_INFIMUM_RESOLUTION,
    method="auto",
    cap=DEFAULT_HOLDER_CAP,
):
    """Drift penalty inf_t exp(-T v(t)^T Sigma^-1 v(t)),
    v(t) = (c(T) - c(t)) / sqrt(T - t).

    ``method="grid"`` forces the grid search for trends that have a closed
    form.
    """
    if trend.dim != model.dim:
        raise DimensionMismatch(f"trend of dimension {trend.dim}, model of {model.dim}")
    points = endpoint_approach(infimum_grid(T, resolution))
    certificate = holder_check(trend, T, 0.5, points, cap)
    if isinstance(certificate, Violation):
        raise HolderViolation(certificate)
    components = {"holder_M": certificate}
    if trend.is_zero:
        return BoundConstant(1.0, 0.0, CLOSED_FORM, components)
    if trend.kind == "linear" and method != "grid":
        sup_q = T * T * float(model.quadratic_form(trend.coefficients))
        return _penalty(sup_q, 0.0, CLOSED_FORM, components)
    end = trend(T)

    def q(t):
        v = (end - trend(t)) / np.sqrt(T - t)[:, np.newaxis]
        return T * model.quadratic_form(v)

    sup_q, argmax_t = _maximise(q, points, T)
    components["endpoint_q"] = float(q(points[-2:-1])[0])
    return _penalty(sup_q, argmax_t, GRID_REFINED, components)


def _assemble(factor, penalty, epsilon, extra=None):
    components = dict(penalty.components)
    components.update(
        {
            "factor": factor,
            "frak_c": penalty.value,
            "log_frak_c": penalty.log_value,
            "epsilon": epsilon,
        }
    )
    components.update(extra or {})
    if penalty.vacuous:
        return BoundConstant(
            math.inf,
            penalty.argmin_t,
            penalty.method,
            components,
            log_value=math.inf,
            vacuous=True,
        )
    log_value = math.log(factor) - penalty.log_value - math.log(epsilon)
    return BoundConstant(
        factor / (penalty.value * epsilon),
        penalty.argmin_t,
        penalty.method,
        components,
        log_value=log_value,
    )


def K_theorem13(T, S, trend, model, resolution=DEFAULT_INFIMUM_RESOLUTION, **kw):
    """K(T) = 2^(d/2) / (frak_c(T) eps_S)."""
    penalty = frak_C(T, trend, model, resolution, **kw)
    epsilon = epsilon_S(S, model, T).epsilon
    return _assemble(2.0 ** (model.dim / 2.0), penalty, epsilon)


def K_orthant(T, model):
    """Trend-free constant 1 / P(Z(T) >= 0) for orthant targets."""
    estimate = orthant_prob(model.covariance(T))
    return BoundConstant(
        1.0 / estimate.value,
        0.0,
        CLOSED_FORM,
        {"epsilon": estimate.value, "epsilon_error": estimate.abs_error},
        log_value=-math.log(estimate.value),
    )


def K_theorem15(horizons, S, trends, models, resolution=DEFAULT_INFIMUM_RESOLUTION):
    """Product over axes of the per-axis K(T_k)."""
    if not (len(horizons) == len(trends) == len(models)):
        raise DimensionMismatch("give one horizon, trend and model per axis")
    axes = [
        K_theorem13(T, S, trend, model, resolution)
        for T, trend, model in zip(horizons, trends, models)
    ]
    if len(axes) == 1:
        return axes[0]
    components = {}
    for k, axis in enumerate(axes, 1):
        for name in ("factor", "frak_c", "epsilon"):
            components[f"{name}_{k}"] = axis.components[name]
        components[f"argmin_t_{k}"] = axis.argmin_t
        components[f"K_{k}"] = axis.value
    method = CLOSED_FORM
    if any(axis.method == GRID_REFINED for axis in axes):
        method = GRID_REFINED
    return BoundConstant(
        math.prod(axis.value for axis in axes),
        None,
        method,
        components,
        log_value=math.fsum(axis.log_value for axis in axes),
        vacuous=any(axis.vacuous for axis in axes),
    )


def _delta_covariances(model, delta):
    """Sigma(delta)_ij = Sigma_ij min(delta_i, delta_j), batched over rows."""
    smaller = np.minimum(delta[:, :, np.newaxis], delta[:, np.newaxis, :])
    covariances = model.sigma * smaller
    try:
        chol = np.linalg.cholesky(covariances)
    except np.linalg.LinAlgError as e:
        raise SingularDeltaCovariance(f"Sigma(delta) is not positive definite: {e}")
    pivots = np.diagonal(chol, axis1=-2, axis2=-1) ** 2
    scale = np.diagonal(covariances, axis1=-2, axis2=-1).max(axis=-1)
    if np.any(pivots.min(axis=-1) < SINGULARITY_TOLERANCE * scale):
        raise SingularDeltaCovariance("Sigma(delta) is numerically singular")
    return chol


def frak_C_star(
    T,
    trend,
    transform,
    model,
    resolution=DEFAULT_INFIMUM_RESOLUTION,
    cap=DEFAULT_HOLDER_CAP,
):
    """Drift penalty of a time-transformed process:
    inf_t exp(-v(t)^T Sigma(delta(t))^-1 v(t)),
    v(t) = (c(T) - c(t)) / sqrt(f_1(T) - f_1(t)).
    """
    if not (trend.dim == transform.dim == model.dim):
        raise DimensionMismatch("trend, transform and model must share d")
    grid = infimum_grid(T, resolution)
    transform.validate(grid)
    points = endpoint_approach(grid)
    inner = points[:-1]
    end = trend(T)
    clock_end = transform(T)[0]

    def first_residual(t):
        return clock_end - transform(t)[:, 0]

    implied = float(
        np.max(
            np.abs(end - trend(inner)) / np.sqrt(first_residual(inner))[:, np.newaxis]
        )
    )
    if implied > cap:
        raise TransformHypothesisViolated(
            f"|c(T) - c(t)| / sqrt(f_1(T) - f_1(t)) reaches {implied:g} > {cap:g}"
        )
    components = {"holder_M": implied}
    if trend.is_zero:
        return BoundConstant(1.0, 0.0, CLOSED_FORM, components)

    def q(t):
        chol = _delta_covariances(model, transform.delta(t, T))
        v = (end - trend(t)) / np.sqrt(first_residual(t))[:, np.newaxis]
        solved = np.linalg.solve(chol, v[..., np.newaxis])[..., 0]
        return np.sum(solved * solved, axis=-1)

    sup_q, argmax_t = _maximise(q, points, T)
    components["endpoint_q"] = float(q(points[-2:-1])[0])
    return _penalty(sup_q, argmax_t, GRID_REFINED, components)


def delta_extrema(T, transform, resolution=DEFAULT_INFIMUM_RESOLUTION):
    """Extrema of delta_i(t) over the infimum grid, the limit at T included."""
    points = infimum_grid(T, resolution)
    limit = transform.validate(points)
    deltas = transform.delta(points[:-1], T)
    return (
        float(min(deltas.min(), limit.min())),
        float(max(deltas.max(), limit.max())),
        limit,
    )


def K_theorem31(T, S, trend, transform, model, resolution=DEFAULT_INFIMUM_RESOLUTION):
    """K*(T) = (2 f_1(T))^(d/2) / (frak_c(T) eps_bar)."""
    penalty = frak_C_star(T, trend, transform, model, resolution)
    delta_min, delta_max, limit = delta_extrema(T, transform, resolution)
    epsilon = epsilon_bar(S, model, delta_min, delta_max)
    factor = (2.0 * float(transform(T)[0])) ** (model.dim / 2.0)
    extra = {"delta_min": delta_min, "delta_max": delta_max}
    for i, value in enumerate(limit, 1):
        extra[f"delta_limit_{i}"] = float(value)
    return _assemble(factor, penalty, epsilon, extra)
