"""Experiment runners: one sandwich or comparison-chain cell per call.

Every cell draws from its own streams keyed by (master seed, cell index).
"""

from dataclasses import dataclass
from dataclasses import field
from dataclasses import replace
from ruinbounds.bounds import K_orthant
from ruinbounds.bounds import K_theorem13
from ruinbounds.bounds import K_theorem15
from ruinbounds.bounds import K_theorem31
from ruinbounds.config import fingerprint
from ruinbounds.config import tool_version
from ruinbounds.estimators import mc_sup_prob
from ruinbounds.estimators import ordering_status
from ruinbounds.estimators import refinement_study
from ruinbounds.estimators import sandwich_verdict
from ruinbounds.estimators import scaled_interval
from ruinbounds.estimators import worst_status
from ruinbounds.gaussian import build_covariance
from ruinbounds.gaussian import covariance_from_sigma
from ruinbounds.gaussian import equicorrelated
from ruinbounds.gaussian import ProbEstimate
from ruinbounds.interfaces import ANALYTIC
from ruinbounds.interfaces import BudgetExceeded
from ruinbounds.interfaces import ConfigError
from ruinbounds.interfaces import DEFAULT_BUDGET
from ruinbounds.interfaces import DEFAULT_RESOLUTION
from ruinbounds.interfaces import ERROR
from ruinbounds.interfaces import IExperimentRunner
from ruinbounds.interfaces import RuinBoundsError
from ruinbounds.interfaces import VACUOUS
from ruinbounds.processes import ConvolutionEnsemble
from ruinbounds.processes import simulate_bm
from ruinbounds.processes import simulate_convolution_field
from ruinbounds.processes import simulate_fbm
from ruinbounds.processes import simulate_time_transformed
from ruinbounds.processes import TimeGrid
from ruinbounds.reports import ReportRow
from ruinbounds.ruinsets import make_k_of_d
from ruinbounds.ruinsets import terminal_estimate
from ruinbounds.trends import TimeTransform
from ruinbounds.trends import TrendFunction
from ruinbounds.utils import block_size_for
from ruinbounds.utils import parallel_map
from scipy.special import ndtr
from zope.component import queryUtility
from zope.interface import implementer

import logging
import math
import numpy as np
import time

logger = logging.getLogger(__name__)

OUTSIDE_HYPOTHESES = "outside proven hypotheses"
BELOW_RESOLUTION = "below Monte Carlo resolution"

# Relative tolerance of the delta limit check in the Gordon chain
DELTA_LIMIT_TOLERANCE = 0.01

TERMINAL_DIRECT = "terminal<=direct"
DIRECT_MAJORANT = "direct<=majorant"
MAJORANT_BOUND = "majorant<=bound"


def config_model(config):
    if config.mixing:
        return build_covariance(np.array(config.mixing, dtype=float))
    if config.correlation is not None:
        return equicorrelated(config.dimension, config.correlation)
    return build_covariance(np.eye(config.dimension))


def config_ruin_set(config):
    return make_k_of_d(config.dimension, config.k, config.thresholds, config.maps)


def _coefficients(config, size):
    c = np.array(config.trend_coefficients or [0.0], dtype=float)
    if len(c) == 1:
        c = np.repeat(c, size)
    if len(c) != size:
        raise ConfigError(
            [(None, f"trend_coefficients needs {size} entries, got {len(c)}")]
        )
    return c


def config_trend(config, size=None):
    size = size or config.dimension
    if config.trend == "zero":
        return TrendFunction.zero(size)
    if config.trend == "linear":
        return TrendFunction.linear(_coefficients(config, size))
    if config.trend == "power":
        if not config.trend_exponents:
            raise ConfigError([(None, "power trends need trend_exponents")])
        return TrendFunction.power(_coefficients(config, size), config.trend_exponents)
    if not config.trend_points or not config.trend_values:
        raise ConfigError(
            [(None, "tabulated trends need trend_points and trend_values")]
        )
    return TrendFunction.tabulated(config.trend_points, config.trend_values)


def chain_coefficients(config, size):
    """Linear trend slopes c for the comparison chains."""
    if config.trend not in ("zero", "linear"):
        raise ConfigError(
            [(None, f"process {config.process} needs a zero or linear trend")]
        )
    if config.trend == "zero":
        return np.zeros(size)
    return _coefficients(config, size)


def brownian_sandwich(config, u, cell_index=0, jobs=1):
    """Sandwich for X(t) = A B(t) - c(t) with a k-of-d ruin set."""
    model = config_model(config)
    S = config_ruin_set(config)
    trend = config_trend(config)
    T = config.horizon
    K, K_used = bound_constant(config)
    lower = terminal_estimate(
        S, u, -trend(T), model.covariance(T), config.target_abs_error, config.seed
    )
    resolutions = config.resolutions
    ensemble = simulate_bm(
        model,
        TimeGrid.uniform(T, resolutions[0]),
        config.n_paths,
        config.seed,
        (cell_index,),
        block_size_for((resolutions[-1] + 1) * model.dim),
    )
    middle = refinement_study(ensemble, S, u, resolutions, trend, jobs)
    return sandwich_verdict(lower, middle, K, K_used)


def transform_sandwich(config, u, cell_index=0, jobs=1):
    """Sandwich for Z(f(t)) - c(t) with power clocks f_i(t) = t^(2 H_i)."""
    model = config_model(config)
    S = config_ruin_set(config)
    trend = config_trend(config)
    transform = TimeTransform.from_hurst(config.hurst)
    T = config.horizon
    K, _ = bound_constant(config)
    clocks = transform(T)
    covariance = model.sigma * np.minimum.outer(clocks, clocks)
    lower = terminal_estimate(
        S, u, -trend(T), covariance, config.target_abs_error, config.seed
    )
    resolutions = config.resolutions
    d = model.dim
    ensemble = simulate_time_transformed(
        model,
        transform,
        TimeGrid.uniform(T, resolutions[0]),
        config.n_paths,
        config.seed,
        (cell_index,),
        block_size_for((resolutions[-1] + 1) * d * d),
    )
    middle = refinement_study(ensemble, S, u, resolutions, trend, jobs)
    return sandwich_verdict(lower, middle, K, "theorem31")


def convolution_sandwich(config, u, cell_index=0, jobs=1):
    """Sandwich for the n-axis field sum_k (Z_k(t_k) - c(t_k))."""
    model = config_model(config)
    S = config_ruin_set(config)
    trend = config_trend(config)
    n = config.axes
    horizons = list(config.horizons or [config.horizon] * n)
    K, _ = bound_constant(config)
    mean = -sum(trend(T) for T in horizons)
    lower = terminal_estimate(
        S,
        u,
        mean,
        model.covariance(sum(horizons)),
        config.target_abs_error,
        config.seed,
    )
    resolutions = config.resolutions
    cells = (resolutions[-1] + 1) ** n * model.dim
    if config.n_paths * cells > config.budget:
        raise BudgetExceeded(config.n_paths * cells, config.budget)
    ensemble = simulate_convolution_field(
        [model] * n,
        [TimeGrid.uniform(T, resolutions[0]) for T in horizons],
        [trend] * n,
        config.n_paths,
        config.seed,
        (cell_index,),
        config.budget,
        block_size_for(cells),
    )
    middle = refinement_study(ensemble, S, u, resolutions, None, jobs)
    return sandwich_verdict(lower, middle, K, "theorem15")


SANDWICHES = {
    "bm": brownian_sandwich,
    "transform": transform_sandwich,
    "convolution": convolution_sandwich,
}


def verify_sandwich(config, u=None, cell_index=0, jobs=1):
    """SandwichVerdict of one u, the first configured one by default."""
    sandwich = SANDWICHES.get(config.process)
    if sandwich is None:
        raise ValueError(f"process {config.process} is checked by a comparison chain")
    if u is None:
        u = config.u_values[0]
    return sandwich(config, u, cell_index, jobs)


@dataclass(frozen=True)
class ChainReport:
    """Links of a comparison chain terminal <= direct <= majorant <= bound.

    ``orderings`` maps each link to its status; links outside the hypotheses
    are reported but not claimed in ``status``.
    """

    anchor: ProbEstimate
    direct: object
    majorant: object
    constant: object
    bound: float
    orderings: dict
    status: str
    claimed: tuple
    notes: tuple = ()
    checks: dict = field(default_factory=dict)


def _unit_model():
    return build_covariance(np.eye(1))


def _chain_report(anchor, direct, majorant, constant, hurst, n_paths, checks=None):
    hurst = np.atleast_1d(hurst)
    bound = scaled_interval(anchor, constant.value)
    orderings = {
        TERMINAL_DIRECT: ordering_status(anchor, direct),
        DIRECT_MAJORANT: ordering_status(direct, majorant),
        MAJORANT_BOUND: ordering_status(majorant, bound),
    }
    notes = []
    claimed = [TERMINAL_DIRECT, MAJORANT_BOUND]
    if np.all(hurst > 0.5):
        claimed.insert(1, DIRECT_MAJORANT)
    else:
        logger.warning(
            "Hurst indices %s include H <= 1/2; the direct <= majorant link is "
            "not claimed",
            hurst.tolist(),
        )
        notes.append(OUTSIDE_HYPOTHESES)
    if constant.vacuous:
        status = VACUOUS
    elif direct.hits == 0 and majorant.hits == 0 and anchor.value * n_paths < 1.0:
        status = VACUOUS
        notes.append(BELOW_RESOLUTION)
    else:
        status = worst_status([orderings[name] for name in claimed])
    if checks and not checks.get("delta_limit_ok", True):
        notes.append("delta limit differs from the closed form")
    return ChainReport(
        anchor,
        direct,
        majorant,
        constant,
        bound.value,
        orderings,
        status,
        tuple(claimed),
        tuple(notes),
        checks or {},
    )


def fbm_chain_experiment(
    hurst,
    c,
    T,
    u,
    n_paths=10000,
    resolution=DEFAULT_RESOLUTION,
    seed=0,
    stream=(),
    jobs=1,
    threshold=1.0,
):
    """Chain for sup_t (B_H(t) - c t) on [0, T] against B(t^(2H)) - c t.

    The bound rescales time to [0, 1], where the majorant is a Brownian
    motion with trend c T^(1 - H) s^(1 / 2H).
    """
    grid = TimeGrid.uniform(T, resolution)
    S = make_k_of_d(1, 1, [threshold])
    trend = TrendFunction.linear([c])
    block = block_size_for(4 * (resolution + 1))
    direct = mc_sup_prob(
        simulate_fbm(hurst, grid, n_paths, seed, (*stream, 0, 0), block),
        S,
        u,
        trend,
        jobs,
    )
    majorant = mc_sup_prob(
        simulate_time_transformed(
            _unit_model(),
            TimeTransform.from_hurst([hurst]),
            grid,
            n_paths,
            seed,
            (*stream, 1, 0),
            block,
        ),
        S,
        u,
        trend,
        jobs,
    )
    rescaled = TrendFunction.power([c * T ** (1.0 - hurst)], [1.0 / (2.0 * hurst)])
    constant = K_theorem13(1.0, S, rescaled, _unit_model())
    anchor = ProbEstimate(
        float(ndtr(-(u * threshold + c * T) / T**hurst)), 0.0, ANALYTIC
    )
    return _chain_report(anchor, direct, majorant, constant, hurst, n_paths)


def fbm_convolution_experiment(
    hurst,
    c,
    T,
    u,
    n_paths=10000,
    resolution=DEFAULT_RESOLUTION,
    seed=0,
    stream=(),
    jobs=1,
    threshold=1.0,
    budget=DEFAULT_BUDGET,
):
    """Chain for the field sum_k (B_{H_k}(t_k) - c_k t_k) over [0, T_1] x ...

    One axis reproduces ``fbm_chain_experiment`` with the same streams.
    """
    hurst = np.atleast_1d(np.asarray(hurst, dtype=float))
    n = len(hurst)
    c = np.broadcast_to(np.asarray(c, dtype=float), (n,))
    T = np.broadcast_to(np.asarray(T, dtype=float), (n,))
    grids = [TimeGrid.uniform(T_k, resolution) for T_k in T]
    S = make_k_of_d(1, 1, [threshold])
    trends = [TrendFunction.linear([c_k]) for c_k in c]
    block = block_size_for(4 * math.prod(len(grid) for grid in grids))
    direct_field = ConvolutionEnsemble(
        [
            simulate_fbm(h, grids[k], n_paths, seed, (*stream, 0, k), block)
            for k, h in enumerate(hurst)
        ],
        trends,
        budget,
    )
    majorant_field = ConvolutionEnsemble(
        [
            simulate_time_transformed(
                _unit_model(),
                TimeTransform.from_hurst([h]),
                grids[k],
                n_paths,
                seed,
                (*stream, 1, k),
                block,
            )
            for k, h in enumerate(hurst)
        ],
        trends,
        budget,
    )
    direct = mc_sup_prob(direct_field, S, u, jobs=jobs)
    majorant = mc_sup_prob(majorant_field, S, u, jobs=jobs)
    constant = K_theorem15(
        [1.0] * n,
        S,
        [
            TrendFunction.power([c_k * T_k], [1.0 / (2.0 * h)])
            for h, c_k, T_k in zip(hurst, c, T)
        ],
        [covariance_from_sigma([[T_k ** (2.0 * h)]]) for h, T_k in zip(hurst, T)],
    )
    spread = math.sqrt(math.fsum(T ** (2.0 * hurst)))
    anchor = ProbEstimate(
        float(ndtr(-(u * threshold + math.fsum(c * T)) / spread)), 0.0, ANALYTIC
    )
    return _chain_report(anchor, direct, majorant, constant, hurst, n_paths)


def gordon_experiment(
    hurst,
    c,
    T,
    u,
    thresholds=None,
    n_paths=10000,
    resolution=DEFAULT_RESOLUTION,
    seed=0,
    stream=(),
    jobs=1,
):
    """Chain for independent fBm coordinates against Brownian motions run on
    the clocks t^(2 H_i), with the all-coordinates-ruined set.
    """
    hurst = np.atleast_1d(np.asarray(hurst, dtype=float))
    d = len(hurst)
    c = np.broadcast_to(np.asarray(c, dtype=float), (d,))
    a = np.ones(d) if thresholds is None else np.asarray(thresholds, dtype=float)
    S = make_k_of_d(d, d, a)
    trend = TrendFunction.linear(c)
    model = build_covariance(np.eye(d))
    transform = TimeTransform.from_hurst(hurst)
    grid = TimeGrid.uniform(T, resolution)
    direct = mc_sup_prob(
        simulate_fbm(
            hurst,
            grid,
            n_paths,
            seed,
            (*stream, 0),
            block_size_for(4 * (resolution + 1) * d),
        ),
        S,
        u,
        trend,
        jobs,
    )
    majorant = mc_sup_prob(
        simulate_time_transformed(
            model,
            transform,
            grid,
            n_paths,
            seed,
            (*stream, 1),
            block_size_for((resolution + 1) * d * d),
        ),
        S,
        u,
        trend,
        jobs,
    )
    constant = K_theorem31(T, S, trend, transform, model)
    anchor = ProbEstimate(
        float(np.prod(ndtr(-(u * a + c * T) / T**hurst))), 0.0, ANALYTIC
    )
    limit = transform.validate(grid)
    expected = hurst / hurst[0] * T ** (2.0 * hurst - 2.0 * hurst[0])
    within = np.abs(limit / expected - 1.0) <= DELTA_LIMIT_TOLERANCE
    checks = {"delta_limit_ok": bool(np.all(within))}
    for i, (value, closed) in enumerate(zip(limit, expected), 1):
        checks[f"delta_limit_{i}"] = float(value)
        checks[f"delta_expected_{i}"] = float(closed)
    if not checks["delta_limit_ok"]:
        logger.warning(
            "Delta limit %s differs from %s", limit.tolist(), expected.tolist()
        )
    return _chain_report(anchor, direct, majorant, constant, hurst, n_paths, checks)


def _estimate_record(estimate):
    return {
        "value": estimate.value,
        "ci_low": estimate.ci_low,
        "ci_high": estimate.ci_high,
        "hits": estimate.hits,
        "terminal_hits": estimate.terminal_hits,
    }


def sandwich_row(u, verdict):
    lower, middle, K = verdict.lower, verdict.middle, verdict.K
    ratio = middle.value / lower.value if lower.value > 0 else None
    return ReportRow(
        u=u,
        lower=lower.value,
        lower_error=lower.abs_error,
        lower_method=lower.method,
        middle=middle.value,
        middle_ci=middle.ci_halfwidth,
        middle_low=middle.ci_low,
        middle_high=middle.ci_high,
        upper=verdict.upper,
        ratio=ratio,
        K=K.value,
        K_used=verdict.constant_used,
        K_components=dict(K.components, log_K=K.log_value),
        epsilon=K.components.get("epsilon"),
        frak_c=K.components.get("frak_c", K.components.get("frak_c_1")),
        argmin_t=K.argmin_t,
        status=verdict.status,
        refinement_trace=[list(level) for level in middle.refinement_trace],
        extrapolated=middle.extrapolated,
        terminal_hits=middle.terminal_hits,
        n_paths=middle.n_paths,
        resolution=middle.resolution,
        links={"margin": list(verdict.margin)},
    )


def chain_row(u, report, K_used):
    anchor, direct, K = report.anchor, report.direct, report.constant
    ratio = direct.value / anchor.value if anchor.value > 0 else None
    return ReportRow(
        u=u,
        lower=anchor.value,
        lower_error=anchor.abs_error,
        lower_method=anchor.method,
        middle=direct.value,
        middle_ci=direct.ci_halfwidth,
        middle_low=direct.ci_low,
        middle_high=direct.ci_high,
        upper=report.bound,
        ratio=ratio,
        K=K.value,
        K_used=K_used,
        K_components=dict(K.components, log_K=K.log_value),
        epsilon=K.components.get("epsilon", K.components.get("epsilon_1")),
        frak_c=K.components.get("frak_c", K.components.get("frak_c_1")),
        argmin_t=K.argmin_t,
        status=report.status,
        refinement_trace=[list(level) for level in direct.refinement_trace],
        terminal_hits=direct.terminal_hits,
        n_paths=direct.n_paths,
        resolution=direct.resolution,
        links={
            "direct": _estimate_record(direct),
            "majorant": _estimate_record(report.majorant),
            "orderings": dict(report.orderings),
            "claimed": list(report.claimed),
            "checks": dict(report.checks),
        },
        notes=list(report.notes),
    )


@implementer(IExperimentRunner)
class SandwichRunner:
    """Runs the lower <= middle <= K lower check of one family."""

    def __init__(self, process):
        self.process = process

    def __call__(self, config, u, cell_index, jobs=1):
        return sandwich_row(u, SANDWICHES[self.process](config, u, cell_index, jobs))


def _chain_options(config, cell_index, jobs):
    if len(config.resolutions) > 1:
        logger.info(
            "Comparison chains run at the finest resolution %d only",
            config.resolutions[-1],
        )
    return {
        "n_paths": config.n_paths,
        "resolution": config.resolutions[-1],
        "seed": config.seed,
        "stream": (cell_index,),
        "jobs": jobs,
    }


@implementer(IExperimentRunner)
class FbmChainRunner:
    """Single-axis or convolution chain for fractional Brownian motion."""

    def __call__(self, config, u, cell_index, jobs=1):
        options = _chain_options(config, cell_index, jobs)
        threshold = config.thresholds[0]
        if config.axes == 1:
            report = fbm_chain_experiment(
                config.hurst[0],
                chain_coefficients(config, 1)[0],
                config.horizon,
                u,
                threshold=threshold,
                **options,
            )
            return chain_row(u, report, "theorem13")
        report = fbm_convolution_experiment(
            config.hurst,
            chain_coefficients(config, config.axes),
            config.horizons or [config.horizon] * config.axes,
            u,
            threshold=threshold,
            budget=config.budget,
            **options,
        )
        return chain_row(u, report, "theorem15")


@implementer(IExperimentRunner)
class GordonRunner:
    def __call__(self, config, u, cell_index, jobs=1):
        report = gordon_experiment(
            config.hurst,
            chain_coefficients(config, config.dimension),
            config.horizon,
            u,
            config.thresholds,
            **_chain_options(config, cell_index, jobs),
        )
        return chain_row(u, report, "theorem31")


BROWNIAN_RUNNER = SandwichRunner("bm")
TRANSFORM_RUNNER = SandwichRunner("transform")
CONVOLUTION_RUNNER = SandwichRunner("convolution")
FBM_RUNNER = FbmChainRunner()
GORDON_RUNNER = GordonRunner()

RUNNERS = {
    "bm": BROWNIAN_RUNNER,
    "transform": TRANSFORM_RUNNER,
    "convolution": CONVOLUTION_RUNNER,
    "fbm": FBM_RUNNER,
    "gordon": GORDON_RUNNER,
}


def getRunner(process):
    """Returns the IExperimentRunner registered for a process family."""
    runner = queryUtility(IExperimentRunner, name=process)
    if runner is None:
        runner = RUNNERS.get(process)
    if runner is None:
        raise ValueError(f"no runner for process {process!r}")
    return runner


def run_cell(config, u, cell_index=0, jobs=1):
    """Report row of one (configuration, u) cell; failures become error rows."""
    started = time.perf_counter()
    stamp = fingerprint(config)
    logger.info(
        "Cell %d of %s (%s, u=%g) started", cell_index, config.name, config.process, u
    )
    try:
        row = getRunner(config.process)(config, u, cell_index, jobs=jobs)
    except (RuinBoundsError, ValueError, ArithmeticError, MemoryError) as e:
        logger.error("Cell %d of %s failed: %s", cell_index, config.name, e)
        row = ReportRow(u=u, status=ERROR, error=f"{type(e).__name__}: {e}")
    row.name = config.name
    row.fingerprint = stamp
    row.process = config.process
    row.cell = cell_index
    row.seed = config.seed
    row.version = tool_version()
    row.wall_time = time.perf_counter() - started
    logger.info(
        "Cell %d of %s finished: %s in %.2fs",
        cell_index,
        config.name,
        row.status,
        row.wall_time,
    )
    return row


def run_experiment(config, jobs=1):
    """Rows for every u of the configuration, in configuration order."""
    cells = list(enumerate(config.u_values))
    if jobs > 1 and len(cells) > 1:
        return parallel_map(
            lambda cell: run_cell(config, cell[1], cell[0]), cells, jobs
        )
    return [run_cell(config, u, index, jobs) for index, u in cells]


def bound_constant(config):
    """(BoundConstant, name of the theorem it comes from) of a configuration."""
    T = config.horizon
    if config.process == "bm":
        model = config_model(config)
        S = config_ruin_set(config)
        trend = config_trend(config)
        K = K_theorem13(T, S, trend, model)
        if trend.is_zero and config.k == config.dimension and S.maps is None:
            # single orthant target: the trend-free constant is reported alongside
            orthant = K_orthant(T, model)
            components = dict(K.components, K_orthant=orthant.value)
            return replace(K, components=components), "theorem13"
        return K, "theorem13"
    if config.process == "transform":
        transform = TimeTransform.from_hurst(config.hurst)
        K = K_theorem31(
            T,
            config_ruin_set(config),
            config_trend(config),
            transform,
            config_model(config),
        )
        return K, "theorem31"
    if config.process == "convolution":
        n = config.axes
        model = config_model(config)
        horizons = list(config.horizons or [T] * n)
        trends = [config_trend(config)] * n
        K = K_theorem15(horizons, config_ruin_set(config), trends, [model] * n)
        return K, "theorem15"
    if config.process == "gordon":
        d = config.dimension
        K = K_theorem31(
            T,
            config_ruin_set(config),
            TrendFunction.linear(chain_coefficients(config, d)),
            TimeTransform.from_hurst(config.hurst),
            build_covariance(np.eye(d)),
        )
        return K, "theorem31"
    S = make_k_of_d(1, 1, config.thresholds[:1])
    hurst = np.asarray(config.hurst, dtype=float)
    c = chain_coefficients(config, config.axes)
    horizons = np.asarray(config.horizons or [T] * config.axes, dtype=float)
    trends = [
        TrendFunction.power([c_k * T_k], [1.0 / (2.0 * h)])
        for h, c_k, T_k in zip(hurst, c, horizons)
    ]
    models = [
        covariance_from_sigma([[T_k ** (2.0 * h)]]) for h, T_k in zip(hurst, horizons)
    ]
    if config.axes == 1:
        return K_theorem13(1.0, S, trends[0], models[0]), "theorem13"
    return K_theorem15([1.0] * config.axes, S, trends, models), "theorem15"


def config_ensemble(config, resolution=None, cell_index=0):
    """Direct path ensemble of a configuration on one uniform grid."""
    resolution = resolution or config.resolutions[-1]
    grid = TimeGrid.uniform(config.horizon, resolution)
    stream = (cell_index,)
    if config.process == "bm":
        model = config_model(config)
        return simulate_bm(model, grid, config.n_paths, config.seed, stream)
    if config.process == "transform":
        return simulate_time_transformed(
            config_model(config),
            TimeTransform.from_hurst(config.hurst),
            grid,
            config.n_paths,
            config.seed,
            stream,
        )
    if config.process == "gordon" or (config.process == "fbm" and config.axes == 1):
        return simulate_fbm(config.hurst, grid, config.n_paths, config.seed, stream)
    raise ValueError(f"{config.process} fields over product grids cannot be dumped")
