from zope.interface import Attribute
from zope.interface import Interface
from zope.interface import Invalid
from zope.interface import invariant

import zope.schema

# Numerical constants shared across modules
SINGULARITY_TOLERANCE = 1e-12
MAX_RECTANGLE_DIMENSION = 25
MAX_INCLUSION_EXCLUSION_TERMS = 2**15
DEFAULT_RESOLUTION = 2**10
DEFAULT_INFIMUM_RESOLUTION = 2**12
DEFAULT_HOLDER_CAP = 1e6
UNDERFLOW_EXPONENT = 700.0
CONFIDENCE_LEVEL = 0.99
DEFAULT_BUDGET = 4 * 10**9

# Process families
PROCESS_FAMILIES = ("bm", "fbm", "transform", "convolution", "gordon")

# Verdicts
HOLDS = "holds"
HOLDS_WITHIN_CI = "holds-within-ci"
VIOLATED = "violated"
VACUOUS = "vacuous"
ERROR = "error"

# Probability estimate methods
ANALYTIC = "analytic"
QUASI_MC = "quasi-mc"
MONTE_CARLO = "monte-carlo"
INCLUSION_EXCLUSION = "inclusion-exclusion"

# Experiment configuration namespace

EXPERIMENT_NAMESPACE = "urn:ruinbounds:experiment:1"
EXPERIMENT_ROOT = "experiment"

# Environment variable naming the default worker count
JOBS_ENVIRONMENT_KEY = "RUINBOUNDS_JOBS"


def _positive(value):
    return value > 0


def _correlation(value):
    return -1.0 < value < 1.0


def _hurst(value):
    return 0.0 < value <= 1.0


class RuinBoundsError(Exception):
    """Base class for all errors raised by this package."""


class SingularMatrix(RuinBoundsError, ValueError):
    """The mixing matrix (or a derived covariance) is not positive definite."""


class DimensionTooLarge(RuinBoundsError, ValueError):
    def __init__(self, dimension, limit=MAX_RECTANGLE_DIMENSION):
        super().__init__(
            f"rectangle probabilities support d <= {limit}, got d = {dimension}"
        )
        self.dimension = dimension
        self.limit = limit


class InvalidBounds(RuinBoundsError, ValueError):
    """Integration bounds are not ordered or not comparable."""


class EmbeddingFailed(RuinBoundsError):
    """Neither circulant embedding nor Cholesky could produce fBm samples."""


class NonMonotoneTransform(RuinBoundsError, ValueError):
    """A time transform is not strictly increasing from zero."""


class BudgetExceeded(RuinBoundsError, ValueError):
    def __init__(self, required, configured):
        super().__init__(
            f"convolution field needs {required} cells, budget is {configured}"
        )
        self.required = required
        self.configured = configured


class OriginInSet(RuinBoundsError, ValueError):
    """The origin lies inside the ruin set."""


class FamilyTooLarge(RuinBoundsError, ValueError):
    def __init__(self, terms, limit=MAX_INCLUSION_EXCLUSION_TERMS):
        super().__init__(
            f"inclusion-exclusion needs {terms} terms, the limit is {limit}"
        )
        self.terms = terms
        self.limit = limit


class HolderViolation(RuinBoundsError, ValueError):
    def __init__(self, violation):
        super().__init__(
            "trend is not Hölder at t0={0.t0} with alpha={0.alpha}: "
            "implied M={0.implied:g} exceeds {0.cap:g}".format(violation)
        )
        self.violation = violation


class TransformHypothesisViolated(RuinBoundsError, ValueError):
    """The trend grows faster than the square root of the first clock."""


class SingularDeltaCovariance(RuinBoundsError, ValueError):
    """The min-structured covariance of the time transform is singular."""


class DimensionMismatch(RuinBoundsError, ValueError):
    """Ensemble, set and trend disagree on the dimension."""


class RefinementNotNested(RuinBoundsError):
    """A common-random-numbers refinement trace lost hits."""

    def __init__(self, trace):
        super().__init__(f"refinement trace decreases on nested grids: {trace}")
        self.trace = tuple(trace)


class ConfigError(RuinBoundsError, ValueError):
    """A configuration file failed to parse or validate.

    ``errors`` is a list of ``(line, message)`` pairs; ``line`` is None when
    the problem is not attached to one element.
    """

    def __init__(self, errors, filename=None):
        self.errors = list(errors)
        self.filename = filename
        lines = []
        for line, message in self.errors:
            where = filename or "<config>"
            if line is not None:
                where = f"{where}:{line}"
            lines.append(f"{where}: {message}")
        super().__init__("\n".join(lines))


class ICovarianceModel(Interface):
    """Gaussian law of Z(1) = A B(1)."""

    dim = zope.schema.Int(title="Dimension", min=1)
    A = Attribute("Nonsingular d x d mixing matrix")
    sigma = Attribute("Covariance matrix A A^T")
    chol = Attribute("Lower Cholesky factor of sigma")


class IProbEstimate(Interface):
    value = zope.schema.Float(title="Probability", min=0.0, max=1.0)
    abs_error = zope.schema.Float(title="Absolute error bound", min=0.0)
    method = zope.schema.Choice(
        title="Method",
        values=(ANALYTIC, QUASI_MC, MONTE_CARLO, INCLUSION_EXCLUSION),
    )


class ITimeGrid(Interface):
    horizon = zope.schema.Float(title="Horizon T", constraint=_positive)
    points = Attribute("Strictly increasing points from 0 to T")
    resolution = zope.schema.Int(title="Number of intervals m", min=1)


class ITrendFunction(Interface):
    """Trend c(t) subtracted from the Gaussian process."""

    kind = zope.schema.Choice(
        title="Family", values=("zero", "linear", "power", "tabulated")
    )
    dim = zope.schema.Int(title="Dimension", min=1)

    def __call__(t):
        """Evaluate the trend at scalar or array t; trailing axis is d."""


class ITimeTransform(Interface):
    """Coordinatewise strictly increasing clocks f_i with f_i(0) = 0."""

    kind = zope.schema.Choice(title="Family", values=("power", "linear", "tabulated"))

    def __call__(t):
        """Evaluate all clocks at t; trailing axis is d."""

    def delta(t, horizon):
        """Normalised residual clock ratios at t < horizon."""


class IPathEnsemble(Interface):
    """Discrete-time sample paths of a vector process, produced block by
    block from counter-based random streams.
    """

    grid = Attribute("TimeGrid the paths live on")
    n_paths = zope.schema.Int(title="Number of paths", min=1)
    seed = zope.schema.Int(title="Master seed")
    process_tag = zope.schema.TextLine(title="Process family tag")

    def blocks():
        """Iterate (block index, array of shape (paths, points, d))."""


class IRuinSet(Interface):
    """Finite union of upper sets S_I = {x: x_i > a_i for i in I}."""

    dim = zope.schema.Int(title="Dimension", min=1)
    family = Attribute("Tuple of (index tuple, thresholds) pairs")

    def contains(x, u):
        """Vectorised membership of x in u S."""


class IBoundConstant(Interface):
    value = zope.schema.Float(title="Value")
    argmin_t = zope.schema.Float(title="Location of the infimum", required=False)
    method = zope.schema.Choice(title="Method", values=("closed-form", "grid-refined"))
    components = zope.schema.Dict(
        title="Sub-constants",
        key_type=zope.schema.TextLine(),
        value_type=zope.schema.Float(),
    )


class IExperimentRunner(Interface):
    """Runs one cell (one u value) of an experiment for a process family."""

    def __call__(config, u, cell_index):
        """Return a ReportRow."""


class IReportWriter(Interface):
    """Serialises report rows to a stream."""

    extension = zope.schema.ASCIILine(title="File extension")

    def write(stream, rows):
        """Append rows to the open text stream."""


class IExperimentConfig(Interface):
    """A single verification experiment.

    Every field maps to one child element of the ``experiment`` root in the
    configuration file.
    """

    name = zope.schema.TextLine(title="Experiment name", default="experiment")

    process = zope.schema.Choice(
        title="Process family", values=PROCESS_FAMILIES, default="bm"
    )

    dimension = zope.schema.Int(title="Dimension d", min=1, max=25)

    mixing = zope.schema.List(
        title="Mixing matrix A, one element per row",
        value_type=zope.schema.List(value_type=zope.schema.Float()),
        required=False,
    )

    correlation = zope.schema.Float(
        title="Equicorrelation shorthand for A",
        constraint=_correlation,
        required=False,
    )

    k = zope.schema.Int(title="Number of ruined coordinates", min=1)

    thresholds = zope.schema.List(
        title="Threshold vector a", value_type=zope.schema.Float(), min_length=1
    )

    maps = zope.schema.List(
        title="Growing coordinate maps",
        description="identity, exp, sinh or affine:<scale>:<shift>",
        value_type=zope.schema.TextLine(),
        required=False,
    )

    trend = zope.schema.Choice(
        title="Trend family",
        values=("zero", "linear", "power", "tabulated"),
        default="zero",
    )

    trend_coefficients = zope.schema.List(
        title="Trend coefficients c", value_type=zope.schema.Float(), required=False
    )

    trend_exponents = zope.schema.List(
        title="Power trend exponents", value_type=zope.schema.Float(), required=False
    )

    trend_points = zope.schema.List(
        title="Tabulated trend time points",
        value_type=zope.schema.Float(),
        required=False,
    )

    trend_values = zope.schema.List(
        title="Tabulated trend values, one element per point",
        value_type=zope.schema.List(value_type=zope.schema.Float()),
        required=False,
    )

    horizon = zope.schema.Float(title="Horizon T", constraint=_positive, default=1.0)

    horizons = zope.schema.List(
        title="Per-axis horizons for convolution fields",
        value_type=zope.schema.Float(constraint=_positive),
        required=False,
    )

    axes = zope.schema.Int(title="Number of convolution axes", min=1, max=4, default=1)

    hurst = zope.schema.List(
        title="Hurst indices",
        value_type=zope.schema.Float(constraint=_hurst),
        required=False,
    )

    u_values = zope.schema.List(
        title="Scale parameters u",
        value_type=zope.schema.Float(constraint=_positive),
        min_length=1,
        default=[1.0],
    )

    resolutions = zope.schema.List(
        title="Grid resolutions m, coarse to fine",
        value_type=zope.schema.Int(min=1),
        min_length=1,
        default=[DEFAULT_RESOLUTION],
    )

    n_paths = zope.schema.Int(title="Number of paths", min=1, default=10000)

    seed = zope.schema.Int(title="Master seed", min=0, default=0)

    budget = zope.schema.Int(
        title="Convolution field budget in cells", min=1, default=DEFAULT_BUDGET
    )

    target_abs_error = zope.schema.Float(
        title="Target error of rectangle probabilities",
        constraint=_positive,
        default=1e-5,
    )

    report = zope.schema.TextLine(title="Report path", required=False)

    csv = zope.schema.TextLine(title="CSV summary path", required=False)

    @invariant
    def k_within_dimension(config):
        if config.k is not None and config.dimension is not None:
            if config.k > config.dimension:
                raise Invalid(
                    f"k = {config.k} exceeds dimension = {config.dimension}"
                )

    @invariant
    def thresholds_match_dimension(config):
        if config.thresholds is not None and config.dimension is not None:
            if len(config.thresholds) != config.dimension:
                raise Invalid(
                    f"{len(config.thresholds)} thresholds given for "
                    f"dimension {config.dimension}"
                )

    @invariant
    def one_covariance_source(config):
        if config.mixing and config.correlation is not None:
            raise Invalid("give either mixing or correlation, not both")
        if config.mixing and config.dimension is not None:
            size = config.dimension
            if len(config.mixing) != size or any(len(r) != size for r in config.mixing):
                raise Invalid(f"mixing must be a {size} x {size} matrix")

    @invariant
    def nested_resolutions(config):
        resolutions = config.resolutions or []
        for coarse, fine in zip(resolutions, resolutions[1:]):
            if fine % coarse or fine == coarse:
                raise Invalid(
                    f"resolutions must be nested: {fine} is not a proper "
                    f"multiple of {coarse}"
                )

    @invariant
    def hurst_for_family(config):
        if config.process not in ("fbm", "transform", "gordon"):
            return
        if not config.hurst:
            raise Invalid(f"process {config.process} needs hurst indices")
        if config.process in ("transform", "gordon"):
            if config.dimension is not None and len(config.hurst) != config.dimension:
                raise Invalid("give one hurst index per coordinate")
        elif len(config.hurst) != (config.axes or 1):
            raise Invalid("give one hurst index per axis")

    @invariant
    def horizons_for_axes(config):
        if config.horizons and len(config.horizons) != (config.axes or 1):
            raise Invalid(
                f"{len(config.horizons)} horizons given for {config.axes} axes"
            )

    @invariant
    def maps_match_dimension(config):
        if config.maps and config.dimension is not None:
            if len(config.maps) != config.dimension:
                raise Invalid("give one growing map per coordinate")

    @invariant
    def chain_shapes(config):
        if config.process == "fbm" and config.dimension not in (None, 1):
            raise Invalid("the fbm chain is one-dimensional per axis")
        if config.process == "gordon" and config.k != config.dimension:
            raise Invalid("the gordon chain needs k = dimension")
