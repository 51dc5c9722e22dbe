"""Dense Gaussian linear algebra, sampling and rectangle probabilities."""

from dataclasses import dataclass
from functools import lru_cache
from numpy.fft import fft
from numpy.fft import ifft
from ruinbounds.interfaces import ANALYTIC
from ruinbounds.interfaces import DimensionTooLarge
from ruinbounds.interfaces import ICovarianceModel
from ruinbounds.interfaces import InvalidBounds
from ruinbounds.interfaces import IProbEstimate
from ruinbounds.interfaces import MAX_RECTANGLE_DIMENSION
from ruinbounds.interfaces import QUASI_MC
from ruinbounds.interfaces import SINGULARITY_TOLERANCE
from ruinbounds.interfaces import SingularMatrix
from ruinbounds.utils import block_size_for
from ruinbounds.utils import block_slices
from ruinbounds.utils import make_rng
from ruinbounds.utils import normal_quantile
from ruinbounds.utils import parallel_map
from scipy.special import ndtr
from scipy.special import ndtri
from zope.interface import implementer

import logging
import math
import numpy as np

logger = logging.getLogger(__name__)

# Randomised lattice shifts per estimate; the reported error is
# 2.58 standard errors of the shift means.
N_SHIFTS = 12
ERROR_MULTIPLIER = normal_quantile(0.99)
MIN_LATTICE_POINTS = 2**9
MAX_LATTICE_POINTS = 2**17

_SQRT_2PI = math.sqrt(2.0 * math.pi)
_UNIT_LOW = np.finfo(float).tiny
_UNIT_HIGH = 1.0 - np.finfo(float).epsneg


@implementer(ICovarianceModel)
class CovarianceModel:
    """The law of Z(1) = A B(1), a centred Gaussian with covariance A A^T."""

    def __init__(self, A, sigma, chol):
        self.A = A
        self.sigma = sigma
        self.chol = chol
        for array in (A, sigma, chol):
            array.setflags(write=False)

    @property
    def dim(self):
        return self.sigma.shape[0]

    def covariance(self, t=1.0):
        """Covariance of Z(t)."""
        return t * self.sigma

    def quadratic_form(self, v):
        """v^T Sigma^-1 v for the trailing axis of v."""
        v = np.asarray(v, dtype=float)
        flat = v.reshape(-1, self.dim).T
        solved = np.linalg.solve(self.chol, flat)
        return np.sum(solved * solved, axis=0).reshape(v.shape[:-1])

    def __repr__(self):
        return f"<CovarianceModel d={self.dim}>"


@implementer(IProbEstimate)
@dataclass(frozen=True)
class ProbEstimate:
    value: float
    abs_error: float
    method: str

    def __post_init__(self):
        object.__setattr__(self, "value", min(1.0, max(0.0, float(self.value))))
        object.__setattr__(self, "abs_error", max(0.0, float(self.abs_error)))

    @property
    def low(self):
        return max(0.0, self.value - self.abs_error)

    @property
    def high(self):
        return min(1.0, self.value + self.abs_error)


def cholesky_factor(sigma):
    """Lower Cholesky factor with the pivot tolerance check.

    A pivot below 1e-12 times the largest diagonal entry counts as singular.
    """
    sigma = np.asarray(sigma, dtype=float)
    try:
        chol = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError as e:
        raise SingularMatrix(f"covariance is not positive definite: {e}") from e
    scale = float(np.max(np.abs(np.diag(sigma))))
    pivots = np.diag(chol) ** 2
    if scale <= 0.0 or np.min(pivots) < SINGULARITY_TOLERANCE * scale:
        raise SingularMatrix(
            f"Cholesky pivot {np.min(pivots):.3g} below tolerance "
            f"(max diagonal {scale:.3g})"
        )
    residual = np.max(np.abs(chol @ chol.T - sigma))
    if residual > 1e-10 * np.max(np.abs(sigma)):
        raise SingularMatrix(f"Cholesky residual {residual:.3g} too large")
    return chol


def build_covariance(A):
    """Build the model for Z = A B from a nonsingular mixing matrix."""
    A = np.array(A, dtype=float)
    if A.ndim == 1 and A.size == 1:
        A = A.reshape(1, 1)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"A must be a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("A must have finite entries")
    determinant = np.linalg.det(A)
    if abs(determinant) < SINGULARITY_TOLERANCE:
        raise SingularMatrix(f"|det A| = {abs(determinant):.3g} is below tolerance")
    sigma = A @ A.T
    sigma = 0.5 * (sigma + sigma.T)
    return CovarianceModel(A, sigma, cholesky_factor(sigma))


def covariance_from_sigma(sigma):
    """Model whose mixing matrix is the Cholesky factor of sigma."""
    return build_covariance(cholesky_factor(sigma))


def equicorrelated(dim, rho):
    """Unit-variance model with all pairwise correlations equal to rho."""
    sigma = np.full((dim, dim), float(rho))
    np.fill_diagonal(sigma, 1.0)
    return covariance_from_sigma(sigma)


def sample_mvn(model, count, seed, jobs=1):
    """Draw ``count`` i.i.d. N(0, Sigma) vectors, shape (count, d).

    Draws are produced in fixed blocks, each from its own stream, so the
    result does not depend on ``jobs``.
    """
    if count < 1:
        raise ValueError(f"count must be at least 1, got {count}")
    out = np.empty((count, model.dim))
    slices = block_slices(count, block_size_for(model.dim))

    def fill(piece):
        index, start, stop = piece
        rng = make_rng(seed, index)
        out[start:stop] = rng.standard_normal((stop - start, model.dim)) @ model.chol.T

    parallel_map(fill, slices, jobs)
    return out


# Quasi-Monte Carlo rectangle probabilities


def _primes_up_to(n):
    sieve = np.ones(n + 1, dtype=bool)
    sieve[:2] = False
    for p in range(2, int(math.isqrt(n)) + 1):
        if sieve[p]:
            sieve[p * p :: p] = False
    return np.flatnonzero(sieve)


def _prime_factors(n):
    factors = []
    p = 2
    while p * p <= n:
        if n % p == 0:
            factors.append(p)
            while n % p == 0:
                n //= p
        p += 1
    if n > 1:
        factors.append(n)
    return factors


def _primitive_root(p):
    factors = _prime_factors(p - 1)
    for r in range(2, p):
        if all(pow(r, (p - 1) // f, p) != 1 for f in factors):
            return r
    return 1


@lru_cache(maxsize=64)
def lattice_generator(dims, points):
    """Rank-1 lattice generator by fast component-by-component search.

    Mirrors the generator of scipy.stats._qmvnt, which the public
    multivariate_normal.cdf does not expose with a fixed shift count.

    Returns ``(q, n)``: the generator scaled to (0, 1) and the prime number
    of lattice points it was built for.
    """
    n = int(_primes_up_to(max(points, 5))[-1])
    z = np.ones(dims, dtype=np.int64)
    if dims > 1:
        half = (n - 1) // 2
        root = _primitive_root(n)
        perm = np.ones(half, dtype=np.int64)
        for j in range(half - 1):
            perm[j + 1] = (root * perm[j]) % n
        perm = np.minimum(n - perm, perm)
        frac = perm / n
        kernel = frac * frac - frac + 1.0 / 6
        kernel_fft = fft(kernel)
        weights = np.hstack([1.0, 0.8 ** np.arange(dims - 1)])
        product = np.ones(half)
        best = 0
        for s in range(1, dims):
            reordered = np.hstack([kernel[: best + 1][::-1], kernel[best + 1 :][::-1]])
            product = product * (1.0 + weights[s - 1] * reordered)
            best = int(np.argmin(ifft(kernel_fft * fft(product)).real))
            z[s] = perm[best]
    q = z / n
    q.setflags(write=False)
    return q, n


def _reordered_cholesky(sigma, lower, upper):
    """Cholesky factor with variables ordered by ascending expected
    truncation mass, and the bounds permuted to match.
    """
    n = sigma.shape[0]
    sigma = sigma.copy()
    lower = lower.copy()
    upper = upper.copy()
    chol = np.zeros((n, n))
    y = np.zeros(n)
    scale = np.max(np.diag(sigma))
    for k in range(n):
        rest = np.arange(k, n)
        variance = np.diag(sigma)[rest] - np.sum(chol[rest, :k] ** 2, axis=1)
        if np.min(variance) < SINGULARITY_TOLERANCE * scale:
            raise SingularMatrix("covariance is singular in the integration")
        sd = np.sqrt(variance)
        shift = chol[rest, :k] @ y[:k]
        mass = ndtr((upper[rest] - shift) / sd) - ndtr((lower[rest] - shift) / sd)
        j = int(rest[np.argmin(mass)])
        if j != k:
            sigma[[k, j], :] = sigma[[j, k], :]
            sigma[:, [k, j]] = sigma[:, [j, k]]
            chol[[k, j], :k] = chol[[j, k], :k]
            lower[[k, j]] = lower[[j, k]]
            upper[[k, j]] = upper[[j, k]]
        pivot = math.sqrt(sigma[k, k] - chol[k, :k] @ chol[k, :k])
        chol[k, k] = pivot
        chol[k + 1 :, k] = (sigma[k + 1 :, k] - chol[k + 1 :, :k] @ chol[k, :k]) / pivot
        shift = chol[k, :k] @ y[:k]
        a = (lower[k] - shift) / pivot
        b = (upper[k] - shift) / pivot
        m = ndtr(b) - ndtr(a)
        if m > 1e-300:
            y[k] = (_pdf(a) - _pdf(b)) / m
        elif np.isfinite(a):
            y[k] = a
        else:
            y[k] = b
    return chol, lower, upper


def _pdf(x):
    if not np.isfinite(x):
        return 0.0
    return math.exp(-0.5 * x * x) / _SQRT_2PI


def _integrand(points, chol, lower, upper):
    """Separation-of-variables integrand evaluated at unit-cube points."""
    count = points.shape[0]
    n = chol.shape[0]
    d = np.full(count, ndtr(lower[0] / chol[0, 0]))
    e = np.full(count, ndtr(upper[0] / chol[0, 0]))
    f = e - d
    y = np.empty((count, n - 1))
    for i in range(1, n):
        w = np.clip(d + points[:, i - 1] * (e - d), _UNIT_LOW, _UNIT_HIGH)
        y[:, i - 1] = ndtri(w)
        s = y[:, :i] @ chol[i, :i]
        d = ndtr((lower[i] - s) / chol[i, i])
        e = ndtr((upper[i] - s) / chol[i, i])
        f = f * (e - d)
    return f


def _genz(sigma, lower, upper, target_abs_error, seed):
    """Genz separation of variables over randomly shifted lattices, as in
    scipy.stats._qmvnt; the error is ERROR_MULTIPLIER standard errors.
    """
    chol, lower, upper = _reordered_cholesky(sigma, lower, upper)
    dims = chol.shape[0] - 1
    rng = make_rng(seed, dims)
    points = MIN_LATTICE_POINTS
    while True:
        q, n = lattice_generator(dims, points)
        k = np.arange(1, n + 1)[:, np.newaxis]
        means = np.empty(N_SHIFTS)
        for j in range(N_SHIFTS):
            u = q * k + rng.random(dims)
            u -= np.floor(u)
            # tent periodisation
            u = np.abs(2.0 * u - 1.0)
            means[j] = _integrand(u, chol, lower, upper).mean()
        value = float(means.mean())
        error = ERROR_MULTIPLIER * float(means.std(ddof=1)) / math.sqrt(N_SHIFTS)
        if error <= target_abs_error:
            break
        if points >= MAX_LATTICE_POINTS:
            logger.warning(
                "Rectangle probability error %.3g above target %.3g "
                "after %d lattice points",
                error,
                target_abs_error,
                n * N_SHIFTS,
            )
            break
        points *= 2
        logger.debug("Escalating lattice to %d points (error %.3g)", points, error)
    return ProbEstimate(value, error, QUASI_MC)


def _as_sigma(model):
    if ICovarianceModel.providedBy(model):
        return np.asarray(model.sigma, dtype=float)
    return np.atleast_2d(np.asarray(model, dtype=float))


def mvn_rectangle_prob(model, lower, upper, target_abs_error=1e-5, seed=0):
    """P(lower <= X <= upper) for X ~ N(0, Sigma).

    ``model`` is a CovarianceModel or a covariance matrix. Coordinates
    unbounded on both sides are integrated out before the quasi-Monte Carlo
    step; one remaining coordinate is evaluated analytically.
    """
    sigma = _as_sigma(model)
    dim = sigma.shape[0]
    if dim > MAX_RECTANGLE_DIMENSION:
        raise DimensionTooLarge(dim)
    if target_abs_error <= 0:
        raise ValueError(f"target_abs_error must be positive, got {target_abs_error}")
    lower = np.array(lower, dtype=float).reshape(-1)
    upper = np.array(upper, dtype=float).reshape(-1)
    if lower.shape != (dim,) or upper.shape != (dim,):
        raise InvalidBounds(f"bounds must have {dim} entries")
    if np.any(np.isnan(lower)) or np.any(np.isnan(upper)):
        raise InvalidBounds("bounds must not be NaN")
    if np.any(lower > upper):
        raise InvalidBounds("lower bound exceeds upper bound")
    if np.any(lower == upper):
        return ProbEstimate(0.0, 0.0, ANALYTIC)
    active = ~(np.isneginf(lower) & np.isposinf(upper))
    if not np.any(active):
        return ProbEstimate(1.0, 0.0, ANALYTIC)
    sigma = sigma[np.ix_(active, active)]
    lower = lower[active]
    upper = upper[active]
    if sigma.shape[0] == 1:
        sd = math.sqrt(sigma[0, 0])
        value = ndtr(upper[0] / sd) - ndtr(lower[0] / sd)
        return ProbEstimate(value, 0.0, ANALYTIC)
    return _genz(sigma, lower, upper, target_abs_error, seed)


@lru_cache(maxsize=256)
def _orthant(sigma_bytes, dim, target_abs_error, seed):
    sigma = np.frombuffer(sigma_bytes).reshape(dim, dim)
    # correlation form, so that scaled covariances share one estimate
    sd = np.sqrt(np.diag(sigma))
    correlation = sigma / np.outer(sd, sd)
    return mvn_rectangle_prob(
        correlation, np.zeros(dim), np.full(dim, np.inf), target_abs_error, seed
    )


def orthant_prob(model, target_abs_error=1e-5, seed=0):
    """P(X >= 0) for X ~ N(0, Sigma); invariant under scaling of Sigma."""
    sigma = np.ascontiguousarray(_as_sigma(model), dtype=float)
    if sigma.shape[0] > MAX_RECTANGLE_DIMENSION:
        raise DimensionTooLarge(sigma.shape[0])
    return _orthant(sigma.tobytes(), sigma.shape[0], float(target_abs_error), seed)
