"""Discrete-grid simulation of the driving Gaussian processes.

Every ensemble is lazy: paths are produced block by block, each block from
its own counter-based stream keyed by (seed, stream, block index). The
block partition is fixed when the ensemble is created and depends only on
the problem size, so results never depend on how many workers consume the
blocks.
"""

from functools import lru_cache
from pathlib import Path
from ruinbounds.interfaces import BudgetExceeded
from ruinbounds.interfaces import DEFAULT_BUDGET
from ruinbounds.interfaces import DEFAULT_RESOLUTION
from ruinbounds.interfaces import DimensionMismatch
from ruinbounds.interfaces import EmbeddingFailed
from ruinbounds.interfaces import IPathEnsemble
from ruinbounds.interfaces import ITimeGrid
from ruinbounds.utils import block_size_for
from ruinbounds.utils import block_slices
from ruinbounds.utils import make_rng
from scipy.linalg import toeplitz
from zope.interface import implementer

import json
import logging
import math
import numpy as np

logger = logging.getLogger(__name__)

# Stream tags separating the random numbers of different uses of one seed
BM_STREAM = 1
BRIDGE_STREAM = 2
FBM_STREAM = 3

MAX_CHOLESKY_POINTS = 4096
MAX_CONVOLUTION_AXES = 4

ENSEMBLE_MAGIC = b"RUINBOUNDS-ENSEMBLE 1\n"


@implementer(ITimeGrid)
class TimeGrid:
    """Strictly increasing time points 0 = t_0 < ... < t_m = T."""

    def __init__(self, points):
        points = np.array(points, dtype=float)
        if points.ndim != 1 or len(points) < 2:
            raise ValueError("a time grid needs at least two points")
        if points[0] != 0.0:
            raise ValueError("a time grid must start at 0")
        if not np.all(np.isfinite(points)) or np.any(np.diff(points) <= 0):
            raise ValueError("time grid points must increase strictly")
        points.setflags(write=False)
        self.points = points

    @classmethod
    def uniform(cls, horizon, resolution=DEFAULT_RESOLUTION):
        if horizon <= 0:
            raise ValueError(f"horizon must be positive, got {horizon}")
        if resolution < 1:
            raise ValueError(f"resolution must be at least 1, got {resolution}")
        points = horizon * np.arange(resolution + 1) / resolution
        points[-1] = horizon
        return cls(points)

    @property
    def horizon(self):
        return float(self.points[-1])

    @property
    def resolution(self):
        return len(self.points) - 1

    @property
    def is_uniform(self):
        steps = np.diff(self.points)
        return bool(np.allclose(steps, steps[0], rtol=1e-9, atol=0.0))

    def refine(self, factor=2):
        """Grid with ``factor - 1`` points inserted in every interval.

        The existing points are kept bit-identically.
        """
        factor = int(factor)
        if factor < 1:
            raise ValueError(f"refinement factor must be at least 1, got {factor}")
        if factor == 1:
            return self
        left = self.points[:-1, np.newaxis]
        step = np.diff(self.points)[:, np.newaxis]
        inner = left + step * (np.arange(1, factor) / factor)
        merged = np.concatenate([self.points, inner.ravel()])
        merged.sort(kind="stable")
        return TimeGrid(merged)

    def __len__(self):
        return len(self.points)

    def __eq__(self, other):
        if not isinstance(other, TimeGrid):
            return NotImplemented
        return np.array_equal(self.points, other.points)

    def __hash__(self):
        return hash(self.points.tobytes())

    def __repr__(self):
        return f"<TimeGrid T={self.horizon:g} m={self.resolution}>"


def bridge_fill(times, values, new_times, rng):
    """Insert Brownian-bridge values at ``new_times``.

    ``values`` has shape (paths, len(times), d). New points inside one gap
    are drawn left to right, each conditioned on its left neighbour and the
    known right end of the gap. Returns the merged times and values.
    """
    times = np.asarray(times, dtype=float)
    new_times = np.setdiff1d(np.asarray(new_times, dtype=float), times)
    if new_times.size == 0:
        return times, values
    if new_times[0] < times[0] or new_times[-1] > times[-1]:
        raise ValueError("bridge points must lie inside the known time range")
    merged = np.union1d(times, new_times)
    known = np.isin(merged, times)
    size, _, dim = values.shape
    out = np.empty((size, len(merged), dim))
    out[:, known] = values
    known_index = np.flatnonzero(known)
    new_index = np.flatnonzero(~known)
    position = np.searchsorted(known_index, new_index)
    right = known_index[position]
    rank = new_index - known_index[position - 1] - 1
    for r in range(int(rank.max()) + 1):
        chosen = rank == r
        here = new_index[chosen]
        prev = here - 1
        nxt = right[chosen]
        tp = merged[prev]
        s = merged[here]
        tb = merged[nxt]
        weight = ((s - tp) / (tb - tp))[np.newaxis, :, np.newaxis]
        sd = np.sqrt((s - tp) * (tb - s) / (tb - tp))[np.newaxis, :, np.newaxis]
        noise = rng.standard_normal((size, len(here), dim))
        out[:, here] = out[:, prev] + weight * (out[:, nxt] - out[:, prev]) + sd * noise
    return merged, out


class BrownianDriver:
    """Independent standard Brownian coordinates on a time set, by exact
    Gaussian increments.
    """

    level = 0

    def __init__(self, times, dim, seed, stream=()):
        self.times = np.asarray(times, dtype=float)
        self.dim = dim
        self.seed = seed
        self.stream = tuple(stream)

    def block(self, index, size):
        rng = make_rng(self.seed, *self.stream, BM_STREAM, index)
        steps = np.sqrt(np.diff(self.times))[np.newaxis, :, np.newaxis]
        increments = rng.standard_normal((size, len(self.times) - 1, self.dim))
        out = np.zeros((size, len(self.times), self.dim))
        np.cumsum(increments * steps, axis=1, out=out[:, 1:])
        return out

    def refine(self, times):
        return BridgeDriver(self, times)


class BridgeDriver:
    """Brownian coordinates on a superset of the parent's times, drawn by
    bridge interpolation of the parent's block values.
    """

    def __init__(self, parent, times):
        times = np.asarray(times, dtype=float)
        if not np.all(np.isin(parent.times, times)):
            raise ValueError("refined times must contain the parent times")
        self.parent = parent
        self.times = times
        self.dim = parent.dim
        self.seed = parent.seed
        self.stream = parent.stream
        self.level = parent.level + 1

    def block(self, index, size):
        coarse = self.parent.block(index, size)
        rng = make_rng(self.seed, *self.stream, BRIDGE_STREAM, self.level, index)
        _, values = bridge_fill(self.parent.times, coarse, self.times, rng)
        return values

    def refine(self, times):
        return BridgeDriver(self, times)


@implementer(IPathEnsemble)
class PathEnsemble:
    """Sample paths of shape (n_paths, len(grid), d), produced lazily.

    ``sampler(index, size)`` returns the block with the given index. Brownian
    ensembles also keep their driver so that they can be refined with
    common random numbers.
    """

    def __init__(
        self,
        grid,
        dim,
        n_paths,
        seed,
        process_tag,
        sampler,
        block_paths=None,
        model=None,
        driver=None,
        transform=None,
    ):
        if n_paths < 1:
            raise ValueError(f"n_paths must be at least 1, got {n_paths}")
        self.grid = grid
        self.dim = dim
        self.n_paths = int(n_paths)
        self.seed = seed
        self.process_tag = process_tag
        self.model = model
        self.driver = driver
        self.transform = transform
        self.block_paths = block_paths or block_size_for(len(grid) * dim)
        self._sampler = sampler
        self._paths = None

    @classmethod
    def from_array(cls, grid, paths, seed, process_tag):
        paths = np.asarray(paths, dtype=float)
        if paths.ndim != 3 or paths.shape[1] != len(grid):
            raise DimensionMismatch(
                f"paths of shape {paths.shape} do not fit a grid of {len(grid)} points"
            )
        paths.setflags(write=False)

        def sampler(index, size):
            start = index * ensemble.block_paths
            return paths[start : start + size]

        ensemble = cls(
            grid, paths.shape[2], paths.shape[0], seed, process_tag, sampler
        )
        ensemble._paths = paths
        return ensemble

    @property
    def slices(self):
        return block_slices(self.n_paths, self.block_paths)

    def block(self, index):
        _, start, stop = self.slices[index]
        return self._sampler(index, stop - start)

    def blocks(self):
        for index, start, stop in self.slices:
            logger.debug(
                "%s block %d: paths %d-%d", self.process_tag, index, start, stop
            )
            yield index, self._sampler(index, stop - start)

    @property
    def paths(self):
        """All paths as one array; materialised once."""
        if self._paths is None:
            paths = np.concatenate([values for _, values in self.blocks()])
            paths.setflags(write=False)
            self._paths = paths
        return self._paths

    @property
    def refinable(self):
        return self.driver is not None

    def __repr__(self):
        return (
            f"<PathEnsemble {self.process_tag} d={self.dim} "
            f"paths={self.n_paths} m={self.grid.resolution}>"
        )


def _check_paths(n_paths):
    if int(n_paths) < 1:
        raise ValueError(f"n_paths must be at least 1, got {n_paths}")


def _mixed_ensemble(model, grid, driver, n_paths, seed, tag, block_paths, transform):
    """Ensemble whose coordinate i reads the driver at its own clock positions
    and mixes with row i of A.
    """
    if transform is None:
        positions = None
    else:
        clocks = transform(grid.points)
        positions = np.searchsorted(driver.times, clocks)

    def sampler(index, size):
        values = driver.block(index, size)
        if positions is None:
            return values @ model.A.T
        out = np.empty((size, len(grid), model.dim))
        for i in range(model.dim):
            out[..., i] = values[:, positions[:, i], :] @ model.A[i]
        return out

    return PathEnsemble(
        grid,
        model.dim,
        n_paths,
        seed,
        tag,
        sampler,
        block_paths=block_paths or block_size_for(len(driver.times) * model.dim),
        model=model,
        driver=driver,
        transform=transform,
    )


def simulate_bm(model, grid, n_paths, seed, stream=(), block_paths=None):
    """Z = A B on the grid from exact increments N(0, dt Sigma)."""
    _check_paths(n_paths)
    driver = BrownianDriver(grid.points, model.dim, seed, stream)
    return _mixed_ensemble(model, grid, driver, n_paths, seed, "bm", block_paths, None)


def _clock_times(transform, grid):
    clocks = transform(grid.points)
    transform.validate(grid)
    return np.unique(clocks.ravel())


def simulate_time_transformed(
    model, transform, grid, n_paths, seed, stream=(), block_paths=None
):
    """(Z_1(f_1(t)), ..., Z_d(f_d(t))) on the grid.

    The Brownian coordinates are simulated once on the merged clock times,
    so Cov(Z_i(f_i(t)), Z_j(f_j(s))) = Sigma_ij min(f_i(t), f_j(s)).
    """
    _check_paths(n_paths)
    if transform.dim != model.dim:
        raise DimensionMismatch(
            f"transform has {transform.dim} clocks for dimension {model.dim}"
        )
    times = _clock_times(transform, grid)
    driver = BrownianDriver(times, model.dim, seed, stream)
    tag = f"time_transformed({transform.describe()})"
    return _mixed_ensemble(
        model, grid, driver, n_paths, seed, tag, block_paths, transform
    )


def refined(ensemble, factor):
    """Bridge refinement of a Brownian ensemble onto grid.refine(factor).

    Values at the coarse grid points are kept bit-identically.
    """
    if not ensemble.refinable:
        raise ValueError(f"{ensemble.process_tag} ensembles cannot be refined")
    grid = ensemble.grid.refine(factor)
    if ensemble.transform is None:
        times = grid.points
    else:
        times = _clock_times(ensemble.transform, grid)
    driver = ensemble.driver.refine(times)
    return _mixed_ensemble(
        ensemble.model,
        grid,
        driver,
        ensemble.n_paths,
        ensemble.seed,
        ensemble.process_tag,
        ensemble.block_paths,
        ensemble.transform,
    )


def fgn_autocovariance(hurst, lags):
    """Autocovariance of unit-step fractional Gaussian noise."""
    k = np.abs(np.asarray(lags, dtype=float))
    h2 = 2.0 * hurst
    return 0.5 * (np.abs(k + 1) ** h2 - 2.0 * k**h2 + np.abs(k - 1) ** h2)


@lru_cache(maxsize=32)
def _fgn_plan(hurst, m):
    """Square-root eigenvalues of the circulant embedding, or a Cholesky
    factor when the embedding has negative eigenvalues.
    """
    gamma = fgn_autocovariance(hurst, np.arange(m + 1))
    row = np.concatenate([gamma, gamma[-2:0:-1]]) if m > 1 else gamma
    eigenvalues = np.fft.fft(row).real
    if eigenvalues.min() >= -1e-10 * eigenvalues.max():
        root = np.sqrt(np.clip(eigenvalues, 0.0, None) / len(row))
        root.setflags(write=False)
        return "circulant", root
    logger.debug(
        "Circulant embedding for H=%g, m=%d has negative eigenvalues", hurst, m
    )
    if m > MAX_CHOLESKY_POINTS:
        raise EmbeddingFailed(
            f"circulant embedding failed for H={hurst}, m={m} and the grid is "
            f"too large for the Cholesky fallback"
        )
    try:
        factor = np.linalg.cholesky(toeplitz(gamma[:m]))
    except np.linalg.LinAlgError as e:
        raise EmbeddingFailed(f"no fBm factorisation for H={hurst}, m={m}") from e
    factor.setflags(write=False)
    return "cholesky", factor


def fgn_block(hurst, m, size, rng):
    """``size`` samples of m unit-step fractional Gaussian noise values."""
    method, plan = _fgn_plan(float(hurst), int(m))
    if method == "cholesky":
        return rng.standard_normal((size, m)) @ plan.T
    if m == 1:
        return rng.standard_normal((size, 1))
    noise = rng.standard_normal((size, len(plan))) + 1j * rng.standard_normal(
        (size, len(plan))
    )
    return np.fft.fft(plan * noise, axis=1).real[:, :m]


def simulate_fbm(hurst, grid, n_paths, seed, stream=(), block_paths=None):
    """Fractional Brownian motion on a uniform grid.

    ``hurst`` is a scalar or a vector; a vector gives independent fBm
    coordinates with their own indices.
    """
    _check_paths(n_paths)
    hurst = np.atleast_1d(np.asarray(hurst, dtype=float))
    if np.any(hurst <= 0) or np.any(hurst > 1):
        raise ValueError(f"Hurst indices must lie in (0, 1], got {hurst}")
    if not grid.is_uniform:
        raise ValueError("fBm simulation needs a uniform grid")
    m = grid.resolution
    step = grid.horizon / m
    dim = len(hurst)
    for h in np.unique(hurst):
        if h <= 0.5:
            logger.debug("Simulating fBm with H=%g <= 1/2", h)

    def sampler(index, size):
        out = np.zeros((size, m + 1, dim))
        for i, h in enumerate(hurst):
            rng = make_rng(seed, *stream, FBM_STREAM, i, index)
            noise = fgn_block(h, m, size, rng)
            np.cumsum(noise * step**h, axis=1, out=out[:, 1:, i])
        return out

    tag = "fbm(H=" + ",".join(f"{h:g}" for h in hurst) + ")"
    return PathEnsemble(
        grid,
        dim,
        n_paths,
        seed,
        tag,
        sampler,
        block_paths=block_paths or block_size_for(4 * (m + 1) * dim),
    )


class ConvolutionEnsemble:
    """Field Z(t) = sum_k (Z_k(t_k) - c_k(t_k)) over a product grid.

    The axis ensembles share one block partition; a block of the field has
    shape (paths, m_1 + 1, ..., m_n + 1, d).
    """

    def __init__(self, axes, trends, budget=DEFAULT_BUDGET):
        if not 1 <= len(axes) <= MAX_CONVOLUTION_AXES:
            raise ValueError(
                f"convolution fields support 1 to {MAX_CONVOLUTION_AXES} axes"
            )
        if len(trends) != len(axes):
            raise DimensionMismatch("give one trend per convolution axis")
        dims = {axis.dim for axis in axes} | {trend.dim for trend in trends}
        if len(dims) != 1:
            raise DimensionMismatch("all axes and trends must share one dimension")
        if len({(axis.n_paths, axis.block_paths) for axis in axes}) != 1:
            raise ValueError("axis ensembles must share paths and block partition")
        self.axes = tuple(axes)
        self.trends = tuple(trends)
        self.budget = budget
        self.dim = axes[0].dim
        self.n_paths = axes[0].n_paths
        self.seed = axes[0].seed
        self.block_paths = axes[0].block_paths
        self.process_tag = f"convolution({len(axes)})"
        required = self.n_paths * self.cells_per_path
        if required > budget:
            raise BudgetExceeded(required, budget)

    @property
    def grid(self):
        return tuple(axis.grid for axis in self.axes)

    @property
    def shape(self):
        return tuple(len(axis.grid) for axis in self.axes)

    @property
    def cells_per_path(self):
        return math.prod(self.shape) * self.dim

    @property
    def slices(self):
        return block_slices(self.n_paths, self.block_paths)

    @property
    def refinable(self):
        return all(axis.refinable for axis in self.axes)

    def with_trends(self, trends):
        return ConvolutionEnsemble(self.axes, trends, self.budget)

    def axis_values(self, index):
        """Drifted axis values Z_k(t_k) - c_k(t_k) of one block."""
        return [
            axis.block(index) - trend(axis.grid.points)
            for axis, trend in zip(self.axes, self.trends)
        ]

    def field(self, values):
        """Broadcast sum of per-axis values into the product grid."""
        n = len(values)
        total = 0.0
        for k, value in enumerate(values):
            shape = [value.shape[0]] + [1] * n + [self.dim]
            shape[k + 1] = value.shape[1]
            total = total + value.reshape(shape)
        return total

    def refined(self, factor):
        return ConvolutionEnsemble(
            [refined(axis, factor) for axis in self.axes], self.trends, self.budget
        )

    def __repr__(self):
        return f"<ConvolutionEnsemble n={len(self.axes)} shape={self.shape}>"


def simulate_convolution_field(
    models,
    grids,
    trends,
    n_paths,
    seed,
    stream=(),
    budget=DEFAULT_BUDGET,
    block_paths=None,
):
    """Independent Brownian axes Z_k = A_k B_k, one per grid."""
    _check_paths(n_paths)
    if not (len(models) == len(grids) == len(trends)):
        raise DimensionMismatch("give one model, grid and trend per axis")
    if not 1 <= len(models) <= MAX_CONVOLUTION_AXES:
        raise ValueError(
            f"convolution fields support 1 to {MAX_CONVOLUTION_AXES} axes"
        )
    dim = models[0].dim
    cells = math.prod(len(grid) for grid in grids) * dim
    if n_paths * cells > budget:
        raise BudgetExceeded(n_paths * cells, budget)
    block_paths = block_paths or block_size_for(cells)
    axes = [
        simulate_bm(model, grid, n_paths, seed, (*stream, k), block_paths)
        for k, (model, grid) in enumerate(zip(models, grids))
    ]
    return ConvolutionEnsemble(axes, trends, budget)


def dump_ensemble(ensemble, path):
    """Write the ensemble as header plus little-endian float64 body."""
    if not isinstance(ensemble, PathEnsemble):
        raise TypeError("only single-grid ensembles can be dumped")
    header = json.dumps(
        {
            "dimension": ensemble.dim,
            "grid": ensemble.grid.points.tolist(),
            "seed": ensemble.seed,
            "process": ensemble.process_tag,
            "paths": ensemble.n_paths,
        }
    ).encode("utf-8")
    path = Path(path)
    with path.open("wb") as stream:
        stream.write(ENSEMBLE_MAGIC)
        stream.write(np.array([len(header)], dtype="<u4").tobytes())
        stream.write(header)
        for _, values in ensemble.blocks():
            stream.write(np.ascontiguousarray(values, dtype="<f8").tobytes())
    logger.info(
        "Wrote %d paths of %s to %s", ensemble.n_paths, ensemble.process_tag, path
    )
    return path


def load_ensemble(path):
    data = Path(path).read_bytes()
    if not data.startswith(ENSEMBLE_MAGIC):
        raise ValueError(f"{path} is not an ensemble file")
    offset = len(ENSEMBLE_MAGIC)
    (length,) = np.frombuffer(data, dtype="<u4", count=1, offset=offset)
    offset += 4
    header = json.loads(data[offset : offset + int(length)].decode("utf-8"))
    offset += int(length)
    grid = TimeGrid(header["grid"])
    shape = (header["paths"], len(grid), header["dimension"])
    body = np.frombuffer(data, dtype="<f8", offset=offset)
    if body.size != math.prod(shape):
        raise ValueError(
            f"{path} holds {body.size} values, expected {math.prod(shape)}"
        )
    return PathEnsemble.from_array(
        grid, body.reshape(shape).astype(float), header["seed"], header["process"]
    )
