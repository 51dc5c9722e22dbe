from concurrent.futures import ThreadPoolExecutor
from ruinbounds.interfaces import CONFIDENCE_LEVEL
from ruinbounds.interfaces import JOBS_ENVIRONMENT_KEY
from scipy.special import ndtri

import logging
import math
import numpy as np
import os

logger = logging.getLogger(__name__)

_SEED_MASK = 0xFFFFFFFFFFFFFFFF

# Number of float64 cells a single path block may hold
BLOCK_CELLS = 2**22


def make_rng(seed, *stream):
    """Counter-based generator for the stream keyed by seed and stream ids.

    Philox is a counter-based bit generator: a given (seed, stream) key
    produces the same numbers on every platform, and distinct keys give
    independent streams.
    """
    key = [int(seed) & _SEED_MASK] + [int(s) & _SEED_MASK for s in stream]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


def block_size_for(cells_per_path, limit=BLOCK_CELLS):
    """Paths per block such that a block holds at most ``limit`` cells."""
    return max(1, int(limit // max(1, cells_per_path)))


def block_slices(n_paths, block_size):
    """Return the (index, start, stop) partition of n_paths into blocks."""
    return [
        (index, start, min(start + block_size, n_paths))
        for index, start in enumerate(range(0, n_paths, block_size))
    ]


def default_jobs():
    value = os.environ.get(JOBS_ENVIRONMENT_KEY)
    if value:
        try:
            return max(1, int(value))
        except ValueError:
            logger.warning(
                "Ignoring %s=%r, expected an integer", JOBS_ENVIRONMENT_KEY, value
            )
    return os.cpu_count() or 1


def parallel_map(func, items, jobs=1):
    """Map func over items, preserving order, on up to ``jobs`` threads."""
    items = list(items)
    if jobs is None or jobs <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(func, items))


def normal_quantile(level=CONFIDENCE_LEVEL):
    """Two-sided normal quantile, 2.5758... for the 99% level."""
    return float(ndtri(0.5 + level / 2.0))


def binomial_interval(hits, n, level=CONFIDENCE_LEVEL):
    """Confidence interval for a binomial proportion.

    Returns ``(low, high, method)``. The normal approximation is used when
    both the number of hits and of misses reach 30; otherwise the Wilson
    score interval.
    """
    if n <= 0:
        raise ValueError(f"n must be positive, got {n}")
    z = normal_quantile(level)
    p = hits / n
    if hits >= 30 and n - hits >= 30:
        half = z * math.sqrt(p * (1.0 - p) / n)
        return max(0.0, p - half), min(1.0, p + half), "normal"
    denominator = 1.0 + z * z / n
    centre = (p + z * z / (2.0 * n)) / denominator
    half = z * math.sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denominator
    return max(0.0, centre - half), min(1.0, centre + half), "wilson"
