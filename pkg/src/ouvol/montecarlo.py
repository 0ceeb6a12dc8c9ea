"""Conditional Monte Carlo pricing and the discretisation experiments.

Every trajectory ``i`` draws its noise from substream ``substream_offset + i``
of the master seed.  Trajectories are simulated in fixed-size blocks (the block
size depends only on the grid), blocks may run on a thread pool, and per-path
results land in an index-ordered buffer before any reduction.  Results are
therefore bit-identical for any ``workers`` value.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .pricing import MarketParams, conditional_prices
from .sde import GridSpec, OUParams, em_values
from .volatility import Endpoints, VolFunction, avg_sigma_sq_discrete

__all__ = [
    "PriceEstimate",
    "ErrorStats",
    "price_option_mc",
    "step_size_study",
    "discretization_error_study",
    "sample_stats",
    "row_seed",
    "map_paths",
]

# target number of doubles held per simulated block
_BLOCK_BUDGET = 2_000_000


@dataclass(frozen=True)
class PriceEstimate:
    mean_discounted_price: float
    std_error_price: float
    mean_avg_var: float
    std_error_avg_var: float
    mean_d1: float
    mean_d2: float
    n_paths: int
    m: int
    dt: float


@dataclass(frozen=True)
class ErrorStats:
    """Descriptive statistics of a sample (fractions, not percent)."""

    average: float
    std_error: float
    median: float
    std_deviation: float
    excess_kurtosis: float
    skewness: float
    min: float
    max: float
    count: int


def row_seed(master_seed: int, row: int) -> int:
    """Independent 64-bit seed for experiment row ``row``."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(row),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def block_size(m: int) -> int:
    return max(1, _BLOCK_BUDGET // (m + 1))


def map_paths(
    fn: Callable[[np.ndarray], np.ndarray | tuple],
    n_paths: int,
    block: int,
    substream_offset: int = 0,
    workers: int = 1,
):
    """Apply ``fn`` to blocks of substream ids and concatenate in index order.

    ``fn`` receives an integer array of substream ids and returns an array (or
    tuple of arrays) with one leading entry per id.
    """
    if n_paths < 1:
        raise ValueError(f"n_paths must be >= 1, got {n_paths}")
    starts = range(0, n_paths, block)
    ids = [np.arange(s, min(s + block, n_paths)) + substream_offset for s in starts]
    if workers > 1 and len(ids) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(fn, ids))
    else:
        parts = [fn(i) for i in ids]
    if isinstance(parts[0], tuple):
        return tuple(np.concatenate(col) for col in zip(*parts))
    return np.concatenate(parts)


def _mean_and_se(x: np.ndarray) -> tuple[float, float]:
    if np.ptp(x) == 0:
        return float(x[0]), 0.0
    return float(np.mean(x)), float(np.std(x, ddof=1) / math.sqrt(x.shape[0]))


def price_option_mc(
    mkt: MarketParams,
    ou: OUParams,
    f: VolFunction,
    g: GridSpec,
    n_paths: int,
    master_seed: int,
    *,
    workers: int = 1,
    substream_offset: int = 0,
    endpoints: Endpoints = "right",
) -> PriceEstimate:
    """Average the conditional Black-Scholes price over Euler driver paths.

    Per path: simulate the driver, average ``sigma^2`` over the grid, price
    with the resulting ``sigma_bar``.  Undiscounted prices are averaged and
    then discounted.
    """
    if abs(g.maturity - mkt.maturity) > 1e-12 * mkt.maturity:
        raise ValueError(f"grid maturity {g.maturity} != option maturity {mkt.maturity}")

    def block(ids):
        y = em_values(ou, g, master_seed, ids)
        avg_var = avg_sigma_sq_discrete(f, y, endpoints)
        undiscounted, _, d1, d2 = conditional_prices(mkt, np.sqrt(avg_var))
        return avg_var, undiscounted, d1, d2

    avg_var, undiscounted, d1, d2 = map_paths(
        block, n_paths, block_size(g.m), substream_offset, workers
    )
    mean_p, se_p = _mean_and_se(undiscounted)
    mean_v, se_v = _mean_and_se(avg_var)
    disc = mkt.discount
    return PriceEstimate(
        mean_discounted_price=disc * mean_p,
        std_error_price=disc * se_p,
        mean_avg_var=mean_v,
        std_error_avg_var=se_v,
        mean_d1=float(np.mean(d1)),
        mean_d2=float(np.mean(d2)),
        n_paths=int(n_paths),
        m=g.m,
        dt=g.dt,
    )


def step_size_study(
    mkt: MarketParams,
    ou: OUParams,
    f: VolFunction,
    dt_list: Sequence[float],
    n_paths: int,
    master_seed: int,
    **kwargs,
) -> list[PriceEstimate]:
    """One independent pricing run per step size; row ``j`` uses ``row_seed(master_seed, j)``."""
    if len(dt_list) == 0:
        raise ValueError("dt_list must not be empty")
    return [
        price_option_mc(
            mkt, ou, f, GridSpec.from_step(mkt.maturity, dt), n_paths, row_seed(master_seed, j), **kwargs
        )
        for j, dt in enumerate(dt_list)
    ]


def discretization_error_study(
    mkt: MarketParams,
    ou: OUParams,
    f: VolFunction,
    fine_dt: float,
    coarse_factors: Sequence[int],
    n_paths: int,
    master_seed: int,
    *,
    workers: int = 1,
    substream_offset: int = 0,
    endpoints: Endpoints = "right",
) -> dict[int, ErrorStats]:
    """Relative error of the coarse-grid average against a fine "true" path.

    Each trajectory is simulated once on the fine grid; its average squared
    volatility is the reference.  Every coarse factor reuses the same points
    (every ``factor``-th value).  The signed error is
    ``(reference - coarse) / reference``: positive when the coarse grid
    underestimates the average.
    """
    g = GridSpec.from_step(mkt.maturity, fine_dt)
    factors = [int(q) for q in coarse_factors]
    bad = [q for q in factors if q < 1 or g.m % q]
    if bad:
        raise ValueError(f"coarse factors {bad} do not divide the fine step count m={g.m}")

    def block(ids):
        y = em_values(ou, g, master_seed, ids)
        true = avg_sigma_sq_discrete(f, y, endpoints)
        return np.column_stack(
            [(true - avg_sigma_sq_discrete(f, y[:, ::q], endpoints)) / true for q in factors]
        )

    errors = map_paths(block, n_paths, block_size(g.m), substream_offset, workers)
    return {q: sample_stats(errors[:, j]) for j, q in enumerate(factors)}


def sample_stats(data) -> ErrorStats:
    """Mean, sample (n-1) deviation, median and 1/n-moment skewness and excess kurtosis.

    A constant sample reports zero skewness and excess kurtosis.
    """
    x = np.asarray(data, dtype=float).ravel()
    n = x.shape[0]
    if n == 0:
        raise ValueError("sample_stats needs at least one value")
    if np.ptp(x) == 0:
        # exact, rather than rounding noise from the mean
        mean, sd, skew, kurt = float(x[0]), 0.0, 0.0, 0.0
    else:
        mean = float(np.mean(x))
        centred = x - mean
        m2 = float(np.mean(centred**2))
        skew = float(np.mean(centred**3)) / m2**1.5
        kurt = float(np.mean(centred**4)) / m2**2 - 3.0
        sd = float(np.std(x, ddof=1))
    return ErrorStats(
        average=mean,
        std_error=sd / math.sqrt(n),
        median=float(np.median(x)),
        std_deviation=sd,
        excess_kurtosis=kurt,
        skewness=skew,
        min=float(np.min(x)),
        max=float(np.max(x)),
        count=n,
    )
