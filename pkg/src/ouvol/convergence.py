"""Empirical strong convergence orders.

Three experiments, all fitted as ``log E|err| = c - order * log m``:

* :func:`sigma_bar_error_order` measures ``E|sigma_bar - sigma_bar_m|`` against a
  fine-grid proxy for the continuous average.  For a transform with Hoelder
  exponent ``g`` the order is at least ``g / 2``.
* :func:`price_error_order` does the same for the undiscounted conditional
  price.  The rate carries over because the normal CDF is Lipschitz.
* :func:`em_vs_exact_strong_error` compares the Euler recursion with the exact
  OU transition driven by the same normals.  Additive noise makes Euler
  identical to Milstein, so the expected order is 1.

Strong consistency of the Euler recursion needs no simulation.  Conditional on
``Y[l] = y`` the increment has mean ``-alpha * y * dt`` and noise part
``k * dZ[l]``, so both consistency residuals vanish identically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .montecarlo import block_size, map_paths
from .pricing import MarketParams, conditional_prices
from .sde import GridSpec, OUParams, coupled_values, em_values
from .volatility import Endpoints, VolFunction, avg_sigma_sq_discrete

__all__ = [
    "OrderFit",
    "fit_order",
    "sigma_bar_error_order",
    "price_error_order",
    "em_vs_exact_strong_error",
]


@dataclass(frozen=True)
class OrderFit:
    """Mean absolute errors along a step-count ladder and the fitted log-log order.

    ``degenerate`` marks a ladder on which every error is exactly zero; the
    order is then undefined (NaN).  ``hoelder_verified`` is False when the
    transform does not satisfy a global Hoelder condition, so the fit has no
    theoretical lower bound behind it.
    """

    m_values: tuple[int, ...]
    mean_errors: tuple[float, ...]
    std_errors: tuple[float, ...]
    fitted_order: float
    r_squared: float
    n_paths: int
    degenerate: bool = False
    hoelder_verified: bool = True
    notes: tuple[str, ...] = field(default=())


def _check_ladder(m_ladder: Sequence[int]) -> tuple[int, ...]:
    ladder = tuple(int(m) for m in m_ladder)
    if len(ladder) < 3:
        raise ValueError(f"need at least 3 step counts to fit an order, got {len(ladder)}")
    if any(m < 1 for m in ladder) or any(b <= a for a, b in zip(ladder, ladder[1:])):
        raise ValueError(f"step counts must be positive and strictly increasing, got {ladder}")
    return ladder


def fit_order(m_values: Sequence[int], errors: np.ndarray, n_paths: int, **extra) -> OrderFit:
    """Least-squares fit of ``log(mean error)`` on ``log m``.

    ``errors`` has one row per path and one column per ladder entry.
    """
    m_values = _check_ladder(m_values)
    errors = np.asarray(errors, dtype=float)
    means = errors.mean(axis=0)
    n = errors.shape[0]
    ses = errors.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros_like(means)
    if np.all(means == 0):
        return OrderFit(
            m_values, tuple(means), tuple(ses), math.nan, math.nan, n,
            degenerate=True, notes=("all errors are zero",), **extra,
        )
    if np.any(means <= 0):
        zero_at = [m for m, e in zip(m_values, means) if e <= 0]
        raise ValueError(f"mean error underflows to zero at m={zero_at}; cannot fit an order")
    fit = stats.linregress(np.log(m_values), np.log(means))
    return OrderFit(
        m_values, tuple(float(e) for e in means), tuple(float(s) for s in ses),
        float(-fit.slope), float(fit.rvalue**2), n, **extra,
    )


def _fine_grid(T: float, ladder: tuple[int, ...], fine_m: int | None) -> GridSpec:
    fine_m = 10 * ladder[-1] if fine_m is None else int(fine_m)
    bad = [m for m in ladder if fine_m % m]
    if bad:
        raise ValueError(f"ladder entries {bad} do not divide the fine step count {fine_m}")
    if fine_m < ladder[-1]:
        raise ValueError(f"fine step count {fine_m} is below the largest ladder entry")
    return GridSpec(T, fine_m)


def _hoelder_extra(f: VolFunction) -> dict:
    if f.hoelder_verified:
        return {"hoelder_verified": True}
    return {
        "hoelder_verified": False,
        "notes": (f"{f.kind}: global Hoelder condition not satisfied; order is empirical only",),
    }


def sigma_bar_error_order(
    ou: OUParams,
    f: VolFunction,
    T: float,
    m_ladder: Sequence[int],
    n_paths: int,
    master_seed: int,
    *,
    fine_m: int | None = None,
    workers: int = 1,
    endpoints: Endpoints = "right",
) -> OrderFit:
    """Order of ``E|sigma_bar_M - sigma_bar_m|`` along ``m_ladder``.

    Each path is simulated once with ``fine_m`` steps (default ten times the
    largest ladder entry); coarse averages reuse its points.
    """
    ladder = _check_ladder(m_ladder)
    g = _fine_grid(T, ladder, fine_m)

    def block(ids):
        y = em_values(ou, g, master_seed, ids)
        ref = np.sqrt(avg_sigma_sq_discrete(f, y, endpoints))
        return np.column_stack(
            [np.abs(ref - np.sqrt(avg_sigma_sq_discrete(f, y[:, :: g.m // m], endpoints))) for m in ladder]
        )

    errors = map_paths(block, n_paths, block_size(g.m), 0, workers)
    return fit_order(ladder, errors, n_paths, **_hoelder_extra(f))


def price_error_order(
    mkt: MarketParams,
    ou: OUParams,
    f: VolFunction,
    m_ladder: Sequence[int],
    n_paths: int,
    master_seed: int,
    *,
    fine_m: int | None = None,
    workers: int = 1,
    endpoints: Endpoints = "right",
) -> OrderFit:
    """Order of ``E|P_M - P_m|`` for undiscounted conditional call prices."""
    ladder = _check_ladder(m_ladder)
    g = _fine_grid(mkt.maturity, ladder, fine_m)

    def price(avg_var):
        return conditional_prices(mkt, np.sqrt(avg_var))[0]

    def block(ids):
        y = em_values(ou, g, master_seed, ids)
        ref = price(avg_sigma_sq_discrete(f, y, endpoints))
        return np.column_stack(
            [np.abs(ref - price(avg_sigma_sq_discrete(f, y[:, :: g.m // m], endpoints))) for m in ladder]
        )

    errors = map_paths(block, n_paths, block_size(g.m), 0, workers)
    return fit_order(ladder, errors, n_paths, **_hoelder_extra(f))


def em_vs_exact_strong_error(
    ou: OUParams,
    T: float,
    m_ladder: Sequence[int],
    n_paths: int,
    master_seed: int,
    *,
    workers: int = 1,
) -> OrderFit:
    """Order of ``E|Y_T(euler) - Y_T(exact)|`` with shared normals per path."""
    ladder = _check_ladder(m_ladder)
    cols = []
    for m in ladder:
        g = GridSpec(T, m)

        def block(ids, g=g):
            em, ex = coupled_values(ou, g, master_seed, ids)
            return np.abs(em[:, -1] - ex[:, -1])

        cols.append(map_paths(block, n_paths, block_size(m), 0, workers))
    return fit_order(ladder, np.column_stack(cols), n_paths)
