"""Black-Scholes call price conditional on an averaged volatility."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

__all__ = [
    "MarketParams",
    "ConditionalPrice",
    "DEGENERATE_EPS",
    "norm_cdf",
    "d1_d2",
    "bs_price_conditional",
    "conditional_prices",
]

# below this sigma_bar*sqrt(T) the price is replaced by its zero-volatility limit
DEGENERATE_EPS = 1e-12


@dataclass(frozen=True)
class MarketParams:
    """Spot, strike, risk-free rate and maturity of a European call.

    ``drift`` is the physical drift of the asset.  Pricing happens under the
    risk-neutral measure, so it is carried for bookkeeping only.
    """

    spot: float
    strike: float
    rate: float
    maturity: float
    drift: float = 0.0

    def __post_init__(self):
        if not self.spot > 0:
            raise ValueError(f"spot must be positive, got {self.spot}")
        if not self.strike > 0:
            raise ValueError(f"strike must be positive, got {self.strike}")
        if not self.rate >= 0:
            raise ValueError(f"rate must be non-negative, got {self.rate}")
        if not self.maturity > 0:
            raise ValueError(f"maturity must be positive, got {self.maturity}")

    @property
    def discount(self) -> float:
        return math.exp(-self.rate * self.maturity)

    @property
    def intrinsic(self) -> float:
        """Zero-volatility value ``max(S0 - K exp(-rT), 0)``."""
        return max(self.spot - self.strike * self.discount, 0.0)


@dataclass(frozen=True)
class ConditionalPrice:
    undiscounted: float
    discounted: float
    d1: float
    d2: float


def norm_cdf(x):
    """Standard normal CDF, elementwise."""
    out = ndtr(x)
    return float(out) if np.ndim(out) == 0 else out


def d1_d2(mkt: MarketParams, sigma_bar) -> tuple:
    """Black-Scholes ``d1, d2`` for averaged volatility ``sigma_bar > 0``."""
    sigma_bar = np.asarray(sigma_bar, dtype=float)
    if np.any(~(sigma_bar > 0)):
        raise ValueError("sigma_bar must be positive")
    d1, d2 = _d1_d2(mkt, sigma_bar)
    if d1.ndim == 0:
        return float(d1), float(d2)
    return d1, d2


def _d1_d2(mkt, sigma_bar):
    vol_t = sigma_bar * math.sqrt(mkt.maturity)
    moneyness = math.log(mkt.spot) - math.log(mkt.strike)
    half_var_t = 0.5 * sigma_bar**2 * mkt.maturity
    d1 = (moneyness + mkt.rate * mkt.maturity + half_var_t) / vol_t
    d2 = (moneyness + mkt.rate * mkt.maturity - half_var_t) / vol_t
    return d1, d2


def conditional_prices(mkt: MarketParams, sigma_bar):
    """Vectorised conditional prices.

    Returns arrays ``(undiscounted, discounted, d1, d2)`` with the shape of
    ``sigma_bar``.  Entries with ``sigma_bar * sqrt(T) <= DEGENERATE_EPS`` get
    the zero-volatility limit and infinite ``d1 = d2`` carrying the sign of
    ``ln(S/K) + rT`` (zero at the forward).
    """
    sigma_bar = np.asarray(sigma_bar, dtype=float)
    if np.any(sigma_bar < 0) or np.any(np.isnan(sigma_bar)):
        raise ValueError("sigma_bar must be non-negative")
    growth = math.exp(mkt.rate * mkt.maturity)
    degenerate = sigma_bar * math.sqrt(mkt.maturity) <= DEGENERATE_EPS
    safe = np.where(degenerate, 1.0, sigma_bar)
    d1, d2 = _d1_d2(mkt, safe)
    undiscounted = mkt.spot * growth * ndtr(d1) - mkt.strike * ndtr(d2)
    discounted = mkt.discount * undiscounted
    if np.any(degenerate):
        fwd_gap = math.log(mkt.spot / mkt.strike) + mkt.rate * mkt.maturity
        d_limit = math.copysign(math.inf, fwd_gap) if fwd_gap != 0 else 0.0
        discounted = np.where(degenerate, mkt.intrinsic, discounted)
        undiscounted = np.where(degenerate, growth * mkt.intrinsic, undiscounted)
        d1 = np.where(degenerate, d_limit, d1)
        d2 = np.where(degenerate, d_limit, d2)
    return undiscounted, discounted, d1, d2


def bs_price_conditional(mkt: MarketParams, sigma_bar: float) -> ConditionalPrice:
    """Call price when the volatility over ``[0, T]`` averages to ``sigma_bar``.

    ``undiscounted = S e^{rT} N(d1) - K N(d2)`` is the conditional expectation
    of the payoff; ``discounted`` multiplies it by ``e^{-rT}``.
    """
    p, v, d1, d2 = conditional_prices(mkt, sigma_bar)
    return ConditionalPrice(float(p), float(v), float(d1), float(d2))
