"""European call pricing under stochastic volatility driven by an Ornstein-Uhlenbeck process.

Only the volatility driver is simulated.  Each driver path is reduced to an
averaged variance and priced with the conditional Black-Scholes formula.
"""

__version__ = "0.1.0"

from .sde import (  # noqa: E402
    ContractionWarning,
    GridSpec,
    NoiseStream,
    OUParams,
    Path,
    deterministic_path,
    ou_exact_moments,
    simulate_em_path,
    simulate_exact_path,
    subsample_path,
)
from .volatility import (  # noqa: E402
    AbsAffine,
    ExpShift,
    QuadratureError,
    VolFunction,
    avg_sigma_sq_discrete,
    avg_sigma_sq_exact_deterministic,
    eval_sigma_sq,
)
from .pricing import ConditionalPrice, MarketParams, bs_price_conditional, d1_d2, norm_cdf  # noqa: E402
from .montecarlo import (  # noqa: E402
    ErrorStats,
    PriceEstimate,
    discretization_error_study,
    price_option_mc,
    sample_stats,
    step_size_study,
)
from .convergence import (  # noqa: E402
    OrderFit,
    em_vs_exact_strong_error,
    price_error_order,
    sigma_bar_error_order,
)
