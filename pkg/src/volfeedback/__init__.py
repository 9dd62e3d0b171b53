"""
Estimation and simulation of asymmetric volatility feedback.

Returns follow ``r(t) = [sigma0 + J(t)] eps(t)`` where ``J`` is a linear
functional of past positive and negative returns weighted by kernels
``K+`` and ``K-``. The package estimates the conditional correlations that
identify those kernels from price data, inverts them, fits parametric forms,
tracks lag-averaged kernels in rolling windows and checks everything against
a Monte Carlo simulator with known kernels.
"""

__version__ = "0.1.0"

from .marketdata import (  # noqa: E402
    DataError,
    IndexSeries,
    PriceSeries,
    ReturnSeries,
    index_returns,
    load_index,
    load_prices,
    load_returns,
    save_returns,
    split_signs,
    to_returns,
)
from .moments import (  # noqa: E402
    GaussianConstants,
    SampleMoments,
    effective_sample_size,
    gaussian_constants,
    gaussian_even_moment,
    sample_moments,
    variance_standard_error,
)
from .observables import (  # noqa: E402
    ObservableSet,
    anticipatory_leverage,
    estimate_observables,
    normalized,
    return_autocovariance,
    save_observables,
)
from .kernel import (  # noqa: E402
    KernelEstimate,
    QarchKernels,
    delta_correction,
    forward_L,
    forward_leverage,
    forward_V,
    invert_observables,
    predict_even_moments,
    save_kernels,
    save_qarch,
    to_qarch,
    variance_inflation,
)
from .fitting import (  # noqa: E402
    FitError,
    KernelFit,
    fit_kernel,
    fit_truncated_power_law,
    fit_two_exponential,
    save_fits,
)
from .simulator import (  # noqa: E402
    PerturbativeRegimeError,
    SimConfig,
    SimulatedSeries,
    exponential_kernel,
    simulate,
    simulate_regime_switch,
)
from .rolling import (  # noqa: E402
    RollingConfig,
    RollingIndicator,
    index_volatility,
    market_average,
    rolling_indicators,
)
from .configfile import ConfigError, load_sim_config  # noqa: E402
from .verify import VerificationReport, run_pipeline, verify  # noqa: E402
