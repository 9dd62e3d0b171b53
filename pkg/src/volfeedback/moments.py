"""
Gaussian half-moment constants and sample moment estimators.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .marketdata import DataError, ReturnSeries, split_signs

__all__ = [
    "EVEN_ORDERS",
    "GaussianConstants",
    "SampleMoments",
    "gaussian_constants",
    "gaussian_even_moment",
    "effective_sample_size",
    "sample_moments",
    "variance_standard_error",
]

EVEN_ORDERS = (2, 4, 6, 8, 10)


@dataclass(frozen=True)
class GaussianConstants:
    """
    Moments of the positive part ``eps_+ = eps * 1(eps > 0)`` of a standard
    normal variable.

    ``var_half`` and ``cross_half`` are the covariances of the sign-split
    innovations that weight the leading-order observables; their sums
    ``2 * var_half = 1 - 1/pi`` and ``2 * cross_half = 1/pi`` are the
    familiar weights.
    """

    e_plus: float
    e_plus_sq: float
    e_plus_cu: float
    var_half: float
    cross_half: float


def gaussian_constants() -> GaussianConstants:
    e_plus = 1.0 / math.sqrt(2.0 * math.pi)
    return GaussianConstants(
        e_plus=e_plus,
        e_plus_sq=0.5,
        e_plus_cu=math.sqrt(2.0 / math.pi),
        var_half=0.5 * (1.0 - 1.0 / math.pi),
        cross_half=1.0 / (2.0 * math.pi),
    )


def gaussian_even_moment(n: int) -> int:
    """``E eps**n = (n-1)!!`` for even ``n`` in ``[2, 20]``."""
    if isinstance(n, bool) or int(n) != n:
        raise ValueError(f"moment order must be an integer, got {n!r}")
    n = int(n)
    if n % 2 or not 2 <= n <= 20:
        raise ValueError(f"moment order must be even and within [2, 20], got {n}")
    return math.prod(range(1, n, 2))


@dataclass(frozen=True)
class SampleMoments:
    """
    Raw (non-demeaned unless requested) time averages of a return series.

    ``even_moments[n]`` is ``E r**n / (E r**2)**(n/2)`` so ``even_moments[2]``
    is 1 by construction.
    """

    mean: float
    variance: float
    sigma: float
    mean_plus: float
    mean_minus: float
    mean_abs: float
    even_moments: dict[int, float] = field(default_factory=dict)
    count: int = 0


def _fsum_mean(x: np.ndarray) -> float:
    # Exactly rounded sum, independent of chunking.
    return math.fsum(x.tolist()) / x.size


def sample_moments(returns: ReturnSeries | np.ndarray, demean: bool = False) -> SampleMoments:
    """
    Full-sample moments with exactly rounded (``math.fsum``) accumulation.

    Parameters
    ----------
    returns : ReturnSeries or array_like
    demean : bool, default False
        Subtract the sample mean before computing the variance and the even
        moments. The model has zero mean, so raw moments are the default.
    """
    r = returns.returns if isinstance(returns, ReturnSeries) else np.asarray(returns, dtype=float)
    if r.size == 0:
        raise DataError("empty return series")
    if r.size < 100:
        warnings.warn(f"only {r.size} returns; high moments will be unstable", stacklevel=2)
    mean = _fsum_mean(r)
    x = r - mean if demean else r
    x2 = x * x
    m2 = _fsum_mean(x2)
    if m2 == 0.0 or (demean and m2 <= 1e-30 * max(mean * mean, 1e-300)):
        raise DataError("degenerate series: zero variance")
    if not demean and float(np.ptp(r)) == 0.0:
        raise DataError("degenerate series: constant returns")
    r_plus, r_minus = split_signs(r)
    mean_plus = _fsum_mean(r_plus)
    mean_minus = _fsum_mean(r_minus)
    # standardized moments are scale free; rescale so high powers cannot underflow
    y2 = (x / float(np.max(np.abs(x)))) ** 2
    y2_mean = _fsum_mean(y2)
    even = {2: 1.0}
    power = y2
    for n in EVEN_ORDERS[1:]:
        power = power * y2
        even[n] = _fsum_mean(power) / y2_mean ** (n // 2)
    return SampleMoments(
        mean=mean,
        variance=m2,
        sigma=math.sqrt(m2),
        mean_plus=mean_plus,
        mean_minus=mean_minus,
        mean_abs=mean_plus - mean_minus,
        even_moments=even,
        count=r.size,
    )


def effective_sample_size(returns: ReturnSeries | np.ndarray, n: int | None = None, max_lag: int = 50) -> float:
    """
    ``n / (1 + 2 * sum(rho_k))`` with ``rho_k`` the autocorrelation of ``r**2``
    at lags ``1..max_lag``.

    The correction factor is floored at 1, so anti-correlated noise never
    inflates the sample size. ``n`` defaults to the series length.
    """
    r = returns.returns if isinstance(returns, ReturnSeries) else np.asarray(returns, dtype=float)
    n = r.size if n is None else n
    x = r * r
    x = x - x.mean()
    denom = float(np.dot(x, x))
    if denom == 0.0 or r.size < 3:
        return float(n)
    max_lag = min(max_lag, r.size - 2)
    rho = np.array([np.dot(x[k:], x[:-k]) for k in range(1, max_lag + 1)]) / denom
    return n / max(1.0, 1.0 + 2.0 * float(rho.sum()))


def variance_standard_error(returns: ReturnSeries | np.ndarray, max_lag: int = 50) -> float:
    """Standard error of the raw second moment ``mean(r**2)``."""
    r = returns.returns if isinstance(returns, ReturnSeries) else np.asarray(returns, dtype=float)
    x = r * r
    return float(np.std(x) / math.sqrt(effective_sample_size(r, max_lag=max_lag)))
