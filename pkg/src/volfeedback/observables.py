"""
Lagged conditional correlation estimators.

For a lag ``tau`` the estimators are time averages over all pairs
``(t, t - tau)`` in the sample:

    L+(tau) = mean r^2(t) r+(t - tau) - E r^2 * E r+
    L-(tau) = mean r^2(t) r-(t - tau) - E r^2 * E r-
    V(tau)  = mean r^2(t) r^2(t - tau) - (E r^2)^2
    L(tau)  = L+(tau) + L-(tau)

with the ``E`` terms taken as full-sample means. Standard errors come from
the variance of the per-pair products divided by an effective sample size
that accounts for volatility clustering (see
:func:`volfeedback.moments.effective_sample_size`).
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .marketdata import DataError, ReturnSeries, split_signs
from .moments import effective_sample_size

__all__ = [
    "DEFAULT_TAU_MAX",
    "LaggedCovariance",
    "ObservableSet",
    "anticipatory_leverage",
    "estimate_observables",
    "return_autocovariance",
    "lagged_covariance",
    "normalized",
    "save_observables",
]

DEFAULT_TAU_MAX = 800
NEFF_MAX_LAG = 50


@dataclass(frozen=True)
class LaggedCovariance:
    """
    ``cov(lead(t), lagged_i(t - tau))`` for several lagged series at once.

    ``value`` has shape ``(k, tau_max)``; ``cov`` has shape
    ``(tau_max, k, k)`` and holds the estimator (co)variances.
    """

    lags: np.ndarray
    value: np.ndarray
    cov: np.ndarray

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.maximum(np.diagonal(self.cov, axis1=1, axis2=2).T, 0.0))


def _as_array(x) -> np.ndarray:
    return x.returns if isinstance(x, ReturnSeries) else np.ascontiguousarray(x, dtype=float)


def lagged_covariance(
    lead: np.ndarray,
    lagged: list[np.ndarray],
    tau_max: int,
    size_factor: float = 1.0,
) -> LaggedCovariance:
    """
    Estimate ``E lead(t) b(t - tau) - E lead * E b`` for every ``b`` in ``lagged``.

    Parameters
    ----------
    lead : ndarray
        Series evaluated at the later time ``t``.
    lagged : list of ndarray
        Series evaluated ``tau`` steps earlier. Same length as ``lead``.
    tau_max : int
        Largest lag; lags run ``1..tau_max``.
    size_factor : float
        Ratio ``N / N_eff`` inflating the naive estimator variance.
    """
    a_full = np.ascontiguousarray(lead, dtype=float)
    bs = [np.ascontiguousarray(b, dtype=float) for b in lagged]
    n_total = a_full.size
    if not 1 <= tau_max < n_total:
        raise ValueError(f"tau_max must lie in [1, {n_total - 1}], got {tau_max}")
    k = len(bs)
    a2_full = a_full * a_full
    mean_a = a_full.mean()
    means_b = np.array([b.mean() for b in bs])
    # tail sums over t >= tau
    cs_a = np.concatenate(([0.0], np.cumsum(a_full)))
    cs_a2 = np.concatenate(([0.0], np.cumsum(a2_full)))
    pair = {(i, j): bs[i] * bs[j] for i in range(k) for j in range(i, k)}

    value = np.empty((k, tau_max))
    cov = np.empty((tau_max, k, k))
    for tau in range(1, tau_max + 1):
        n = n_total - tau
        a = a_full[tau:]
        a2 = a2_full[tau:]
        sum_a = cs_a[-1] - cs_a[tau]
        sum_a2 = cs_a2[-1] - cs_a2[tau]
        s_ab = np.array([np.dot(a, b[:-tau]) for b in bs])
        s_a2b = np.array([np.dot(a2, b[:-tau]) for b in bs])
        value[:, tau - 1] = s_ab / n - mean_a * means_b
        # per-pair series x_i(t) = a(t) * (b_i(t - tau) - mean b_i)
        x_mean = (s_ab - means_b * sum_a) / n
        for (i, j), bb in pair.items():
            exy = (
                np.dot(a2, bb[:-tau])
                - means_b[j] * s_a2b[i]
                - means_b[i] * s_a2b[j]
                + means_b[i] * means_b[j] * sum_a2
            ) / n
            c = (exy - x_mean[i] * x_mean[j]) * size_factor / n
            cov[tau - 1, i, j] = cov[tau - 1, j, i] = c
    return LaggedCovariance(lags=np.arange(1, tau_max + 1), value=value, cov=cov)


@dataclass(frozen=True)
class ObservableSet:
    """
    Estimated ``L+``, ``L-``, ``L`` and ``V`` per lag.

    When ``normalized`` is true the L's are in units of ``sigma**3`` and ``V``
    in units of ``sigma**4``. ``cov_l_pm`` is the estimator covariance of
    ``L+`` and ``L-`` at each lag, needed to propagate errors into kernels.
    """

    lags: np.ndarray
    l_plus: np.ndarray
    l_minus: np.ndarray
    l_total: np.ndarray
    v: np.ndarray
    se_l_plus: np.ndarray
    se_l_minus: np.ndarray
    se_v: np.ndarray
    cov_l_pm: np.ndarray
    sigma: float
    normalized: bool = False
    n_obs: int = 0
    size_factor: float = 1.0

    @property
    def tau_max(self) -> int:
        return int(self.lags.size)

    @property
    def se_l_total(self) -> np.ndarray:
        return np.sqrt(np.maximum(self.se_l_plus**2 + self.se_l_minus**2 + 2 * self.cov_l_pm, 0.0))

    @property
    def l_scale(self) -> float:
        """Factor dividing L's to obtain L / sigma**3."""
        return 1.0 if self.normalized else self.sigma**3


def estimate_observables(returns: ReturnSeries | np.ndarray, tau_max: int = DEFAULT_TAU_MAX) -> ObservableSet:
    """
    Estimate the conditional correlation observables up to ``tau_max``.

    The sample ``sigma`` stored on the result is the raw root mean square of
    the returns, which is the quantity the leading-order formulas use in
    place of the bare volatility.
    """
    r = _as_array(returns)
    n = r.size
    if tau_max < 1:
        raise ValueError("tau_max must be at least 1")
    if tau_max >= n:
        raise DataError(f"tau_max={tau_max} is not smaller than the series length {n}")
    if n < 10 * tau_max:
        warnings.warn(f"series of {n} returns is short for tau_max={tau_max}", stacklevel=2)
    r_plus, r_minus = split_signs(r)
    r2 = r * r
    m2 = float(r2.mean())
    if m2 == 0.0:
        raise DataError("degenerate series: zero variance")
    factor = n / effective_sample_size(r, max_lag=min(NEFF_MAX_LAG, n - 2))
    est = lagged_covariance(r2, [r_plus, r_minus, r2], tau_max, size_factor=factor)
    se = est.se
    l_plus, l_minus, v = est.value
    return ObservableSet(
        lags=est.lags,
        l_plus=l_plus,
        l_minus=l_minus,
        l_total=l_plus + l_minus,
        v=v,
        se_l_plus=se[0],
        se_l_minus=se[1],
        se_v=se[2],
        cov_l_pm=est.cov[:, 0, 1].copy(),
        sigma=math.sqrt(m2),
        n_obs=n,
        size_factor=factor,
    )


def normalized(observables: ObservableSet) -> ObservableSet:
    """Divide the L's by ``sigma**3`` and ``V`` by ``sigma**4``; idempotent."""
    if observables.normalized:
        return observables
    s = observables.sigma
    if not (s > 0 and math.isfinite(s)):
        raise DataError(f"cannot normalize with sigma={s!r}")
    s3, s4 = s**3, s**4
    return replace(
        observables,
        l_plus=observables.l_plus / s3,
        l_minus=observables.l_minus / s3,
        l_total=observables.l_total / s3,
        v=observables.v / s4,
        se_l_plus=observables.se_l_plus / s3,
        se_l_minus=observables.se_l_minus / s3,
        se_v=observables.se_v / s4,
        cov_l_pm=observables.cov_l_pm / s3**2,
        normalized=True,
    )


def save_observables(observables: ObservableSet, path) -> None:
    cols = ("tau", "l_plus", "l_minus", "l", "v", "se_l_plus", "se_l_minus", "se_v")
    data = (
        observables.lags,
        observables.l_plus,
        observables.l_minus,
        observables.l_total,
        observables.v,
        observables.se_l_plus,
        observables.se_l_minus,
        observables.se_v,
    )
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(cols)
        for row in zip(*data):
            writer.writerow([int(row[0])] + [repr(float(x)) for x in row[1:]])


def _size_factor(r: np.ndarray) -> float:
    return r.size / effective_sample_size(r, max_lag=min(NEFF_MAX_LAG, r.size - 2))


def anticipatory_leverage(returns: ReturnSeries | np.ndarray, tau_max: int) -> tuple[np.ndarray, np.ndarray]:
    """
    Future-side leverage ``E r^2(t) r(t + tau) - E r^2 E r`` and its standard
    error for ``tau = 1..tau_max``.

    Volatility responds only to past returns, so this is zero in the model.
    """
    r = _as_array(returns)
    est = lagged_covariance(r, [r * r], tau_max, size_factor=_size_factor(r))
    return est.value[0], est.se[0]


def return_autocovariance(returns: ReturnSeries | np.ndarray, tau_max: int) -> tuple[np.ndarray, np.ndarray]:
    """``E r(t) r(t - tau) - (E r)^2`` with heteroskedasticity-aware errors."""
    r = _as_array(returns)
    est = lagged_covariance(r, [r], tau_max, size_factor=_size_factor(r))
    return est.value[0], est.se[0]
