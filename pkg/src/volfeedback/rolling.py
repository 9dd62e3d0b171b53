"""
Rolling-window indicators for non-stationary feedback.

At each evaluation time ``t`` the observables are estimated on the trailing
window ``[t - window + 1, t]`` only, inverted to kernels with that window's
``sigma`` and averaged over lags ``1..lag_average``. Because the inversion is
linear in ``L+-`` at fixed ``sigma``, inverting then averaging equals averaging
then inverting.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .marketdata import DataError, ReturnSeries

__all__ = [
    "KV_PHASES",
    "KL_PHASES",
    "RollingConfig",
    "RollingIndicator",
    "attach_index_volatility",
    "index_volatility",
    "market_average",
    "rolling_indicators",
    "save_indicators",
]

# Reference levels for plot annotation only.
KV_PHASES = (0.06, 0.13, 0.20)
KL_PHASES = (-0.02, -0.03, -0.06)


@dataclass(frozen=True)
class RollingConfig:
    window: int = 400
    lag_average: int = 10
    step: int = 1

    def __post_init__(self) -> None:
        if self.lag_average < 1:
            raise ValueError("lag_average must be at least 1")
        if self.window < 10 * self.lag_average:
            raise ValueError(f"window={self.window} must be at least 10 * lag_average")
        if self.step < 1:
            raise ValueError("step must be at least 1")


@dataclass(frozen=True)
class RollingIndicator:
    """
    Lag-averaged windowed observables and kernels per evaluation date.

    ``dates`` holds calendar dates when the input carried them, otherwise the
    integer position of the window's last return. ``sigma_r`` is NaN unless
    index volatility was attached.
    """

    dates: tuple
    l_bar_plus: np.ndarray
    l_bar_minus: np.ndarray
    k_bar_plus: np.ndarray
    k_bar_minus: np.ndarray
    sigma: np.ndarray
    se_k_bar_v: np.ndarray
    se_k_bar_l: np.ndarray
    sigma_r: np.ndarray
    n_stocks: np.ndarray
    k_bar_v: np.ndarray = field(init=False)
    k_bar_l: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "dates", tuple(self.dates))
        n = len(self.dates)
        for name in ("l_bar_plus", "l_bar_minus", "k_bar_plus", "k_bar_minus", "sigma",
                     "se_k_bar_v", "se_k_bar_l", "sigma_r", "n_stocks"):
            arr = np.array(getattr(self, name), dtype=int if name == "n_stocks" else float)
            if arr.shape != (n,):
                raise ValueError(f"{name} has shape {arr.shape}, expected ({n},)")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "k_bar_v", (self.k_bar_plus - self.k_bar_minus) / 2)
        object.__setattr__(self, "k_bar_l", (self.k_bar_plus + self.k_bar_minus) / 2)

    def __len__(self) -> int:
        return len(self.dates)


def _window_means(x: np.ndarray, width: int, ends: np.ndarray) -> np.ndarray:
    """Mean of ``x[e - width + 1 : e + 1]`` for each end index ``e``."""
    view = sliding_window_view(x, width)
    return view[ends - width + 1].mean(axis=1)


def rolling_indicators(returns: ReturnSeries, config: RollingConfig = RollingConfig()) -> RollingIndicator:
    """
    Windowed ``L+-``, ``K+-`` and their lag averages.

    Standard errors of the lag-averaged kernels use the per-pair series
    ``r^2(s) * mean_tau h(r(s - tau))`` inside each window without a
    clustering correction.
    """
    r = returns.returns if isinstance(returns, ReturnSeries) else np.asarray(returns, dtype=float)
    W, D = config.window, config.lag_average
    if r.size < W + D:
        raise DataError(f"need at least window + lag_average = {W + D} returns, got {r.size}")
    ends = np.arange(W - 1, r.size, config.step)
    r_plus = np.where(r > 0, r, 0.0)
    r_minus = np.where(r < 0, r, 0.0)
    r2 = r * r

    m2 = _window_means(r2, W, ends)
    if np.any(m2 == 0):
        bad = int(ends[np.flatnonzero(m2 == 0)[0]])
        raise DataError(f"degenerate window ending at index {bad}: zero variance")
    mp = _window_means(r_plus, W, ends)
    mm = _window_means(r_minus, W, ends)

    l_plus = np.zeros(ends.size)
    l_minus = np.zeros(ends.size)
    for tau in range(1, D + 1):
        # products r^2(s) r+-(s - tau) indexed by s; window pairs have s - tau >= start
        pp = np.zeros_like(r)
        pm = np.zeros_like(r)
        pp[tau:] = r2[tau:] * r_plus[:-tau]
        pm[tau:] = r2[tau:] * r_minus[:-tau]
        l_plus += _window_means(pp, W - tau, ends) - m2 * mp
        l_minus += _window_means(pm, W - tau, ends) - m2 * mm
    l_plus /= D
    l_minus /= D

    sigma = np.sqrt(m2)
    a = math.pi - 1.0
    c = 1.0 / (sigma**3 * (math.pi - 2.0))
    k_plus = (a * l_plus - l_minus) * c
    k_minus = -(l_plus - a * l_minus) * c

    se_v, se_l = _lag_average_se(r, r_plus, r_minus, r2, ends, W, D, mp, mm, c)
    dates = tuple(returns.dates[e] for e in ends) if isinstance(returns, ReturnSeries) and returns.dates else tuple(int(e) for e in ends)
    return RollingIndicator(
        dates=dates,
        l_bar_plus=l_plus,
        l_bar_minus=l_minus,
        k_bar_plus=k_plus,
        k_bar_minus=k_minus,
        sigma=sigma,
        se_k_bar_v=se_v,
        se_k_bar_l=se_l,
        sigma_r=np.full(ends.size, np.nan),
        n_stocks=np.ones(ends.size, dtype=int),
    )


def _lag_average_se(r, r_plus, r_minus, r2, ends, W, D, mp, mm, c):
    # K_V and K_L per-pair weights on (r+ - m+) and (r- - m-):
    #   K_V ~ (pi/2) [(r+ - m+) - (r- - m-)] c,  K_L ~ ((pi-2)/2) [(r+ - m+) + (r- - m-)] c
    n = W - D
    se_v = np.empty(ends.size)
    se_l = np.empty(ends.size)
    for i, e in enumerate(ends):
        seg = slice(e - W + 1, e + 1)
        xp, xm, x2 = r_plus[seg] - mp[i], r_minus[seg] - mm[i], r2[seg]
        hp = sliding_window_view(xp[:-1], D).mean(axis=1)
        hm = sliding_window_view(xm[:-1], D).mean(axis=1)
        lead = x2[D:]
        wv = lead * (hp - hm) * (math.pi / 2)
        wl = lead * (hp + hm) * ((math.pi - 2) / 2)
        se_v[i] = np.std(wv) * c[i] / math.sqrt(n)
        se_l[i] = np.std(wl) * c[i] / math.sqrt(n)
    return se_v, se_l


def market_average(indicators: Sequence[RollingIndicator]) -> RollingIndicator:
    """
    Per-date arithmetic mean across stocks.

    A stock missing on a date is left out of that date's mean and
    ``n_stocks`` counts the stocks present.
    """
    if not indicators:
        raise ValueError("need at least one indicator")
    all_dates = sorted(set().union(*(ind.dates for ind in indicators)))
    if not all_dates:
        raise DataError("indicators have no dates")
    if len(indicators) > 1 and not set.intersection(*(set(ind.dates) for ind in indicators)):
        raise DataError("indicators share no common date")
    pos = {d: i for i, d in enumerate(all_dates)}
    fields = ("l_bar_plus", "l_bar_minus", "k_bar_plus", "k_bar_minus", "sigma", "se_k_bar_v", "se_k_bar_l", "sigma_r")
    sums = {f: np.zeros(len(all_dates)) for f in fields}
    nan_counts = {f: np.zeros(len(all_dates), dtype=int) for f in fields}
    counts = np.zeros(len(all_dates), dtype=int)
    for ind in indicators:
        idx = np.array([pos[d] for d in ind.dates], dtype=int)
        counts[idx] += 1
        for f in fields:
            vals = getattr(ind, f)
            finite = np.isfinite(vals)
            np.add.at(sums[f], idx[finite], vals[finite])
            np.add.at(nan_counts[f], idx[~finite], 1)
    out = {}
    with np.errstate(invalid="ignore", divide="ignore"):
        for f in fields:
            present = counts - nan_counts[f]
            out[f] = np.where(present > 0, sums[f] / np.maximum(present, 1), np.nan)
    return RollingIndicator(dates=tuple(all_dates), n_stocks=counts, **out)


def index_volatility(index_returns: ReturnSeries, config: RollingConfig = RollingConfig()) -> tuple[tuple, np.ndarray]:
    """
    Trailing-window sample standard deviation of index returns.

    Returns ``(dates, sigma_r)`` evaluated on the same schedule as
    :func:`rolling_indicators`.
    """
    r = index_returns.returns
    W = config.window
    if r.size < W:
        raise DataError(f"need at least {W} index returns, got {r.size}")
    ends = np.arange(W - 1, r.size, config.step)
    windows = sliding_window_view(r, W)[ends - W + 1]
    sigma_r = windows.std(axis=1, ddof=1)
    dates = tuple(index_returns.dates[e] for e in ends) if index_returns.dates else tuple(int(e) for e in ends)
    return dates, sigma_r


def attach_index_volatility(indicator: RollingIndicator, dates: Sequence, sigma_r: np.ndarray) -> RollingIndicator:
    """Copy of ``indicator`` with ``sigma_r`` filled on matching dates."""
    lookup = dict(zip(dates, sigma_r))
    values = np.array([lookup.get(d, np.nan) for d in indicator.dates], dtype=float)
    kwargs = {f: getattr(indicator, f) for f in (
        "dates", "l_bar_plus", "l_bar_minus", "k_bar_plus", "k_bar_minus", "sigma",
        "se_k_bar_v", "se_k_bar_l", "n_stocks")}
    return RollingIndicator(sigma_r=values, **kwargs)


def save_indicators(indicator: RollingIndicator, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("date", "k_bar_v", "k_bar_l", "k_bar_plus", "k_bar_minus", "sigma_r", "n_stocks"))
        for i, d in enumerate(indicator.dates):
            writer.writerow([
                d.isoformat() if hasattr(d, "isoformat") else d,
                repr(float(indicator.k_bar_v[i])),
                repr(float(indicator.k_bar_l[i])),
                repr(float(indicator.k_bar_plus[i])),
                repr(float(indicator.k_bar_minus[i])),
                repr(float(indicator.sigma_r[i])),
                int(indicator.n_stocks[i]),
            ])
