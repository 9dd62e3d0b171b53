"""
Parametric kernel fits.

Two shapes are supported:

* truncated power law ``A * tau**(-b) * exp(-tau / T)``
* two exponentials ``A1 * exp(-tau / T1) + A2 * exp(-tau / T2)``

Fits minimise a weighted sum of squared residuals with a damped Gauss-Newton
(Levenberg-Marquardt) iteration. Time scales are optimised as ``log T`` so they
stay positive. Every fit runs from a fixed grid of starting points and keeps
the best result, so results are reproducible.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

__all__ = [
    "FORMS",
    "FitError",
    "KernelFit",
    "fit_kernel",
    "fit_truncated_power_law",
    "fit_two_exponential",
    "levenberg_marquardt",
    "save_fits",
    "tpl_jacobian",
    "truncated_power_law",
    "two_exponential",
    "two_exponential_jacobian",
    "weights_from_se",
]

FORMS = ("truncated-power-law", "two-exponential")
MAX_ITER = 500
REL_TOL = 1e-10
STEP_TOL = 1e-12
B_RANGE = (-1.0, 2.0)
LOG_T_RANGE = (math.log(1e-3), math.log(1e9))


class FitError(ValueError):
    """Input unsuitable for fitting."""


def truncated_power_law(tau, A, b, T):
    tau = np.asarray(tau, dtype=float)
    return A * tau ** (-b) * np.exp(-tau / T)


def two_exponential(tau, A1, T1, A2, T2):
    tau = np.asarray(tau, dtype=float)
    return A1 * np.exp(-tau / T1) + A2 * np.exp(-tau / T2)


def tpl_jacobian(theta, tau) -> np.ndarray:
    """Derivatives of the truncated power law w.r.t. ``(A, b, log T)``."""
    A, b, u = theta
    tau = np.asarray(tau, dtype=float)
    inv_t = math.exp(-u)
    base = tau ** (-b) * np.exp(-tau * inv_t)
    f = A * base
    return np.column_stack((base, -np.log(tau) * f, f * tau * inv_t))


def two_exponential_jacobian(theta, tau) -> np.ndarray:
    """Derivatives of the two-exponential form w.r.t. ``(A1, log T1, A2, log T2)``."""
    A1, u1, A2, u2 = theta
    tau = np.asarray(tau, dtype=float)
    i1, i2 = math.exp(-u1), math.exp(-u2)
    e1, e2 = np.exp(-tau * i1), np.exp(-tau * i2)
    return np.column_stack((e1, A1 * e1 * tau * i1, e2, A2 * e2 * tau * i2))


def _tpl_model(theta, tau):
    A, b, u = theta
    return truncated_power_law(tau, A, b, math.exp(u))


def _two_exp_model(theta, tau):
    A1, u1, A2, u2 = theta
    return two_exponential(tau, A1, math.exp(u1), A2, math.exp(u2))


@dataclass
class _LMResult:
    theta: np.ndarray
    objective: float
    converged: bool
    iterations: int
    history: list = field(default_factory=list)


def levenberg_marquardt(model, jacobian, theta0, x, y, w, lower, upper, free=None) -> _LMResult:
    """
    Minimise ``sum w * (y - model(theta, x))**2`` by damped Gauss-Newton.

    Only accepted steps change ``theta``, so the recorded objective history is
    non-increasing. Parameters outside ``[lower, upper]`` are clipped; entries
    with ``free[i] == False`` stay at their starting value.

    Convergence: relative objective decrease below ``1e-10`` on an accepted
    step, or a proposed step shorter than ``1e-12``.
    """
    theta = np.clip(np.array(theta0, dtype=float), lower, upper)
    free = np.ones(theta.size, bool) if free is None else np.asarray(free, bool)
    sw = np.sqrt(w)

    def objective(th):
        res = sw * (y - model(th, x))
        return float(np.dot(res, res))

    s = objective(theta)
    history = [s]
    lam = 1e-3
    converged = False
    it = 0
    for it in range(1, MAX_ITER + 1):
        jac = (jacobian(theta, x) * sw[:, None])[:, free]
        res = sw * (y - model(theta, x))
        g = jac.T @ res
        h = jac.T @ jac
        d = np.diag(h).copy()
        d[d <= 0] = 1.0
        accepted = False
        while True:
            try:
                step = np.linalg.solve(h + lam * np.diag(d), g)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(h + lam * np.diag(d), g, rcond=None)[0]
            trial = theta.copy()
            trial[free] += step
            trial = np.clip(trial, lower, upper)
            real_step = np.linalg.norm(trial - theta)
            if not np.all(np.isfinite(trial)):
                s_new = math.inf
            else:
                s_new = objective(trial)
            if s_new <= s and np.isfinite(s_new):
                accepted = True
                break
            lam *= 10.0
            if real_step < STEP_TOL or lam > 1e20:
                break
        if not accepted:
            converged = real_step < STEP_TOL or s == 0.0
            break
        rel = (s - s_new) / s if s > 0 else 0.0
        theta, s = trial, s_new
        history.append(s)
        lam = max(lam / 10.0, 1e-12)
        if rel < REL_TOL or real_step < STEP_TOL or s == 0.0:
            converged = True
            break
    return _LMResult(theta=theta, objective=s, converged=converged, iterations=it, history=history)


@dataclass(frozen=True)
class KernelFit:
    """
    Result of a parametric kernel fit.

    ``params`` maps names to values in natural units (time scales in days);
    ``ci95`` holds linearized 95% half-widths. For the truncated power law,
    ``power_law_regime`` flags ``T`` beyond the largest fitted lag.
    """

    form: str
    params: dict[str, float]
    ci95: dict[str, float]
    residual_rms: float
    converged: bool
    iterations: int
    objective: float
    tau_max: int
    start_index: int = 0
    history: tuple[float, ...] = field(default=(), repr=False)

    @property
    def power_law_regime(self) -> bool:
        return self.form == FORMS[0] and self.params["T"] > self.tau_max

    def __call__(self, tau) -> np.ndarray:
        p = self.params
        if self.form == FORMS[0]:
            return truncated_power_law(tau, p["A"], p["b"], p["T"])
        return two_exponential(tau, p["A1"], p["T1"], p["A2"], p["T2"])


def weights_from_se(se) -> np.ndarray:
    """Inverse-variance weights, with non-positive errors given zero weight."""
    se = np.asarray(se, dtype=float)
    w = np.zeros_like(se)
    ok = np.isfinite(se) & (se > 0)
    w[ok] = 1.0 / se[ok] ** 2
    return w


def _prepare(kernel, weights, lags):
    y = np.asarray(kernel, dtype=float)
    if y.ndim != 1:
        raise FitError("kernel must be one-dimensional")
    tau = np.arange(1, y.size + 1, dtype=float) if lags is None else np.asarray(lags, dtype=float)
    if tau.shape != y.shape:
        raise FitError("lags and kernel differ in length")
    if y.size < 10:
        raise FitError(f"need at least 10 lags, got {y.size}")
    if not np.all(np.isfinite(y)):
        raise FitError("kernel contains non-finite values")
    if np.all(y == 0):
        raise FitError("kernel is identically zero")
    if weights is None:
        w = np.ones_like(y)
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != y.shape or np.any(w < 0) or not np.any(w > 0):
            raise FitError("weights must be non-negative, same length as kernel, not all zero")
    # Normalise so the objective is scale-free in w.
    return tau, y, w / w.max()


def _covariance(jacobian, theta, tau, w, objective, free):
    jac = (jacobian(theta, tau) * np.sqrt(w)[:, None])[:, free]
    dof = max(int(np.count_nonzero(w)) - int(free.sum()), 1)
    cov = np.zeros((theta.size, theta.size))
    cov_free = np.linalg.pinv(jac.T @ jac) * (objective / dof)
    cov[np.ix_(free, free)] = cov_free
    return cov, stats.t.ppf(0.975, dof)


def _bounds(names, defaults, bounds):
    lower = np.array([defaults[n][0] for n in names], dtype=float)
    upper = np.array([defaults[n][1] for n in names], dtype=float)
    for name, (lo, hi) in (bounds or {}).items():
        if name not in names:
            raise FitError(f"unknown parameter {name!r}")
        i = names.index(name)
        lower[i], upper[i] = lo, hi
    return lower, upper


def _run_starts(model, jacobian, starts, tau, y, w, lower, upper):
    free = lower < upper
    best, best_i = None, -1
    for i, theta0 in enumerate(starts):
        res = levenberg_marquardt(model, jacobian, theta0, tau, y, w, lower, upper, free)
        if best is None or res.objective < best.objective:
            best, best_i = res, i
    return best, best_i, free


def fit_truncated_power_law(kernel, weights=None, lags=None, bounds=None) -> KernelFit:
    """
    Fit ``A * tau**(-b) * exp(-tau / T)`` by weighted least squares.

    Parameters
    ----------
    kernel : array_like
        Kernel values on ``lags`` (default ``1..len(kernel)``).
    weights : array_like, optional
        Per-lag weights, e.g. :func:`weights_from_se`. Uniform by default.
    bounds : dict, optional
        ``{"b": (lo, hi)}``-style overrides; ``T`` bounds are in days.
        Equal bounds fix the parameter (``{"b": (0, 0)}`` fits a pure
        exponential).
    """
    tau, y, w = _prepare(kernel, weights, lags)
    names = ("A", "b", "logT")
    bounds = dict(bounds or {})
    if "T" in bounds:
        lo, hi = bounds.pop("T")
        bounds["logT"] = (math.log(lo), math.log(hi))
    lower, upper = _bounds(names, {"A": (-np.inf, np.inf), "b": B_RANGE, "logT": LOG_T_RANGE}, bounds)
    k1 = y[0]
    starts = [
        (a, b, math.log(t))
        for a in (k1, 2 * k1)
        for b in (0.0, 0.5)
        for t in (50.0, 400.0)
    ]
    best, start_i, free = _run_starts(_tpl_model, tpl_jacobian, starts, tau, y, w, lower, upper)
    theta = best.theta
    cov, q = _covariance(tpl_jacobian, theta, tau, w, best.objective, free)
    sd = np.sqrt(np.maximum(np.diag(cov), 0.0))
    T = math.exp(theta[2])
    resid = y - _tpl_model(theta, tau)
    return KernelFit(
        form=FORMS[0],
        params={"A": float(theta[0]), "b": float(theta[1]), "T": T},
        ci95={"A": float(q * sd[0]), "b": float(q * sd[1]), "T": float(q * sd[2] * T)},
        residual_rms=float(np.sqrt(np.mean(resid**2))),
        converged=best.converged,
        iterations=best.iterations,
        objective=best.objective,
        tau_max=int(tau.max()),
        start_index=start_i,
        history=tuple(best.history),
    )


def fit_two_exponential(kernel, weights=None, lags=None, bounds=None) -> KernelFit:
    """
    Fit ``A1 exp(-tau/T1) + A2 exp(-tau/T2)``; the result is ordered so that
    ``T1 <= T2``.
    """
    tau, y, w = _prepare(kernel, weights, lags)
    names = ("A1", "logT1", "A2", "logT2")
    bounds = dict(bounds or {})
    for key in ("T1", "T2"):
        if key in bounds:
            lo, hi = bounds.pop(key)
            bounds["log" + key] = (math.log(lo), math.log(hi))
    inf = (-np.inf, np.inf)
    lower, upper = _bounds(names, {"A1": inf, "A2": inf, "logT1": LOG_T_RANGE, "logT2": LOG_T_RANGE}, bounds)
    k1 = y[0]
    starts = [
        (split * k1, math.log(t1), (1 - split) * k1, math.log(t2))
        for t1, t2 in ((10.0, 200.0), (30.0, 600.0))
        for split in (0.7, 0.5)
    ]
    best, start_i, free = _run_starts(_two_exp_model, two_exponential_jacobian, starts, tau, y, w, lower, upper)
    theta = best.theta
    cov, q = _covariance(two_exponential_jacobian, theta, tau, w, best.objective, free)
    sd = np.sqrt(np.maximum(np.diag(cov), 0.0))
    T1, T2 = math.exp(theta[1]), math.exp(theta[3])
    params = {"A1": float(theta[0]), "T1": T1, "A2": float(theta[2]), "T2": T2}
    ci = {"A1": float(q * sd[0]), "T1": float(q * sd[1] * T1), "A2": float(q * sd[2]), "T2": float(q * sd[3] * T2)}
    if T1 > T2:
        params = {"A1": params["A2"], "T1": T2, "A2": params["A1"], "T2": T1}
        ci = {"A1": ci["A2"], "T1": ci["T2"], "A2": ci["A1"], "T2": ci["T1"]}
    resid = y - _two_exp_model(theta, tau)
    return KernelFit(
        form=FORMS[1],
        params=params,
        ci95=ci,
        residual_rms=float(np.sqrt(np.mean(resid**2))),
        converged=best.converged,
        iterations=best.iterations,
        objective=best.objective,
        tau_max=int(tau.max()),
        start_index=start_i,
        history=tuple(best.history),
    )


def fit_kernel(kernel, form: str, weights=None, lags=None, bounds=None) -> KernelFit:
    if form in ("tpl", FORMS[0]):
        return fit_truncated_power_law(kernel, weights, lags, bounds)
    if form in ("2exp", FORMS[1]):
        return fit_two_exponential(kernel, weights, lags, bounds)
    raise ValueError(f"unknown fit form {form!r}")


_CSV_PARAMS = ("A", "b", "T", "A1", "T1", "A2", "T2")


def save_fits(fits: dict[str, KernelFit], path) -> None:
    """One CSV row per fit; ``name`` identifies the fitted kernel."""
    header = ["name", "form", *_CSV_PARAMS, *(f"ci_{p}" for p in _CSV_PARAMS), "residual_rms", "converged"]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for name, fit in fits.items():
            row = [name, fit.form]
            row += ["" if p not in fit.params else repr(fit.params[p]) for p in _CSV_PARAMS]
            row += ["" if p not in fit.ci95 else repr(fit.ci95[p]) for p in _CSV_PARAMS]
            row += [repr(fit.residual_rms), str(fit.converged).lower()]
            writer.writerow(row)
