"""
Monte Carlo consistency checks: simulate with known kernels, run the
estimation pipeline, and compare every leading-order prediction with what
the pipeline measures.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .kernel import (
    KernelEstimate,
    delta_correction,
    forward_V,
    invert_observables,
    predict_even_moments,
)
from .moments import gaussian_even_moment, sample_moments, variance_standard_error
from .observables import anticipatory_leverage, estimate_observables, return_autocovariance
from .simulator import SimConfig, simulate

__all__ = ["Check", "PipelineRun", "VerificationReport", "run_pipeline", "verify"]

RECOVERY_FRACTION = 0.9
LAG_AVERAGE_RTOL = 0.10
Z_LIMIT = 3.0


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


@dataclass(frozen=True)
class VerificationReport:
    checks: tuple[Check, ...]
    header: tuple[str, ...] = ()

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def text(self) -> str:
        lines = list(self.header) + [c.line() for c in self.checks]
        lines.append(f"RESULT {'PASS' if self.passed else 'FAIL'} ({sum(c.passed for c in self.checks)}/{len(self.checks)})")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class PipelineRun:
    """Estimates from one or more pooled replicas of a simulation."""

    config: SimConfig
    tau_max: int
    kernels: KernelEstimate
    v: np.ndarray
    se_v: np.ndarray
    l_total: np.ndarray
    se_l_total: np.ndarray
    sigma: float
    variance: float
    se_variance: float
    even_moments: dict
    future: np.ndarray
    se_future: np.ndarray
    autocov: np.ndarray
    se_autocov: np.ndarray
    replicas: int


def _one(config: SimConfig, tau_max: int, lag_check: int):
    sim = simulate(config)
    obs = estimate_observables(sim, tau_max)
    k = invert_observables(obs)
    mom = sample_moments(sim)
    fut, se_fut = anticipatory_leverage(sim, lag_check)
    ac, se_ac = return_autocovariance(sim, 20)
    return dict(
        k_plus=k.k_plus, k_minus=k.k_minus, se_k_plus=k.se_k_plus, se_k_minus=k.se_k_minus,
        cov_k_pm=k.cov_k_pm, v=obs.v, se_v=obs.se_v, l_total=obs.l_total, se_l_total=obs.se_l_total,
        sigma=obs.sigma, variance=mom.variance, se_variance=variance_standard_error(sim),
        m=np.array([mom.even_moments[n] for n in (2, 4, 6, 8, 10)]),
        future=fut, se_future=se_fut, autocov=ac, se_autocov=se_ac,
    )


def run_pipeline(config: SimConfig, tau_max: int | None = None, replicas: int = 1, threads: int = 1, lag_check: int = 40) -> PipelineRun:
    """
    Simulate ``replicas`` independent runs (seeds ``seed, seed+1, ...``) and
    pool the estimates: means of the per-replica estimates with standard
    errors shrunk by ``sqrt(replicas)``.
    """
    tau_max = config.tau_max if tau_max is None else tau_max
    lag_check = min(lag_check, tau_max)
    configs = [replace(config, seed=config.seed + i) for i in range(replicas)]
    if threads > 1 and replicas > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda c: _one(c, tau_max, lag_check), configs))
    else:
        parts = [_one(c, tau_max, lag_check) for c in configs]

    def pooled(key, se=False):
        arr = np.mean([p[key] for p in parts], axis=0) if not se else np.sqrt(np.mean([p[key] ** 2 for p in parts], axis=0) / replicas)
        return arr

    sigma = float(pooled("sigma"))
    cov = np.mean([p["cov_k_pm"] for p in parts], axis=0) / replicas
    kernels = KernelEstimate(
        k_plus=pooled("k_plus"), k_minus=pooled("k_minus"), sigma=sigma,
        se_k_plus=pooled("se_k_plus", se=True), se_k_minus=pooled("se_k_minus", se=True), cov_k_pm=cov,
    )
    m = pooled("m")
    return PipelineRun(
        config=config, tau_max=tau_max, kernels=kernels,
        v=pooled("v"), se_v=pooled("se_v", se=True),
        l_total=pooled("l_total"), se_l_total=pooled("se_l_total", se=True),
        sigma=sigma, variance=float(pooled("variance")), se_variance=float(pooled("se_variance", se=True)),
        even_moments={n: float(x) for n, x in zip((2, 4, 6, 8, 10), m)},
        future=pooled("future"), se_future=pooled("se_future", se=True),
        autocov=pooled("autocov"), se_autocov=pooled("se_autocov", se=True),
        replicas=replicas,
    )


def _truth(run: PipelineRun, sigma: float = 1.0) -> KernelEstimate:
    n = run.tau_max
    kp = np.zeros(n)
    km = np.zeros(n)
    m = min(n, run.config.tau_max)
    kp[:m] = run.config.k_plus[:m]
    km[:m] = run.config.k_minus[:m]
    return KernelEstimate(kp, km, sigma=sigma)


def check_kernel_recovery(run: PipelineRun, max_lag: int = 40) -> Check:
    truth = _truth(run)
    k = run.kernels
    m = min(max_lag, run.tau_max)
    zp = (k.k_plus[:m] - truth.k_plus[:m]) / k.se_k_plus[:m]
    zm = (k.k_minus[:m] - truth.k_minus[:m]) / k.se_k_minus[:m]
    fp, fm = float(np.mean(np.abs(zp) < Z_LIMIT)), float(np.mean(np.abs(zm) < Z_LIMIT))
    ok = fp >= RECOVERY_FRACTION and fm >= RECOVERY_FRACTION
    return Check(
        "kernel-recovery",
        ok,
        f"lags 1..{m} within 3 SE: K+ {fp:.3f}, K- {fm:.3f} (need >= {RECOVERY_FRACTION}); "
        f"max |z| K+ {np.abs(zp).max():.2f}, K- {np.abs(zm).max():.2f}",
    )


def check_lag_average(run: PipelineRun, lag_average: int = 10) -> list[Check]:
    truth = _truth(run)
    k = run.kernels
    out = []
    for name, est, true in (("K_V", k.k_v, truth.k_v), ("K_L", k.k_l, truth.k_l)):
        e, t = float(est[:lag_average].mean()), float(true[:lag_average].mean())
        rel = abs(e - t) / abs(t) if t != 0 else math.inf
        out.append(Check(
            f"lag-average-{name}",
            rel <= LAG_AVERAGE_RTOL,
            f"mean over lags 1..{lag_average}: estimated {e:.6f}, true {t:.6f}, relative error {rel:.4f} (limit {LAG_AVERAGE_RTOL})",
        ))
    return out


def check_volatility_correlation(run: PipelineRun, lo: int = 5, hi: int = 40) -> Check:
    hi = min(hi, run.tau_max)
    pred = forward_V(_truth(run, sigma=run.sigma))
    z = (run.v - pred) / run.se_v
    sel = slice(lo - 1, hi)
    worst = int(np.argmax(np.abs(z[sel]))) + lo
    frac = float(np.mean(np.abs(z[sel]) < Z_LIMIT))
    return Check(
        "volatility-correlation",
        bool(np.all(np.abs(z[sel]) < Z_LIMIT)),
        f"V(tau) vs 2 sqrt(2/pi) sigma^4 K_V for tau in [{lo}, {hi}]: {frac:.3f} within 3 SE, worst z {z[worst - 1]:.2f} at tau={worst}",
    )


def check_variance(run: PipelineRun) -> Check:
    s0 = run.config.sigma0
    delta = delta_correction(_truth(run))
    measured = run.variance / s0**2 - 1.0
    se = run.se_variance / s0**2
    z = (measured - delta) / se
    return Check(
        "variance-inflation",
        abs(z) < Z_LIMIT,
        f"sample variance / sigma0^2 - 1 = {measured:.6f}, Delta(K) = {delta:.6f}, z = {z:.2f}",
    )


def check_even_moments(run: PipelineRun, orders=(4, 6)) -> Check:
    pred = predict_even_moments(_truth(run), n_max=max(orders))
    parts, ok = [], True
    for n in orders:
        s, p, g = run.even_moments[n], pred[n], gaussian_even_moment(n)
        closer = abs(s - p) < abs(s - g)
        ok &= closer
        parts.append(f"M{n} sample {s:.4f} predicted {p:.4f} gaussian {g}")
    return Check("even-moments", ok, "; ".join(parts) + " (sample must be closer to predicted)")


def check_leverage_sign(run: PipelineRun, max_lag: int = 10) -> Check:
    truth = _truth(run)
    m = min(max_lag, run.tau_max)
    if not np.all(truth.k_l[:m] < 0):
        return Check("leverage-sign", True, f"skipped: true K_L not negative on lags 1..{m}")
    z = run.l_total[:m] / run.se_l_total[:m]
    return Check("leverage-sign", bool(np.all(z < -Z_LIMIT)), f"L(tau)/SE on lags 1..{m}: max {z.max():.2f} (need < -3)")


def check_future_side(run: PipelineRun) -> Check:
    z = run.future / run.se_future
    frac = float(np.mean(np.abs(z) < Z_LIMIT))
    return Check(
        "no-anticipation",
        frac >= RECOVERY_FRACTION,
        f"E r^2(t) r(t+tau) on lags 1..{z.size}: {frac:.3f} within 3 SE, max |z| {np.abs(z).max():.2f}",
    )


def check_martingale(run: PipelineRun) -> Check:
    z = run.autocov / run.se_autocov
    frac = float(np.mean(np.abs(z) < Z_LIMIT))
    return Check(
        "uncorrelated-returns",
        frac >= RECOVERY_FRACTION,
        f"E r(t) r(t-tau) on lags 1..{z.size}: {frac:.3f} within 3 SE, max |z| {np.abs(z).max():.2f}",
    )


def verify(config: SimConfig, tau_max: int | None = None, replicas: int = 1, threads: int = 1) -> VerificationReport:
    """Run the simulator oracle and every consistency check."""
    run = run_pipeline(config, tau_max=tau_max, replicas=replicas, threads=threads)
    header = (
        f"# sigma0={config.sigma0!r} length={config.length} burn_in={config.burn_in} "
        f"seed={config.seed} replicas={replicas} tau_max={run.tau_max} centering={config.centering}",
        f"# sample sigma={run.sigma:.8g}; perturbative flag={'outside' if run.kernels.outside_perturbative else 'ok'}",
    )
    checks = [
        check_kernel_recovery(run),
        *check_lag_average(run),
        check_volatility_correlation(run),
        check_variance(run),
        check_even_moments(run),
        check_leverage_sign(run),
        check_future_side(run),
        check_martingale(run),
    ]
    return VerificationReport(checks=tuple(checks), header=header)
