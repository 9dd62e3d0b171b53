"""
Leading-order algebra linking the feedback kernels ``K+`` and ``K-`` to
observables.

Forward maps (kernels -> observables) and the inverse map (``L+``, ``L-`` ->
kernels) are exact mutual inverses at fixed ``sigma``. The clustering and
leverage channels are

    K_V = (K+ - K-) / 2,    K_L = (K+ + K-) / 2.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .marketdata import DataError
from .moments import gaussian_constants, gaussian_even_moment
from .observables import ObservableSet

__all__ = [
    "PERTURBATIVE_LIMIT",
    "KernelEstimate",
    "QarchKernels",
    "delta_correction",
    "forward_L",
    "forward_V",
    "forward_leverage",
    "invert_observables",
    "predict_even_moments",
    "save_kernels",
    "save_qarch",
    "to_qarch",
    "variance_inflation",
]

PERTURBATIVE_LIMIT = 0.6

_W_SAME = 1.0 - 1.0 / math.pi  # weight of K+ in L+ (and K- in L-)
_W_CROSS = 1.0 / math.pi


def _ro(x) -> np.ndarray:
    arr = np.array(x, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class KernelEstimate:
    """
    Feedback kernels on lags ``1..tau_max``.

    Construct directly from ``k_plus``/``k_minus`` or via :meth:`from_basis`.
    ``k_v`` and ``k_l`` are derived on construction.
    """

    k_plus: np.ndarray
    k_minus: np.ndarray
    sigma: float = 1.0
    se_k_plus: np.ndarray | None = None
    se_k_minus: np.ndarray | None = None
    lags: np.ndarray | None = None
    cov_k_pm: np.ndarray | None = None
    k_v: np.ndarray = field(init=False)
    k_l: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        kp, km = _ro(self.k_plus), _ro(self.k_minus)
        if kp.shape != km.shape or kp.ndim != 1:
            raise ValueError("k_plus and k_minus must be 1-d arrays of equal length")
        lags = np.arange(1, kp.size + 1) if self.lags is None else np.asarray(self.lags, dtype=int)
        if lags.shape != kp.shape:
            raise ValueError("lags and kernels differ in length")
        object.__setattr__(self, "k_plus", kp)
        object.__setattr__(self, "k_minus", km)
        object.__setattr__(self, "lags", lags)
        for name in ("se_k_plus", "se_k_minus", "cov_k_pm"):
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name, _ro(val))
        object.__setattr__(self, "k_v", _ro((kp - km) / 2))
        object.__setattr__(self, "k_l", _ro((kp + km) / 2))

    @classmethod
    def from_basis(cls, k_v, k_l, sigma: float = 1.0, **kwargs) -> KernelEstimate:
        k_v, k_l = np.asarray(k_v, dtype=float), np.asarray(k_l, dtype=float)
        return cls(k_plus=k_l + k_v, k_minus=k_l - k_v, sigma=sigma, **kwargs)

    @property
    def tau_max(self) -> int:
        return int(self.k_plus.size)

    @property
    def outside_perturbative(self) -> bool:
        """True when some ``|K+-|`` exceeds the 0.6 small-kernel limit."""
        return bool(max(np.abs(self.k_plus).max(initial=0.0), np.abs(self.k_minus).max(initial=0.0)) > PERTURBATIVE_LIMIT)

    @property
    def se_k_v(self) -> np.ndarray | None:
        return self._basis_se(-1.0)

    @property
    def se_k_l(self) -> np.ndarray | None:
        return self._basis_se(1.0)

    def _basis_se(self, sign):
        if self.se_k_plus is None or self.se_k_minus is None:
            return None
        c = 0.0 if self.cov_k_pm is None else self.cov_k_pm
        var = (self.se_k_plus**2 + self.se_k_minus**2 + 2 * sign * c) / 4
        return np.sqrt(np.maximum(var, 0.0))


def invert_observables(observables: ObservableSet) -> KernelEstimate:
    """
    Solve the leading-order relations for ``K+`` and ``K-`` lag by lag.

    ``K+ = ((pi-1) L+ - L-) / (sigma^3 (pi-2))`` and
    ``K- = -(L+ - (pi-1) L-) / (sigma^3 (pi-2))``. Standard errors are
    propagated through the same linear map using the ``L+``/``L-``
    covariance.
    """
    sigma = observables.sigma
    if not (sigma > 0 and math.isfinite(sigma)):
        raise DataError(f"degenerate sigma={sigma!r}")
    c = 1.0 / (observables.l_scale * (math.pi - 2.0))
    a = math.pi - 1.0
    lp, lm = observables.l_plus, observables.l_minus
    k_plus = (a * lp - lm) * c
    k_minus = -(lp - a * lm) * c
    vp, vm, cv = observables.se_l_plus**2, observables.se_l_minus**2, observables.cov_l_pm
    var_p = (a * a * vp + vm - 2 * a * cv) * c * c
    var_m = (vp + a * a * vm - 2 * a * cv) * c * c
    cov_pm = -(a * vp + a * vm - (a * a + 1) * cv) * c * c
    return KernelEstimate(
        k_plus=k_plus,
        k_minus=k_minus,
        sigma=sigma,
        se_k_plus=np.sqrt(np.maximum(var_p, 0.0)),
        se_k_minus=np.sqrt(np.maximum(var_m, 0.0)),
        lags=observables.lags,
        cov_k_pm=cov_pm,
    )


def forward_L(kernels: KernelEstimate) -> tuple[np.ndarray, np.ndarray]:
    """Leading-order ``(L+, L-)`` implied by the kernels at ``kernels.sigma``."""
    s3 = kernels.sigma**3
    kp, km = kernels.k_plus, kernels.k_minus
    return s3 * (_W_SAME * kp + _W_CROSS * km), s3 * (_W_CROSS * kp + _W_SAME * km)


def forward_leverage(kernels: KernelEstimate) -> np.ndarray:
    """``L(tau) = 2 sigma^3 K_L(tau)``."""
    return 2.0 * kernels.sigma**3 * kernels.k_l


def forward_V(kernels: KernelEstimate) -> np.ndarray:
    """``V(tau) = 2 sqrt(2/pi) sigma^4 K_V(tau)``."""
    return 2.0 * math.sqrt(2.0 / math.pi) * kernels.sigma**4 * kernels.k_v


def delta_correction(kernels: KernelEstimate) -> float:
    """Relative variance inflation ``E J^2 / sigma0^2`` to leading order."""
    g = gaussian_constants()
    kp, km = kernels.k_plus, kernels.k_minus
    return float(g.var_half * np.sum((kp + km) ** 2) + (2.0 / math.pi - 1.0) * np.sum(kp * km))


def predict_even_moments(kernels: KernelEstimate, n_max: int = 10) -> dict[int, float]:
    """Normalized even moments ``M_n = (n-1)!! (1 + n(n-2)/2 * Delta)``."""
    if n_max < 2 or n_max % 2:
        raise ValueError(f"n_max must be an even integer >= 2, got {n_max}")
    delta = delta_correction(kernels)
    return {n: gaussian_even_moment(n) * (1.0 + n * (n - 2) / 2.0 * delta) for n in range(2, n_max + 1, 2)}


def variance_inflation(kernels: KernelEstimate, sigma0: float) -> float:
    """Observed variance ``sigma0^2 (1 + Delta)`` for bare volatility ``sigma0``."""
    return sigma0 * sigma0 * (1.0 + delta_correction(kernels))


@dataclass(frozen=True)
class QarchKernels:
    """Linear and quadratic QARCH kernels implied by the feedback kernels."""

    linear: np.ndarray
    quadratic: np.ndarray

    @property
    def dominance_ratio(self) -> float:
        """Mean diagonal over mean absolute off-diagonal entry."""
        q = self.quadratic
        n = q.shape[0]
        diag = np.diag(q)
        if n < 2:
            return math.inf
        off = (np.abs(q).sum() - np.abs(diag).sum()) / (n * (n - 1))
        return math.inf if off == 0 else float(diag.mean() / off)


def to_qarch(kernels: KernelEstimate, sigma0: float | None = None) -> QarchKernels:
    """
    Map to QARCH kernels: diagonal ``K_V^2 + K_L^2``, off-diagonal
    ``K_L(tau) K_L(tau')``, linear ``2 sigma0 K_L``.
    """
    s0 = kernels.sigma if sigma0 is None else sigma0
    kv, kl = kernels.k_v, kernels.k_l
    quad = np.outer(kl, kl)
    np.fill_diagonal(quad, kv * kv + kl * kl)
    return QarchKernels(linear=_ro(2.0 * s0 * kl), quadratic=_ro(quad))


def save_kernels(kernels: KernelEstimate, path) -> None:
    n = kernels.tau_max
    nan = np.full(n, np.nan)
    se_p = nan if kernels.se_k_plus is None else kernels.se_k_plus
    se_m = nan if kernels.se_k_minus is None else kernels.se_k_minus
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("tau", "k_plus", "k_minus", "k_v", "k_l", "se_k_plus", "se_k_minus"))
        for row in zip(kernels.lags, kernels.k_plus, kernels.k_minus, kernels.k_v, kernels.k_l, se_p, se_m):
            writer.writerow([int(row[0])] + [repr(float(x)) for x in row[1:]])


def save_qarch(qarch: QarchKernels, path) -> None:
    np.savetxt(path, qarch.quadratic, delimiter=",", fmt="%.17g")
