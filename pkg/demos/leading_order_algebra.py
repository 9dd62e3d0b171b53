"""
Leading-order algebra
=====================

Forward maps from feedback kernels to observables, the inverse map, the
variance inflation and the implied QARCH kernel, evaluated on the single-lag
example K+ = 0.2, K- = -0.3.
"""

import numpy as np

from volfeedback import (
    KernelEstimate,
    delta_correction,
    forward_L,
    forward_V,
    invert_observables,
    predict_even_moments,
    to_qarch,
)
from volfeedback.observables import ObservableSet

k = KernelEstimate([0.2], [-0.3])
print("K_V, K_L:", k.k_v[0], k.k_l[0])

# L+ and L- in units of sigma^3
lp, lm = forward_L(k)
print(f"L+ = {lp[0]:.5f}, L- = {lm[0]:.5f}")
print(f"V  = {forward_V(k)[0]:.5f}  (2 sqrt(2/pi) K_V)")

# Feed the forward values back through the inverse map.
zero = np.zeros(1)
obs = ObservableSet(lags=np.array([1]), l_plus=lp, l_minus=lm, l_total=lp + lm, v=zero,
                    se_l_plus=zero, se_l_minus=zero, se_v=zero, cov_l_pm=zero, sigma=1.0)
back = invert_observables(obs)
print(f"recovered K+ = {back.k_plus[0]:.12f}, K- = {back.k_minus[0]:.12f}")

delta = delta_correction(k)
print(f"Delta(K) = {delta:.6f}")
for n, m in predict_even_moments(k, n_max=8).items():
    print(f"  M{n} = {m:.4f}")

# A clustering channel much stronger than the leverage channel gives a
# strongly diagonal quadratic kernel.
q = to_qarch(KernelEstimate.from_basis(np.full(20, 0.3), np.full(20, -0.03)))
print(f"QARCH diagonal {q.quadratic[0, 0]:.4f}, off-diagonal {q.quadratic[0, 1]:.4f}, ratio {q.dominance_ratio:.0f}")
