"""
Parametric kernel fits
======================

Fit an exponentially truncated power law and a sum of two exponentials to
noiseless and noisy versions of the same kernel.
"""

import numpy as np

from volfeedback import fit_truncated_power_law, fit_two_exponential
from volfeedback.fitting import truncated_power_law, two_exponential

tau = np.arange(1, 801, dtype=float)

clean = truncated_power_law(tau, 0.26, 0.17, 245.0)
fit = fit_truncated_power_law(clean)
print("truncated power law:", {k: round(v, 6) for k, v in fit.params.items()}, "iterations", fit.iterations)

noisy = two_exponential(tau, 0.14, 9.0, 0.13, 200.0) + np.random.default_rng(0).normal(0, 0.005, tau.size)
two = fit_two_exponential(noisy, weights=np.full(tau.size, 1 / 0.005**2))
for name, value in two.params.items():
    print(f"  {name} = {value:8.4f} +/- {two.ci95[name]:.4f}")

# A pure power law pushes T beyond the fitted range.
pl = fit_truncated_power_law(0.2 * tau**-0.5)
print(f"pure power law: T = {pl.params['T']:.3g}, power-law regime: {pl.power_law_regime}")
