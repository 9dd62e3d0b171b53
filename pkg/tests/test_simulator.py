import math

import numpy as np
import pytest

from volfeedback.kernel import KernelEstimate, delta_correction
from volfeedback.moments import sample_moments, variance_standard_error
from volfeedback.observables import estimate_observables, return_autocovariance
from volfeedback.simulator import (
    PerturbativeRegimeError,
    SimConfig,
    exponential_kernel,
    simulate,
    simulate_regime_switch,
)

from conftest import SHORT_K_MINUS, SHORT_K_PLUS


def test_zero_kernel_is_gaussian():
    cfg = SimConfig(0.01, np.zeros(10), np.zeros(10), 400_000, seed=1)
    sim = simulate(cfg)
    m = sample_moments(sim)
    assert abs(m.variance - 1e-4) < 3 * variance_standard_error(sim)
    np.testing.assert_array_equal(sim.volatility, 0.01)
    obs = estimate_observables(sim, 10)
    assert np.mean(np.abs(obs.l_plus / obs.se_l_plus) < 3) >= 0.9
    assert np.mean(np.abs(obs.l_minus / obs.se_l_minus) < 3) >= 0.9
    assert sim.floor_hits == 0


def test_zero_kernel_matches_rng_stream():
    cfg = SimConfig(0.01, np.zeros(3), np.zeros(3), 50, seed=9)
    rng = np.random.default_rng(9)
    rng.standard_normal(3)  # history pre-seed
    eps = rng.standard_normal(cfg.burn_in + cfg.length)
    np.testing.assert_array_equal(simulate(cfg).returns, 0.01 * eps[cfg.burn_in:])


def test_reproducible():
    cfg = SimConfig(0.01, SHORT_K_PLUS, SHORT_K_MINUS, 20_000, seed=123)
    a, b = simulate(cfg), simulate(cfg)
    np.testing.assert_array_equal(a.returns, b.returns)
    assert a.returns.tobytes() == b.returns.tobytes()
    c = simulate(SimConfig(0.01, SHORT_K_PLUS, SHORT_K_MINUS, 20_000, seed=124))
    assert not np.array_equal(a.returns, c.returns)


def test_variance_matches_delta(short_memory_sim):
    cfg, sim = short_memory_sim
    delta = delta_correction(KernelEstimate(cfg.k_plus, cfg.k_minus))
    measured = sample_moments(sim).variance / cfg.sigma0**2 - 1
    se = variance_standard_error(sim) / cfg.sigma0**2
    assert abs(measured - delta) < 3 * se


def test_floor_rate_perturbative(short_memory_sim):
    _, sim = short_memory_sim
    assert sim.floor_rate < 1e-3
    assert sim.steps == len(sim) + 2 * 20


def test_martingale(short_memory_sim):
    _, sim = short_memory_sim
    ac, se = return_autocovariance(sim, 20)
    assert np.mean(np.abs(ac / se) < 3) >= 0.9


def test_leverage_sign():
    tau_max = 40
    cfg = SimConfig(0.01, exponential_kernel(0.02, 10, tau_max), exponential_kernel(-0.1, 10, tau_max), 1_000_000, seed=21)
    assert np.all(KernelEstimate(cfg.k_plus, cfg.k_minus).k_l < 0)
    obs = estimate_observables(simulate(cfg), 10)
    assert np.all(obs.l_total / obs.se_l_total < -3)


def test_outside_perturbative_regime_raises():
    cfg = SimConfig(0.01, np.full(5, 2.0), np.full(5, -2.0), 10_000, seed=0, centering="constant")
    with pytest.raises(PerturbativeRegimeError, match="perturbative"):
        simulate(cfg)


def test_constant_centering_small_kernel():
    k = exponential_kernel(0.05, 2.0, 10)
    sim = simulate(SimConfig(0.01, k, -k, 100_000, seed=2, centering="constant"))
    assert sim.floor_rate == 0
    assert sample_moments(sim).sigma == pytest.approx(0.01, rel=0.05)


def test_conditional_centering_zero_mean_feedback():
    cfg = SimConfig(0.01, SHORT_K_PLUS, SHORT_K_MINUS, 300_000, seed=4)
    sim = simulate(cfg)
    # E J = 0 exactly, so the mean of sigma(t) equals sigma0 up to noise.
    se = np.std(sim.volatility) / math.sqrt(len(sim)) * 3
    assert abs(sim.volatility.mean() - 0.01) < 3 * se


@pytest.mark.parametrize("kwargs", [
    dict(sigma0=0.0),
    dict(length=0),
    dict(burn_in=5),
    dict(sigma_floor=0.0),
    dict(sigma_floor=0.6),
    dict(centering="median"),
    dict(seed=-1),
    dict(k_minus=np.zeros(4)),
])
def test_config_validation(kwargs):
    base = dict(sigma0=0.01, k_plus=np.zeros(5), k_minus=np.zeros(5), length=100)
    base.update(kwargs)
    with pytest.raises(ValueError):
        SimConfig(**base)


def test_config_defaults():
    cfg = SimConfig(0.02, np.zeros(7), np.zeros(7), 10)
    assert cfg.burn_in == 14 and cfg.tau_max == 7
    assert cfg.er_plus == pytest.approx(0.02 / math.sqrt(2 * math.pi))
    assert cfg.er_minus == -cfg.er_plus


def test_single_segment_matches_simulate():
    cfg = SimConfig(0.01, SHORT_K_PLUS, SHORT_K_MINUS, 5_000, seed=8)
    a, b = simulate(cfg), simulate_regime_switch([cfg])
    np.testing.assert_array_equal(a.returns, b.returns)
    assert b.boundaries == ()


def test_regime_switch_carry_over():
    k1 = exponential_kernel(0.05, 3, 10)
    k2 = exponential_kernel(0.15, 3, 10)
    c1 = SimConfig(0.01, k1, -k1, 1000, seed=5)
    c2 = SimConfig(0.01, k2, -k2, 500, seed=5)
    sim = simulate_regime_switch([c1, c2])
    assert len(sim) == 1500
    assert sim.boundaries == (1000,)
    np.testing.assert_array_equal(sim.carried_history[0], sim.returns[990:1000])
    # The first segment is unchanged by what follows.
    np.testing.assert_array_equal(sim.returns[:1000], simulate(c1).returns)


def test_regime_switch_segment_too_short():
    k = np.zeros(20)
    with pytest.raises(ValueError, match="segment 1"):
        simulate_regime_switch([SimConfig(0.01, k, k, 1000), SimConfig(0.01, k, k, 150)])
    with pytest.raises(ValueError):
        simulate_regime_switch([])
