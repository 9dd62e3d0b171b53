import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import integrate, stats

from volfeedback.marketdata import DataError
from volfeedback.moments import (
    effective_sample_size,
    gaussian_constants,
    gaussian_even_moment,
    sample_moments,
    variance_standard_error,
)


def _half(k):
    value, _ = integrate.quad(lambda x: x**k * stats.norm.pdf(x), 0, np.inf, epsabs=1e-14, epsrel=1e-14)
    return value


def test_constants_match_quadrature():
    g = gaussian_constants()
    e1, e2, e3 = _half(1), _half(2), _half(3)
    assert abs(g.e_plus - e1) < 1e-10
    assert abs(g.e_plus_sq - e2) < 1e-10
    assert abs(g.e_plus_cu - e3) < 1e-10
    assert abs(g.var_half - (e2 - e1**2)) < 1e-10
    assert abs(g.cross_half - e1**2) < 1e-10


def test_constants_examples():
    g = gaussian_constants()
    assert g.e_plus == pytest.approx(0.3989422804, abs=1e-10)
    assert g.var_half == pytest.approx(0.3408450569, abs=1e-10)
    # Oracle: int x^3 phi - int x phi over the half line.
    assert g.e_plus_cu - g.e_plus == pytest.approx(_half(3) - _half(1), abs=1e-10)
    assert g.e_plus_cu - g.e_plus == pytest.approx(0.3989422804, abs=1e-10)


@pytest.mark.parametrize("n, expected", [(2, 1), (4, 3), (6, 15), (8, 105), (10, 945), (12, 10395)])
def test_even_moment_values(n, expected):
    assert gaussian_even_moment(n) == expected


@pytest.mark.parametrize("n", [4, 6, 8, 10])
def test_even_moment_matches_normal(n):
    assert gaussian_even_moment(n) == pytest.approx(stats.norm.moment(n), rel=1e-12)


@pytest.mark.parametrize("n", range(4, 21, 2))
def test_even_moment_recursion(n):
    assert gaussian_even_moment(n) == (n - 1) * gaussian_even_moment(n - 2)


@pytest.mark.parametrize("n", [0, 1, 3, 22, -2])
def test_even_moment_rejects(n):
    with pytest.raises(ValueError):
        gaussian_even_moment(n)


def test_gaussian_m4(gaussian_returns):
    m = sample_moments(gaussian_returns)
    # SE of M4 for Gaussian data is sqrt(96 / N).
    assert abs(m.even_moments[4] - 3.0) < 3 * math.sqrt(96 / gaussian_returns.size)
    assert m.even_moments[2] == 1.0
    assert sorted(m.even_moments) == [2, 4, 6, 8, 10]


def test_monte_carlo_error_shrinks():
    rng = np.random.default_rng(3)
    errs = []
    for n in (10_000, 1_000_000):
        devs = [abs(sample_moments(rng.standard_normal(n)).even_moments[4] - 3) for _ in range(8)]
        errs.append(np.mean(devs))
    assert errs[1] < errs[0] / 4


def test_constant_series_degenerate():
    with pytest.raises(DataError):
        sample_moments(np.full(200, 0.01))
    with pytest.raises(DataError):
        sample_moments(np.zeros(200))


def test_empty_series():
    with pytest.raises(DataError):
        sample_moments(np.array([]))


def test_short_series_warns():
    with pytest.warns(UserWarning):
        sample_moments(np.array([0.1, -0.1, 0.2]))


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, st.integers(100, 300), elements=st.floats(-1, 1, allow_subnormal=False)))
def test_sample_moment_identities(r):
    if np.ptp(r) == 0 or np.mean(r * r) == 0.0:
        return
    m = sample_moments(r)
    assert m.mean_plus >= 0 >= m.mean_minus
    assert m.mean_abs == pytest.approx(np.mean(np.abs(r)), rel=1e-12, abs=1e-300)
    assert m.mean_abs == m.mean_plus - m.mean_minus
    assert m.even_moments[2] == 1.0


def test_tiny_scale_moments():
    r = np.zeros(200)
    r[0] = 3e-95
    assert sample_moments(r).even_moments[4] == pytest.approx(200.0, rel=1e-12)
    r[0] = 4e-171
    with pytest.raises(DataError):
        sample_moments(r)


def test_raw_and_demeaned():
    r = np.random.default_rng(1).normal(0.5, 1.0, 1000)
    raw, dem = sample_moments(r), sample_moments(r, demean=True)
    assert raw.variance == pytest.approx(np.mean(r**2), rel=1e-12)
    assert dem.variance == pytest.approx(np.var(r), rel=1e-12)


def test_fixed_summation_order_reproducible():
    r = np.random.default_rng(2).standard_normal(10_000)
    assert sample_moments(r) == sample_moments(r.copy())


def test_effective_sample_size_iid(gaussian_returns):
    n_eff = effective_sample_size(gaussian_returns)
    assert 0.95 * gaussian_returns.size < n_eff <= gaussian_returns.size


def test_effective_sample_size_clustered(short_memory_sim):
    _, sim = short_memory_sim
    assert effective_sample_size(sim) < len(sim)


def test_variance_se_gaussian(gaussian_returns):
    se = variance_standard_error(gaussian_returns)
    expected = math.sqrt(2) * 1e-4 / math.sqrt(gaussian_returns.size)
    assert se == pytest.approx(expected, rel=0.05)
