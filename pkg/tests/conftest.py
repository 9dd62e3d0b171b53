import datetime as dt

import numpy as np
import pytest

from volfeedback import SimConfig, estimate_observables, exponential_kernel, simulate

# Short-memory kernels keep the leading-order formulas accurate at Monte Carlo precision.
SHORT_TAU_MAX = 20
SHORT_K_PLUS = exponential_kernel(0.1, 2.0, SHORT_TAU_MAX)
SHORT_K_MINUS = exponential_kernel(-0.12, 2.0, SHORT_TAU_MAX)


@pytest.fixture(scope="session")
def short_memory_sim():
    config = SimConfig(sigma0=0.01, k_plus=SHORT_K_PLUS, k_minus=SHORT_K_MINUS, length=1_000_000, seed=11)
    return config, simulate(config)


@pytest.fixture(scope="session")
def short_memory_obs(short_memory_sim):
    _, sim = short_memory_sim
    return estimate_observables(sim, SHORT_TAU_MAX)


@pytest.fixture(scope="session")
def gaussian_returns():
    return np.random.default_rng(5).normal(0.0, 0.01, 1_000_000)


def write_prices(path, closes, start=dt.date(2000, 1, 3)):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("date,close\n")
        for i, c in enumerate(closes):
            fh.write(f"{start + dt.timedelta(days=i)},{float(c)!r}\n")
    return path


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import VERDICTS
    except ImportError:
        return
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS.values():
            terminalreporter.write_line(line)
