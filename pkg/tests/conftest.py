"""Shared fixtures: one fitted surrogate, one set of CAMs and one 12 h batch per session."""

from __future__ import annotations

import time

import pytest
from hypothesis import HealthCheck, settings

from hydrofcr.hillchart import GridSpec, GroundTruthHillChart, generate_training_set
from hydrofcr.scenario import ScenarioConfig, build_assets, run_batch, synthesize_frequency
from hydrofcr.surrogate import fit_surrogate

settings.register_profile(
    "hydrofcr", deadline=None, derandomize=True, suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("hydrofcr")

# Lines appended by the acceptance tests; echoed in the terminal summary.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def chart():
    return GroundTruthHillChart()


@pytest.fixture(scope="session")
def training(chart):
    return generate_training_set(chart, GridSpec(), noise_sd=0.003, seed=42)


@pytest.fixture(scope="session")
def fitted(training):
    """``(surrogate, fit_seconds)``."""
    t0 = time.perf_counter()
    sur = fit_surrogate(training)
    return sur, time.perf_counter() - t0


@pytest.fixture(scope="session")
def surrogate(fitted):
    return fitted[0]


@pytest.fixture(scope="session")
def cfg():
    return ScenarioConfig()


@pytest.fixture(scope="session")
def assets(cfg, surrogate, chart):
    return build_assets(cfg, surrogate=surrogate, chart=chart)


@pytest.fixture(scope="session")
def freq(cfg):
    return synthesize_frequency(cfg.seed, cfg.duration_s, cfg.frequency.split_at_s)


@pytest.fixture(scope="session")
def batch(cfg, freq, surrogate, chart):
    """``(results, seconds)`` for the four-mode 12 h run, CAM construction included."""
    t0 = time.perf_counter()
    assets = build_assets(cfg, surrogate=surrogate, chart=chart)
    results = run_batch(cfg, freq, assets)
    return results, time.perf_counter() - t0
