import sys
import warnings

import numpy as np
import pytest

from fdibench.datacube import SyntheticConfig, fit_normalizer, generate_synthetic_cube


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_cube():
    return generate_synthetic_cube(SyntheticConfig(height=32, width=32, fires_per_year=120, seed=3))


@pytest.fixture(scope="session")
def small_norm(small_cube):
    days = small_cube.days_of_year(small_cube.years()[0])
    return fit_normalizer(small_cube, (int(days[0]), int(days[-1]) + 1))


@pytest.fixture(autouse=True)
def _quiet_budget_warnings():
    # reduced test models deliberately miss the default parameter budgets
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message=".*deviates.*budget")
        yield


def pytest_terminal_summary(terminalreporter):
    mod = next((m for name, m in sys.modules.items() if name.endswith("test_acceptance")), None)
    results = getattr(mod, "RESULTS", {})
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
