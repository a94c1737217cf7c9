import warnings
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from amol.core import TrialData

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures() -> Path:
    return FIXTURES


@pytest.fixture(autouse=True)
def _quiet_convergence():
    from amol.wsvm import ConvergenceWarning
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        yield


def random_trial(rng, n=30, K=3, dims=(2, 1, 1), ineligible_rate=0.0) -> TrialData:
    """Arbitrary valid trial data with random propensities and rewards."""
    feats = tuple(rng.normal(size=(n, d)) for d in dims[:K])
    A = rng.choice([-1, 1], size=(n, K))
    R = rng.normal(size=(n, K))
    P = rng.uniform(0.1, 0.9, size=(n, K))
    E = rng.random((n, K)) >= ineligible_rate
    P = np.where(E, P, 1.0)
    return TrialData(feats, A, R, P, E)


ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(':'))):
            terminalreporter.write_line(line)
