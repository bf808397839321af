import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile(
    "qccs", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("qccs")


@pytest.fixture(scope="session")
def counterexample():
    from qccs.corpus import load
    return load("counterexample")


@pytest.fixture(scope="session")
def bb84_1():
    from qccs.corpus import load
    return load("bb84", 1)


@pytest.fixture
def rng():
    import numpy as np
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[k])
