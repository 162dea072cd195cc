import numpy as np
import pytest

from hmimo.correlation import ArrayGeometry, clarke_correlation_matrix


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def upa_small():
    return ArrayGeometry(8, 8, 0.25)


@pytest.fixture(scope="session")
def R_small(upa_small):
    return clarke_correlation_matrix(upa_small, "iso3d")


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    verdicts = getattr(mod, "VERDICTS", None)
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(verdicts):
        terminalreporter.write_line(verdicts[n])
