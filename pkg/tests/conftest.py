import numpy as np
import pytest

from eigenclosure.spectral import (FourierGrid, FradeParams, InitialCondition, frade_eigenvalues,
                                   transform_initial_condition)


@pytest.fixture(scope="session")
def grid():
    return FourierGrid(4.0, 512)


@pytest.fixture(scope="session")
def initial(grid):
    return transform_initial_condition(InitialCondition(1.0, 0.1), grid)


@pytest.fixture(scope="session")
def frade_mu(grid):
    return frade_eigenvalues(FradeParams(1.5, 0.05, 1.0), grid)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# One line per acceptance criterion, printed in the terminal summary.
ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture(scope="session")
def criterion():
    """``criterion(label, passed, detail)`` records a PASS/FAIL line and returns ``passed``."""

    def record(label: str, passed, detail: str) -> bool:
        passed = bool(passed)
        ACCEPTANCE.append((label, passed, detail))
        print(f"{'PASS' if passed else 'FAIL'} criterion {label}: {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, passed, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} criterion {label}: {detail}")
