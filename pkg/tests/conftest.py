import os
import warnings

import pytest

from optstop import reference

warnings.filterwarnings("ignore", category=RuntimeWarning)

PROBLEMS = os.path.join(os.path.dirname(__file__), os.pardir, "problems")


def problem_path(name: str) -> str:
    return os.path.abspath(os.path.join(PROBLEMS, f"{name}.json"))


@pytest.fixture(scope="session")
def box():
    return reference.box()


@pytest.fixture(scope="session")
def exp_spec():
    return reference.exp_tails()


@pytest.fixture(scope="session")
def asym():
    return reference.asym()


@pytest.fixture(scope="session")
def heavy():
    return reference.heavy()


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
