import warnings

import pytest

from optexec.grid import Grid2D
from optexec.impact import ImpactModel
from optexec.impulse import ImpulseProblem, solve_impulse
from optexec.market import MarketModel
from optexec.singular import SingularProblem, solve_singular

FIG1 = MarketModel.gbm(2, 1, 4)
ABM = MarketModel.abm(4, 0.5, 1)
OU = MarketModel.ou(4, 5, 0.5, 1)
EXP = ImpactModel.exponential(0.5)


def grid(n=200, closure="intervene"):
    return Grid2D(10.0, 10.0, n, n, closure)


def impulse(model=FIG1, impact=EXP, k=0.2, n=200, closure="intervene"):
    problem = ImpulseProblem(model, impact, k, grid(n, closure))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return (problem, *solve_impulse(problem))


def singular(model=ABM, impact=EXP, n=200, closure="intervene"):
    problem = SingularProblem(model, impact, grid(n, closure))
    return (problem, *solve_singular(problem))


@pytest.fixture(scope="session")
def fig1():
    return impulse()


@pytest.fixture(scope="session")
def special_impulse():
    return impulse(k=0.0)


@pytest.fixture(scope="session")
def special_singular():
    return singular(FIG1)


@pytest.fixture(scope="session")
def abm_singular():
    return singular(ABM)


@pytest.fixture(scope="session")
def ou_singular():
    return singular(OU)


ACCEPTANCE = []


def record(number, passed, detail):
    line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
