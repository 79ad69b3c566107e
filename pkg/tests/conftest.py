import numpy as np
import pytest

from sve_backstepping.kernels import (AbstractCoefficients, solve_controller_kernels,
                                      solve_observer_kernels)
from sve_backstepping.model import EquilibriumSetup, PhysicalParams


def table1_setup():
    return EquilibriumSetup(PhysicalParams(g=9.81, Cf=0.1, Ag=0.008, pg=0.002),
                            Hstar=2.0, Vstar=3.0, Bstar=0.4, rho1=1.5, rho2=1.5, q1=1.0, q2=1.2)


def table2_setup():
    return EquilibriumSetup(PhysicalParams(g=9.81, Cf=0.1, Ag=0.003, pg=0.002),
                            Hstar=1.0, Vstar=5.0, Bstar=0.4, rho1=1.0, rho2=1.5, q1=1.0, q2=1.2)


@pytest.fixture(scope="session")
def t1():
    return table1_setup()


@pytest.fixture(scope="session")
def t2():
    return table2_setup()


@pytest.fixture(scope="session")
def t2_coeffs(t2):
    return AbstractCoefficients.from_setup(t2)


@pytest.fixture(scope="session")
def t2_kernels(t2_coeffs):
    return solve_controller_kernels(t2_coeffs, 101)


@pytest.fixture(scope="session")
def t2_observer(t2_coeffs):
    return solve_observer_kernels(t2_coeffs, 101)


@pytest.fixture
def rng():
    return np.random.default_rng(7)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
