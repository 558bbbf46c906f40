import sys

import pytest

from q1dshock.gas import GasLaw
from q1dshock.nozzle import Nozzle
from q1dshock.steady import BoundaryData, build_steady_shock, forward_outflow_density


def make_shock(coeffs, u_l, gamma=1.0, x0=2.0, rho_l=1.0, l=1.0, L=3.0):
    """Steady shock whose outflow density is produced by a forward run with the shock at x0."""
    gas = GasLaw(1.0, gamma)
    nozzle = Nozzle.polynomial(coeffs, l, L)
    rho_r = forward_outflow_density(gas, nozzle, rho_l, u_l, x0)
    return gas, nozzle, build_steady_shock(gas, nozzle, BoundaryData(rho_l, u_l, rho_r))


@pytest.fixture(scope="session")
def stable_iso():
    return make_shock([1.0, 1.0], 2.0)


@pytest.fixture(scope="session")
def unstable_iso():
    return make_shock([4.0, -1.0], 3.5)


@pytest.fixture(scope="session")
def stable_poly():
    return make_shock([1.0, 1.0], 2.0, gamma=1.4)


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(acceptance, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for k in sorted(results):
            terminalreporter.write_line(results[k])
