import pytest

from fockforge import analytic as an
from fockforge import dynamics as dy
from fockforge import fockspace as fs

D_CAV = 6
D_MECH = 60
TWO_MODE_T_MAX = 600.0

_acceptance_lines: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    return _acceptance_lines


@pytest.fixture(scope="session")
def two_mode_runs():
    """Two-mode steady states for n=1, zeta=0.5 from ground and thermal(2) mechanics."""
    model = dy.build_two_mode_model(an.CouplingSet.resonant(1, 0.5, g_minus=1.0, kappa=10.0), D_CAV, D_MECH)
    cav = fs.basis(D_CAV, 0).to_density()
    starts = {
        "ground": fs.tensor_states(cav, fs.thermal_state(0.0, D_MECH)),
        "thermal": fs.tensor_states(cav, fs.thermal_state(2.0, D_MECH)),
    }
    return {
        name: dy.steady_state(model, rho0, 5.0, TWO_MODE_T_MAX, occupation_floor=2.0)
        for name, rho0 in starts.items()
    }


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
