import pytest

from cloudfogvec.milp import build_model
from cloudfogvec.solver import solve
from cloudfogvec.workload import Scenario, make_scenario


def solve_point(omega, **fields):
    """Build and solve one demand point; returns (solution, model)."""
    sc = Scenario(demands=(omega,), **fields)
    topo = sc.topology()
    mask, tasks = make_scenario(sc, topology=topo)
    model = build_model(topo, tasks, mask)
    return solve(model), model


@pytest.fixture
def point():
    return solve_point


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for tag in sorted(mod.RESULTS):
            terminalreporter.write_line(mod.RESULTS[tag])
