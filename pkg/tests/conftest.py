import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import ilqnash as iq
from ilqnash import _kernels


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    # Pay JIT compilation once, outside any timed assertion.
    _kernels.warm_up()


@pytest.fixture(scope="session")
def lq_scenario():
    return iq.make_lq_benchmark()


@pytest.fixture(scope="session")
def hallway():
    return iq.make_hallway_3p()


@pytest.fixture(scope="session")
def hallway_solution(hallway):
    return iq.solve(hallway.problem, x0=hallway.initial_state, config=hallway.solver)


@pytest.fixture(scope="session")
def freespace():
    return iq.make_freespace_5p()
