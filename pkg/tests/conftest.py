import numpy as np
import pytest
from hypothesis import strategies as st

from hctab.game import Partition, is_budget_feasible
from hctab.instance import Instance

# acceptance results, printed in the terminal summary
CRITERIA: dict[int, tuple[bool, str]] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    CRITERIA[number] = (passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        passed, detail = CRITERIA[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")


def objective_from_x(instance: Instance, x: np.ndarray) -> float:
    """Allocation objective from a 0/1 agent-by-task matrix, written independently of the game module."""
    total = 0.0
    for j in range(instance.m):
        for k in instance.required[j]:
            col = [instance.capabilities[i].get(k, 0.0) * x[i, j] for i in range(instance.n)]
            total += max(col) if col else 0.0
    return total


def x_matrix(instance: Instance, partition: Partition) -> np.ndarray:
    x = np.zeros((instance.n, instance.m))
    for i, a in enumerate(partition.assignment):
        if a != instance.m:
            x[i, a] = 1
    return x


def swap_example_instance() -> Instance:
    """Budget-saturated state where only a swap helps.

    Six assigned agents on three tasks spend exactly the budget of 10; the
    unassigned agent (index 6) can only improve things by swapping with the
    agent at index 5 on task 2.
    """
    capabilities = [
        {0: 5.0},  # task 0
        {0: 4.0},
        {1: 3.0},  # task 1
        {1: 6.0},
        {3: 8.0},  # task 2
        {2: 3.0},
        {2: 6.0},  # unassigned
    ]
    costs = [{0: 2.0}, {0: 2.0}, {1: 1.0}, {1: 2.0}, {2: 1.0}, {2: 2.0}, {2: 1.0}]
    required = [(0,), (1,), (2, 3)]
    return Instance.build(budget=10.0, capabilities=capabilities, costs=costs, required=required, universe=4)


SWAP_BEFORE = (0, 0, 1, 1, 2, 2, 3)
SWAP_AFTER = (0, 0, 1, 1, 2, 3, 2)


@pytest.fixture
def swap_example():
    inst = swap_example_instance()
    return inst, Partition(SWAP_BEFORE, inst.m)


@st.composite
def instances(draw, max_agents=7, max_tasks=4, max_universe=5, integer_values=True):
    n = draw(st.integers(1, max_agents))
    m = draw(st.integers(1, max_tasks))
    W = draw(st.integers(1, max_universe))
    comp = st.integers(0, 10).map(float) if integer_values else st.floats(0, 10, allow_nan=False)
    cost = st.integers(1, 20).map(float) if integer_values else st.floats(0.5, 20, allow_nan=False)
    capabilities = [
        draw(st.dictionaries(st.integers(0, W - 1), comp, max_size=W)) for _ in range(n)
    ]
    costs = [draw(st.dictionaries(st.integers(0, m - 1), cost, max_size=m)) for _ in range(n)]
    required = [draw(st.sets(st.integers(0, W - 1), min_size=1, max_size=W)) for _ in range(m)]
    budget = float(draw(st.integers(0, 40)))
    return Instance.build(budget, capabilities, costs, required, universe=W)


@st.composite
def instance_and_partition(draw, **kw):
    inst = draw(instances(**kw))
    assignment = []
    for i in range(inst.n):
        opts = list(inst.feasible_sets[i]) + [inst.m]
        assignment.append(draw(st.sampled_from(opts)))
    p = Partition(tuple(assignment), inst.m)
    # drop agents (highest index first) until the budget holds
    for i in reversed(range(inst.n)):
        if is_budget_feasible(inst, p):
            break
        p = p.with_moves({i: inst.m})
    return inst, p
