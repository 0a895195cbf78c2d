"""Ground truth for small instances.

``brute_force_optimum`` enumerates every feasible assignment by depth-first
search with budget pruning.  ``check_potential_identity`` fuzzes random
unilateral moves and compares the mover's utility change with the potential
change, both evaluated from scratch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .game import (
    BUDGET_EPS,
    GAIN_EPS,
    Partition,
    agent_utility,
    is_budget_feasible,
    potential,
    total_cost,
)
from .instance import Instance

__all__ = [
    "DEFAULT_STATE_CAP",
    "InstanceTooLargeError",
    "OracleResult",
    "IdentityReport",
    "brute_force_optimum",
    "check_potential_identity",
    "random_feasible_partition",
]

DEFAULT_STATE_CAP = 10**7


class InstanceTooLargeError(ValueError):
    pass


@dataclass(frozen=True)
class OracleResult:
    best_partition: Partition
    best_value: float
    states_enumerated: int


@dataclass(frozen=True)
class IdentityReport:
    max_abs_error: float
    trials_run: int


def brute_force_optimum(instance: Instance, cap: int = DEFAULT_STATE_CAP) -> OracleResult:
    """Exact maximiser of the allocation objective.

    Among optimal assignments the lexicographically smallest vector wins
    (options are explored in ascending id order, dummy last).
    """
    space = math.prod(len(f) + 1 for f in instance.feasible_sets)
    if space > cap:
        raise InstanceTooLargeError(f"{space} assignments exceed the enumeration cap {cap}")

    n, m = instance.n, instance.m
    options = [list(instance.feasible_sets[i]) + [m] for i in range(n)]
    caps = instance.capabilities
    required = instance.required
    budget = instance.budget + BUDGET_EPS
    # running per-task maximum competency, keyed by capability
    best_by_task: list[dict[int, float]] = [{k: 0.0 for k in required[j]} for j in range(m)]

    assignment = [m] * n
    best_value = -1.0
    best_assignment: tuple[int, ...] = tuple(assignment)
    leaves = 0

    def descend(i: int, cost: float, value: float) -> None:
        nonlocal best_value, best_assignment, leaves
        if i == n:
            leaves += 1
            if value > best_value + GAIN_EPS:
                best_value = value
                best_assignment = tuple(assignment)
            return
        for j in options[i]:
            if j == m:
                assignment[i] = m
                descend(i + 1, cost, value)
                continue
            c = cost + instance.costs[i][j]
            if c > budget:
                continue
            table = best_by_task[j]
            undo = []
            gain = 0.0
            for k, h in caps[i].items():
                old = table.get(k)
                if old is not None and h > old:
                    undo.append((k, old))
                    table[k] = h
                    gain += h - old
            assignment[i] = j
            descend(i + 1, c, value + gain)
            for k, old in undo:
                table[k] = old
        assignment[i] = m

    descend(0, 0.0, 0.0)
    partition = Partition(best_assignment, m)
    return OracleResult(partition, potential(instance, partition), leaves)


def random_feasible_partition(instance: Instance, rng: np.random.Generator) -> Partition:
    """Uniform random assignment, then random agents unassigned until it fits the budget."""
    m = instance.m
    assignment = []
    for i in range(instance.n):
        opts = instance.feasible_sets[i] + (m,)
        assignment.append(int(opts[rng.integers(len(opts))]))
    p = Partition(tuple(assignment), m)
    while not is_budget_feasible(instance, p):
        assigned = [i for i, a in enumerate(p.assignment) if a != m]
        p = p.with_moves({int(assigned[rng.integers(len(assigned))]): m})
    return p


def _legal_moves(instance: Instance, partition: Partition, i: int) -> list[int]:
    s = partition[i]
    slack = instance.budget - total_cost(instance, partition) + BUDGET_EPS
    out = []
    for t in instance.feasible_sets[i] + (instance.m,):
        if t != s and instance.cost(i, t) - instance.cost(i, s) <= slack:
            out.append(t)
    return out


def check_potential_identity(instance: Instance, trials: int, rng: np.random.Generator | int | None = None) -> IdentityReport:
    """Largest ``|Δu_i − Δφ|`` over ``trials`` random feasible unilateral moves."""
    rng = np.random.default_rng(rng)
    worst = 0.0
    done = 0
    attempts = 0
    while done < trials and attempts < 20 * trials + 100:
        attempts += 1
        before = random_feasible_partition(instance, rng)
        movers = [(i, mv) for i in range(instance.n) if (mv := _legal_moves(instance, before, i))]
        if not movers:
            continue
        i, moves = movers[rng.integers(len(movers))]
        after = before.with_moves({i: moves[rng.integers(len(moves))]})
        du = agent_utility(instance, after, i) - agent_utility(instance, before, i)
        dphi = potential(instance, after) - potential(instance, before)
        worst = max(worst, abs(du - dphi))
        done += 1
    return IdentityReport(worst, done)
