"""Comparison algorithms: cost-efficiency greedy (CF), better reply (BRP), best response (BRA).

BRP and BRA run on the same token-passing loop as LLH but only ever consider
unilateral moves; CF is a centralised one-shot greedy.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .game import BUDGET_EPS, GAIN_EPS, Action, GameState, potential, total_cost
from .instance import Instance
from .learning import RunResult, Scheduler, StepRecord, relay_run

__all__ = ["BaselineParams", "run_cf", "run_brp", "run_bra"]


@dataclass(frozen=True)
class BaselineParams:
    chi: float = 0.3
    t_max: int | None = None
    seed: int = 0
    scheduler: Scheduler = Scheduler.RANDOM_RELAY

    def __post_init__(self) -> None:
        if not 0 <= self.chi < 1:
            raise ValueError("chi must lie in [0, 1)")
        if self.t_max is not None and self.t_max < 1:
            raise ValueError("t_max must be positive")

    def handoff_limit(self, n: int) -> int:
        return self.t_max if self.t_max is not None else 500 * n


def _improving_joins(state: GameState, i: int):
    targets, gains, ok, _ = state.join_options(i)
    keep = ok & (gains > GAIN_EPS)
    return targets[keep], gains[keep]


def run_cf(instance: Instance, params: BaselineParams = BaselineParams()) -> RunResult:
    """Greedy on marginal gain over the agent's average feasible cost.

    Each round assigns the unassigned (agent, task) pair with the largest
    positive factor whose true cost still fits the budget.  Assigned agents
    are never moved again.  Ties go to the lowest agent id, then task id.
    """
    start = time.perf_counter()
    state = GameState(instance)
    n, m = instance.n, instance.m
    avg_cost = np.array([np.mean(list(c.values())) if c else np.inf for c in instance.costs])
    pairs_i = np.array([i for i in range(n) for _ in instance.feasible_sets[i]], dtype=np.intp)
    pairs_j = np.array([j for i in range(n) for j in instance.feasible_sets[i]], dtype=np.intp)
    pair_cost = instance.cost_matrix[pairs_i, pairs_j] if len(pairs_i) else np.zeros(0)
    H, R = state.H, state.R

    trace = [(0, 0.0)]
    steps: list[StepRecord] = []
    rounds = 0
    while len(pairs_i):
        live = (state.assign[pairs_i] == m) & (pair_cost <= state.slack + BUDGET_EPS)
        if not live.any():
            break
        pi, pj = pairs_i[live], pairs_j[live]
        gains = (np.maximum(state.maxvec[pj], H[pi]) * R[pj]).sum(axis=1) - state.reward[pj]
        factor = np.where(gains > GAIN_EPS, gains / avg_cost[pi], -np.inf)
        best = int(np.argmax(factor))
        if not np.isfinite(factor[best]):
            break
        i, j = int(pi[best]), int(pj[best])
        state.apply_join(i, j)
        phi = state.potential()
        trace.append((rounds + 1, phi))
        steps.append(StepRecord(rounds, i, Action.join(j), float(gains[best]), phi))
        rounds += 1
    wall = time.perf_counter() - start

    final = state.partition()
    cost = total_cost(instance, final)
    return RunResult(
        algorithm="CF",
        final_partition=final,
        objective=potential(instance, final),
        iterations=rounds,
        converged=True,
        cu_rate=cost / instance.budget if instance.budget > 0 else 0.0,
        wall_time=wall,
        objective_trace=trace,
        seed=params.seed,
        total_cost=cost,
        steps=steps,
    )


def run_brp(instance: Instance, params: BaselineParams = BaselineParams()) -> RunResult:
    """Better reply: keep the current action with probability chi, else a uniform improving move."""

    def decide(state: GameState, i: int, t: int, rng):
        targets, gains = _improving_joins(state, i)
        if len(targets) == 0:
            return None
        if params.chi > 0 and rng.random() < params.chi:
            return False, None, 0.0
        k = int(rng.integers(len(targets))) if len(targets) > 1 else 0
        return True, Action.join(int(targets[k])), gains[k]

    return relay_run(instance, decide, params.handoff_limit(instance.n), params.scheduler, params.seed, "BRP")


def run_bra(instance: Instance, params: BaselineParams = BaselineParams()) -> RunResult:
    """Best response: the holder takes its largest-gain move (lowest task id on ties)."""

    def decide(state: GameState, i: int, t: int, rng):
        targets, gains = _improving_joins(state, i)
        if len(targets) == 0:
            return None
        # targets are ascending with the dummy last, so argmax breaks ties low
        k = int(np.argmax(gains))
        return True, Action.join(int(targets[k])), gains[k]

    return relay_run(instance, decide, params.handoff_limit(instance.n), params.scheduler, params.seed, "BRA")
