"""Log-linear learning with heterogeneous costs (LLH) and its two ablations.

A run starts with every agent unassigned and passes a single allocation token
from agent to agent.  The holder builds its candidate set:

1. every budget-feasible move to a coalition in ``T_i ∪ {dummy}`` that
   strictly raises the potential;
2. only if (1) is empty, and exchanges are enabled, every budget-feasible swap
   with a member of a task coalition in ``T_i`` that strictly raises the
   potential.

It then samples one candidate with probability proportional to
``exp(beta(t, dc) * gain)`` where ``beta`` grows logarithmically with the
handoff count and linearly with the cost decrease ``dc`` of that action.  The
run stops once every agent has held the token at the current state without a
candidate (a Nash-stable partition for the active action space) or after
``t_max`` handoffs.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .game import (
    GAIN_EPS,
    Action,
    ActionKind,
    GameState,
    Partition,
    potential,
    total_cost,
)
from .instance import Instance

__all__ = [
    "Variant",
    "Scheduler",
    "LearningParams",
    "Candidate",
    "StepRecord",
    "RunResult",
    "candidate_actions",
    "beta_schedule",
    "select_action",
    "llh_step",
    "run",
    "relay_run",
    "write_trace",
]


class Variant(enum.Enum):
    FULL = "full"
    NO_CE = "no_ce"
    NO_HLL = "no_hll"


class Scheduler(enum.Enum):
    RANDOM_RELAY = "random_relay"
    ROUND_ROBIN = "round_robin"


@dataclass(frozen=True)
class LearningParams:
    # beta0 weighs the cost decrease; smooth slows the log growth of beta.
    # Fast growth turns selection greedy, which lands in worse equilibria.
    beta0: float = 20.0
    lam: float = 1.0
    smooth: int = 1000
    # None means 500 handoffs per agent.
    t_max: int | None = None
    variant: Variant = Variant.FULL
    scheduler: Scheduler = Scheduler.RANDOM_RELAY
    seed: int = 0

    def __post_init__(self) -> None:
        if self.beta0 < 0:
            raise ValueError("beta0 must be >= 0")
        if self.lam < 1:
            raise ValueError("lambda must be >= 1")
        if not (isinstance(self.smooth, int) and self.smooth >= 1):
            raise ValueError("smooth must be a positive integer")
        if self.t_max is not None and self.t_max < 1:
            raise ValueError("t_max must be positive")

    def handoff_limit(self, n: int) -> int:
        return self.t_max if self.t_max is not None else 500 * n


@dataclass(frozen=True)
class Candidate:
    action: Action
    gain: float
    cost_decrease: float


@dataclass(frozen=True)
class StepRecord:
    t: int
    agent: int
    action: Action
    gain: float
    phi_after: float


@dataclass
class RunResult:
    algorithm: str
    final_partition: Partition
    objective: float
    iterations: int
    converged: bool
    cu_rate: float
    wall_time: float
    objective_trace: list[tuple[int, float]]
    seed: int
    total_cost: float = 0.0
    steps: list[StepRecord] = field(default_factory=list, repr=False)

    @property
    def acted_steps(self) -> int:
        return len(self.steps)


# ---------------------------------------------------------------------------
# candidate construction


def _state_candidates(state: GameState, i: int, allow_exchange: bool):
    """Improving, budget-feasible options of ``i`` as parallel arrays.

    Returns ``(kind, targets, partners, gains, cost_decrease)`` where
    ``kind`` is ``"join"`` or ``"exchange"``, or ``None`` when empty.
    """
    targets, gains, ok, dcost = state.join_options(i)
    keep = ok & (gains > GAIN_EPS)
    if keep.any():
        return "join", targets[keep], None, gains[keep], dcost[keep]
    if not allow_exchange:
        return None
    targets, partners, gains, dcost, ok = state.exchange_options(i)
    keep = ok & (gains > GAIN_EPS)
    if keep.any():
        return "exchange", targets[keep], partners[keep], gains[keep], dcost[keep]
    return None


def _as_candidates(found) -> list[Candidate]:
    if found is None:
        return []
    kind, targets, partners, gains, dcost = found
    out = []
    for idx in range(len(targets)):
        if kind == "join":
            action = Action.join(int(targets[idx]))
        else:
            action = Action.exchange(int(targets[idx]), int(partners[idx]))
        out.append(Candidate(action, float(gains[idx]), float(dcost[idx])))
    return out


def candidate_actions(instance: Instance, partition: Partition, i: int, variant: Variant = Variant.FULL) -> list[Candidate]:
    """Candidate set of agent ``i`` under the coalition selection rule (+ exchanges)."""
    state = GameState(instance, partition)
    return _as_candidates(_state_candidates(state, i, variant is not Variant.NO_CE))


# ---------------------------------------------------------------------------
# action selection


def max_cost_decrease(instance: Instance) -> float:
    lo, hi = instance.cost_bounds
    return hi - lo


def beta_schedule(params: LearningParams, t: int, dc, dc_max: float):
    """Inverse temperature for an action with cost decrease ``dc`` at handoff ``t``.

    ``dc`` may be an array.  With ``dc_max <= 0`` (all costs equal) the cost
    term vanishes.
    """
    growth = math.log(params.lam * t + 1.0) / params.smooth
    dc = np.asarray(dc, dtype=float)
    beta = (params.beta0 * dc / dc_max if dc_max > 0 else np.zeros_like(dc)) + growth
    return float(beta) if beta.ndim == 0 else beta


def _log_linear_index(gains: np.ndarray, dcost: np.ndarray, params: LearningParams, t: int, dc_max: float, rng) -> int:
    dc = np.clip(dcost, 0.0, dc_max) if dc_max > 0 else np.zeros_like(dcost)
    beta = beta_schedule(params, t, dc, dc_max)
    logits = beta * gains
    w = np.exp(logits - logits.max())
    cdf = np.cumsum(w)
    u = rng.random() * cdf[-1]
    return min(int(np.searchsorted(cdf, u, side="right")), len(w) - 1)


def _choose(gains, dcost, params: LearningParams, t: int, dc_max: float, rng) -> int:
    if len(gains) == 1:
        return 0
    if params.variant is Variant.NO_HLL:
        return int(rng.integers(len(gains)))
    return _log_linear_index(gains, dcost, params, t, dc_max, rng)


def select_action(
    candidates: Sequence[Candidate],
    params: LearningParams,
    t: int,
    rng: np.random.Generator,
    dc_max: float = 1.0,
) -> Action:
    """Sample one candidate: log-linear for FULL / NO_CE, uniform for NO_HLL."""
    if not candidates:
        raise ValueError("no candidates to select from")
    gains = np.array([c.gain for c in candidates])
    dcost = np.array([c.cost_decrease for c in candidates])
    return candidates[_choose(gains, dcost, params, t, dc_max, rng)].action


def llh_step(
    instance: Instance,
    partition: Partition,
    i: int,
    t: int,
    params: LearningParams,
    rng: np.random.Generator,
) -> tuple[Partition, bool]:
    """One decision of agent ``i`` holding the token at handoff ``t``."""
    state = GameState(instance, partition)
    found = _state_candidates(state, i, params.variant is not Variant.NO_CE)
    if found is None:
        return partition, False
    kind, targets, partners, gains, dcost = found
    idx = _choose(gains, dcost, params, t, max_cost_decrease(instance), rng)
    if kind == "join":
        state.apply_join(i, int(targets[idx]))
    else:
        state.apply_exchange(i, int(partners[idx]))
    return state.partition(), True


# ---------------------------------------------------------------------------
# relay execution

# A decision rule receives (state, holder, t, rng) and either returns None
# (holder has nothing to do: quiet) or a tuple (acted, action, gain).  A holder
# that has options but keeps its action (BRP) returns (False, None, 0.0).
DecisionRule = Callable[[GameState, int, int, np.random.Generator], "tuple[bool, Action | None, float] | None"]


def relay_run(
    instance: Instance,
    decide: DecisionRule,
    t_max: int,
    scheduler: Scheduler,
    seed: int,
    algorithm: str,
) -> RunResult:
    """Token-passing loop shared by LLH and the game-theoretic baselines.

    Convergence is declared once every agent has been found quiet at the
    current state.  A quiet agent stays quiet after a move unless the move
    freed budget or touched a task coalition the agent can reach, so only
    those agents are re-examined; the trajectory is the same as re-examining
    everyone.
    """
    rng = np.random.default_rng(seed)
    n = instance.n
    state = GameState(instance)
    # agents whose options depend on task j: those with j in their feasible set
    interested: list[list[int]] = [[] for _ in range(instance.m)]
    for i, tasks in enumerate(instance.feasible_sets):
        for j in tasks:
            interested[j].append(i)

    order = None
    if scheduler is Scheduler.ROUND_ROBIN:
        order = rng.permutation(n)

    quiet = np.zeros(n, dtype=bool)
    n_quiet = 0
    phi = 0.0
    trace: list[tuple[int, float]] = [(0, phi)]
    steps: list[StepRecord] = []
    converged = False
    t = 0

    start = time.perf_counter()
    while t < t_max:
        if order is not None:
            i = int(order[t % n])
        else:
            i = int(rng.integers(n))
        if not quiet[i]:
            outcome = decide(state, i, t, rng)
            if outcome is None:
                quiet[i] = True
                n_quiet += 1
            elif outcome[0]:
                _, action, gain = outcome
                cost_before = state.total_cost
                movers = (i,) if action.kind is ActionKind.JOIN else (i, action.partner)
                touched = state.apply(i, action)
                if state.total_cost < cost_before:
                    quiet[:] = False
                    n_quiet = 0
                else:
                    for j in touched:
                        for a in interested[j]:
                            if quiet[a]:
                                quiet[a] = False
                                n_quiet -= 1
                    for a in movers:
                        if quiet[a]:
                            quiet[a] = False
                            n_quiet -= 1
                phi = state.potential()
                trace.append((t + 1, phi))
                steps.append(StepRecord(t, i, action, float(gain), phi))
        t += 1
        if n_quiet == n:
            converged = True
            break
    wall = time.perf_counter() - start

    final = state.partition()
    cost = total_cost(instance, final)
    return RunResult(
        algorithm=algorithm,
        final_partition=final,
        objective=potential(instance, final),
        iterations=t,
        converged=converged,
        cu_rate=cost / instance.budget if instance.budget > 0 else 0.0,
        wall_time=wall,
        objective_trace=trace,
        seed=seed,
        total_cost=cost,
        steps=steps,
    )


_VARIANT_NAMES = {Variant.FULL: "LLH", Variant.NO_CE: "LLH_NCE", Variant.NO_HLL: "LLH_NHL"}


def run(instance: Instance, params: LearningParams = LearningParams()) -> RunResult:
    """Run LLH (or an ablation) from the all-unassigned partition."""
    allow_exchange = params.variant is not Variant.NO_CE
    dc_max = max_cost_decrease(instance)

    def decide(state: GameState, i: int, t: int, rng):
        found = _state_candidates(state, i, allow_exchange)
        if found is None:
            return None
        kind, targets, partners, gains, dcost = found
        idx = _choose(gains, dcost, params, t, dc_max, rng)
        if kind == "join":
            action = Action.join(int(targets[idx]))
        else:
            action = Action.exchange(int(targets[idx]), int(partners[idx]))
        return True, action, gains[idx]

    return relay_run(
        instance,
        decide,
        params.handoff_limit(instance.n),
        params.scheduler,
        params.seed,
        _VARIANT_NAMES[params.variant],
    )


def write_trace(result: RunResult, path) -> None:
    """One line per acted step: ``t,agent,action_kind,target,partner,gain,phi_after``."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,agent,action_kind,target,partner,gain,phi_after\n")
        for s in result.steps:
            partner = "" if s.action.partner is None else s.action.partner
            fh.write(f"{s.t},{s.agent},{s.action.kind.value},{s.action.target},{partner},{s.gain!r},{s.phi_after!r}\n")
