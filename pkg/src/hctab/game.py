"""Coalition formation game over an :class:`~hctab.instance.Instance`.

Every agent belongs to exactly one coalition: a task coalition ``0..m-1`` or
the dummy coalition ``m`` holding the unassigned agents.  A coalition's value
is its task reward when the whole partition respects the budget and
:data:`INFEASIBLE` otherwise.  The potential (sum of coalition values) equals
the allocation objective, and every unilateral move changes an agent's
marginal-contribution utility by exactly the change in potential.

Two evaluation routes live here:

* module-level functions (``task_reward``, ``join_gain``, ...) compute
  everything from scratch in plain Python and serve as the reference;
* :class:`GameState` is a mutable, numpy-backed evaluator that caches
  per-coalition maxima and is what the learning algorithms run on.

Tests hold the two routes against each other.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .instance import Instance

__all__ = [
    "INFEASIBLE",
    "GAIN_EPS",
    "BUDGET_EPS",
    "Partition",
    "ActionKind",
    "Action",
    "IllegalActionError",
    "InfeasiblePartitionError",
    "task_reward",
    "total_cost",
    "is_budget_feasible",
    "coalition_value",
    "agent_utility",
    "potential",
    "join_gain",
    "exchange_gain",
    "apply_action",
    "is_nash_stable",
    "GameState",
]

# A move counts as an improvement only above this gain.  Competencies are
# integers by default so gains are exact; the margin absorbs summation-order
# noise with real-valued competencies.
GAIN_EPS = 1e-9
# Absolute slack on the budget comparison, for accumulated float costs.
BUDGET_EPS = 1e-9


class _Infeasible:
    """Value of a coalition in a budget-violating partition.

    Orders below every real number and refuses arithmetic.
    """

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "INFEASIBLE"

    def __reduce__(self):
        return (_Infeasible, ())

    def __eq__(self, other) -> bool:
        return other is self

    def __hash__(self) -> int:
        return hash("INFEASIBLE")

    def __lt__(self, other) -> bool:
        return other is not self

    def __le__(self, other) -> bool:
        return True

    def __gt__(self, other) -> bool:
        return False

    def __ge__(self, other) -> bool:
        return other is self


INFEASIBLE = _Infeasible()


class IllegalActionError(ValueError):
    pass


class InfeasiblePartitionError(ValueError):
    pass


@dataclass(frozen=True)
class Partition:
    """Coalition structure as an assignment vector.

    ``assignment[i]`` is agent ``i``'s coalition id; ``m`` is the dummy.
    """

    assignment: tuple[int, ...]
    m: int

    @classmethod
    def empty(cls, instance: Instance) -> "Partition":
        return cls((instance.m,) * instance.n, instance.m)

    @classmethod
    def from_assignment(cls, instance: Instance, assignment: Iterable[int]) -> "Partition":
        p = cls(tuple(int(a) for a in assignment), instance.m)
        p.check(instance)
        return p

    @property
    def dummy(self) -> int:
        return self.m

    @property
    def n(self) -> int:
        return len(self.assignment)

    def __getitem__(self, i: int) -> int:
        return self.assignment[i]

    def members(self, j: int) -> list[int]:
        return [i for i, a in enumerate(self.assignment) if a == j]

    def coalitions(self) -> list[list[int]]:
        """Member lists for coalitions ``0..m`` (dummy last)."""
        out: list[list[int]] = [[] for _ in range(self.m + 1)]
        for i, a in enumerate(self.assignment):
            out[a].append(i)
        return out

    def with_moves(self, moves: dict[int, int]) -> "Partition":
        a = list(self.assignment)
        for i, j in moves.items():
            a[i] = j
        return Partition(tuple(a), self.m)

    def check(self, instance: Instance) -> None:
        if self.m != instance.m or self.n != instance.n:
            raise ValueError("partition does not match instance dimensions")
        for i, a in enumerate(self.assignment):
            if a != self.m and a not in instance.costs[i]:
                raise ValueError(f"agent {i} assigned to infeasible coalition {a}")


class ActionKind(enum.Enum):
    STAY = "stay"
    JOIN = "join"
    EXCHANGE = "exchange"


@dataclass(frozen=True)
class Action:
    kind: ActionKind
    target: int | None = None
    partner: int | None = None

    @classmethod
    def stay(cls) -> "Action":
        return cls(ActionKind.STAY)

    @classmethod
    def join(cls, target: int) -> "Action":
        return cls(ActionKind.JOIN, target)

    @classmethod
    def exchange(cls, target: int, partner: int) -> "Action":
        return cls(ActionKind.EXCHANGE, target, partner)

    def __str__(self) -> str:
        if self.kind is ActionKind.STAY:
            return "Stay"
        if self.kind is ActionKind.JOIN:
            return f"Join({self.target})"
        return f"Exchange({self.target}, {self.partner})"


# ---------------------------------------------------------------------------
# from-scratch reference evaluation


def _reward_of(instance: Instance, members: Iterable[int], j: int) -> float:
    """Sum over required capabilities of the best member competency."""
    if j == instance.m:
        return 0.0
    members = list(members)
    total = 0.0
    for k in instance.required[j]:
        best = 0.0
        for i in members:
            h = instance.capabilities[i].get(k)
            if h is not None and h > best:
                best = h
        total += best
    return total


def task_reward(instance: Instance, partition: Partition, j: int) -> float:
    if not 0 <= j < instance.m:
        raise ValueError(f"task id {j} outside [0, {instance.m})")
    return _reward_of(instance, partition.members(j), j)


def total_cost(instance: Instance, partition: Partition) -> float:
    return math.fsum(instance.costs[i][a] for i, a in enumerate(partition.assignment) if a != instance.m)


def is_budget_feasible(instance: Instance, partition: Partition) -> bool:
    return total_cost(instance, partition) <= instance.budget + BUDGET_EPS


def coalition_value(instance: Instance, partition: Partition, j: int):
    """Reward of coalition ``j``, 0 for the dummy, INFEASIBLE over budget."""
    if not 0 <= j <= instance.m:
        raise ValueError(f"coalition id {j} outside [0, {instance.m}]")
    if j == instance.m:
        return 0.0
    if not is_budget_feasible(instance, partition):
        return INFEASIBLE
    return task_reward(instance, partition, j)


def agent_utility(instance: Instance, partition: Partition, i: int) -> float:
    """Marginal contribution of ``i`` to its own coalition."""
    j = partition[i]
    if j == instance.m:
        return 0.0
    if not is_budget_feasible(instance, partition):
        raise InfeasiblePartitionError("utility is undefined for a budget-violating partition")
    members = partition.members(j)
    rest = [a for a in members if a != i]
    return _reward_of(instance, members, j) - _reward_of(instance, rest, j)


def potential(instance: Instance, partition: Partition) -> float:
    if not is_budget_feasible(instance, partition):
        raise InfeasiblePartitionError(
            f"total cost {total_cost(instance, partition)} exceeds budget {instance.budget}"
        )
    groups = partition.coalitions()
    return math.fsum(_reward_of(instance, groups[j], j) for j in range(instance.m))


def _move_is_legal(instance: Instance, i: int, target: int) -> bool:
    return target == instance.m or target in instance.costs[i]


def join_gain(instance: Instance, partition: Partition, i: int, target: int):
    """Potential change when ``i`` moves alone to ``target``.

    Evaluated locally on the two coalitions involved.  INFEASIBLE when the
    move would break the budget.
    """
    src = partition[i]
    if target == src:
        raise IllegalActionError("target equals current coalition")
    if not _move_is_legal(instance, i, target):
        raise IllegalActionError(f"task {target} is not feasible for agent {i}")
    new_cost = total_cost(instance, partition) - instance.cost(i, src) + instance.cost(i, target)
    if new_cost > instance.budget + BUDGET_EPS:
        return INFEASIBLE
    groups = partition.coalitions()
    tgt = groups[target]
    srcm = groups[src]
    gain = _reward_of(instance, tgt + [i], target) - _reward_of(instance, tgt, target)
    gain += _reward_of(instance, [a for a in srcm if a != i], src) - _reward_of(instance, srcm, src)
    return gain


def exchange_gain(instance: Instance, partition: Partition, i: int, other: int):
    """Potential change when ``i`` and ``other`` swap coalitions."""
    a, b = partition[i], partition[other]
    if a == b:
        raise IllegalActionError("agents already share a coalition")
    if not _move_is_legal(instance, i, b) or not _move_is_legal(instance, other, a):
        raise IllegalActionError("swap lands an agent on an infeasible task")
    new_cost = (
        total_cost(instance, partition)
        - instance.cost(i, a)
        - instance.cost(other, b)
        + instance.cost(i, b)
        + instance.cost(other, a)
    )
    if new_cost > instance.budget + BUDGET_EPS:
        return INFEASIBLE
    groups = partition.coalitions()
    ca, cb = groups[a], groups[b]
    new_a = [x for x in ca if x != i] + [other]
    new_b = [x for x in cb if x != other] + [i]
    return (
        _reward_of(instance, new_a, a)
        - _reward_of(instance, ca, a)
        + _reward_of(instance, new_b, b)
        - _reward_of(instance, cb, b)
    )


def apply_action(partition: Partition, i: int, action: Action, instance: Instance | None = None) -> Partition:
    """Return the partition after ``i`` plays ``action``.

    Structural legality is always checked; task feasibility is checked when
    ``instance`` is given.
    """
    if action.kind is ActionKind.STAY:
        return partition
    if action.kind is ActionKind.JOIN:
        t = action.target
        if t is None or not 0 <= t <= partition.m:
            raise IllegalActionError(f"join target {t!r} out of range")
        if instance is not None and not _move_is_legal(instance, i, t):
            raise IllegalActionError(f"task {t} is not feasible for agent {i}")
        return partition.with_moves({i: t})
    p, t = action.partner, action.target
    if p is None or t is None or p == i:
        raise IllegalActionError("exchange needs a distinct partner and a target")
    if partition[p] != t:
        raise IllegalActionError(f"partner {p} is not in coalition {t}")
    src = partition[i]
    if src == t:
        raise IllegalActionError("exchange within one coalition")
    if instance is not None and not (_move_is_legal(instance, i, t) and _move_is_legal(instance, p, src)):
        raise IllegalActionError("swap lands an agent on an infeasible task")
    return partition.with_moves({i: t, p: src})


def is_nash_stable(instance: Instance, partition: Partition, with_exchange: bool = False) -> bool:
    """True when no budget-feasible move (or swap) strictly raises the potential.

    Evaluated from scratch, independently of :class:`GameState`.
    """
    if not is_budget_feasible(instance, partition):
        raise InfeasiblePartitionError("stability is only defined for feasible partitions")
    m = instance.m
    groups = partition.coalitions()
    reward = [_reward_of(instance, groups[j], j) for j in range(m)] + [0.0]
    slack = instance.budget - total_cost(instance, partition) + BUDGET_EPS

    def without(j: int, i: int) -> list[int]:
        return [a for a in groups[j] if a != i]

    for i, s in enumerate(partition.assignment):
        leave = _reward_of(instance, without(s, i), s) - reward[s]
        for t in list(instance.costs[i]) + [m]:
            if t == s or instance.cost(i, t) - instance.cost(i, s) > slack:
                continue
            if _reward_of(instance, groups[t] + [i], t) - reward[t] + leave > GAIN_EPS:
                return False
    if not with_exchange:
        return True
    for i, s in enumerate(partition.assignment):
        for p, t in enumerate(partition.assignment):
            if t <= s or not (_move_is_legal(instance, i, t) and _move_is_legal(instance, p, s)):
                continue
            dcost = instance.cost(i, t) + instance.cost(p, s) - instance.cost(i, s) - instance.cost(p, t)
            if dcost > slack:
                continue
            gain = (
                _reward_of(instance, without(t, p) + [i], t)
                - reward[t]
                + _reward_of(instance, without(s, i) + [p], s)
                - reward[s]
            )
            if gain > GAIN_EPS:
                return False
    return True


# ---------------------------------------------------------------------------
# incremental evaluator


class GameState:
    """Mutable partition with cached coalition maxima.

    For each task coalition the state keeps the per-capability maximum
    competency and its reward.  For each assigned agent it keeps the
    per-capability maximum of its coalition *without* that agent, so leave
    and swap gains need no recomputation.  Only the (at most two) coalitions
    touched by a move are refreshed.
    """

    def __init__(self, instance: Instance, partition: Partition | None = None):
        self.instance = instance
        self.n, self.m = instance.n, instance.m
        self.H = instance.competency_matrix
        self.R = instance.requirement_matrix
        self.C = instance.cost_matrix
        self.feasible = [np.asarray(f, dtype=np.intp) for f in instance.feasible_sets]
        W = instance.universe

        if partition is None:
            partition = Partition.empty(instance)
        partition.check(instance)
        self.assign = np.array(partition.assignment, dtype=np.intp)
        self.members: list[list[int]] = partition.coalitions()[: self.m]
        self.maxvec = np.zeros((self.m + 1, W))
        self.reward = np.zeros(self.m + 1)
        self.excl = np.zeros((self.n, W))
        self.excl_reward = np.zeros(self.n)
        for j in range(self.m):
            self._refresh(j)
        self.total_cost = total_cost(instance, partition)

    # -- bookkeeping -------------------------------------------------------

    def _refresh(self, j: int) -> None:
        if j == self.m:
            return
        mem = self.members[j]
        k = len(mem)
        if k == 0:
            self.maxvec[j] = 0.0
            self.reward[j] = 0.0
            return
        M = self.H[mem]
        top = M.max(axis=0)
        self.maxvec[j] = top
        self.reward[j] = float(self.R[j] @ top)
        if k == 1:
            self.excl[mem[0]] = 0.0
            self.excl_reward[mem[0]] = 0.0
            return
        second = np.sort(M, axis=0)[-2]
        winner = M.argmax(axis=0)
        ex = np.where(np.arange(k)[:, None] == winner[None, :], second, top)
        self.excl[mem] = ex
        self.excl_reward[mem] = ex @ self.R[j]

    def _move(self, i: int, t: int) -> None:
        s = int(self.assign[i])
        if s != self.m:
            self.members[s].remove(i)
        if t != self.m:
            self.members[t].append(i)
        self.assign[i] = t

    def _recompute_cost(self) -> None:
        self.total_cost = math.fsum(self.C[i, a] for i, a in enumerate(self.assign) if a != self.m)

    @property
    def slack(self) -> float:
        return self.instance.budget - self.total_cost

    def partition(self) -> Partition:
        return Partition(tuple(int(a) for a in self.assign), self.m)

    def potential(self) -> float:
        return float(self.reward[: self.m].sum())

    # -- option evaluation ---------------------------------------------------

    def join_options(self, i: int):
        """All unilateral moves of ``i``.

        Returns ``(targets, gains, budget_ok, cost_decrease)`` arrays over
        ``T_i ∪ {dummy}`` minus the current coalition.
        """
        s = int(self.assign[i])
        T = self.feasible[i]
        if s != self.m:
            T = T[T != s]
            leave = self.excl_reward[i] - self.reward[s]
            targets = np.append(T, self.m)
        else:
            leave = 0.0
            targets = T
        gains = (np.maximum(self.maxvec[targets], self.H[i]) * self.R[targets]).sum(axis=1)
        gains = gains - self.reward[targets] + leave
        dcost = self.C[i, s] - self.C[i, targets]
        ok = dcost >= -(self.slack + BUDGET_EPS)
        return targets, gains, ok, dcost

    def exchange_options(self, i: int):
        """All swaps of ``i`` into a task of ``T_i`` with a current member.

        Returns ``(targets, partners, gains, cost_decrease, budget_ok)``.
        Partners that cannot take ``i``'s coalition are excluded.
        """
        s = int(self.assign[i])
        partners = [p for t in self.feasible[i] if t != s for p in self.members[t]]
        if not partners:
            e = np.zeros(0, dtype=np.intp)
            return e, e, np.zeros(0), np.zeros(0), np.zeros(0, dtype=bool)
        P = np.asarray(partners, dtype=np.intp)
        if s != self.m:
            P = P[np.isfinite(self.C[P, s])]
        T = self.assign[P]
        new_t = (np.maximum(self.excl[P], self.H[i]) * self.R[T]).sum(axis=1)
        gains = new_t - self.reward[T]
        if s != self.m:
            new_s = (np.maximum(self.excl[i], self.H[P]) * self.R[s]).sum(axis=1)
            gains = gains + new_s - self.reward[s]
        dcost = (self.C[i, s] - self.C[i, T]) + (self.C[P, T] - self.C[P, s])
        ok = dcost >= -(self.slack + BUDGET_EPS)
        return T, P, gains, dcost, ok

    # -- mutation -------------------------------------------------------------

    def apply_join(self, i: int, t: int) -> tuple[int, ...]:
        """Move ``i`` to ``t``; returns the task coalitions whose value changed."""
        s = int(self.assign[i])
        self._move(i, t)
        self._refresh(s)
        self._refresh(t)
        self._recompute_cost()
        return tuple(j for j in (s, t) if j != self.m)

    def apply_exchange(self, i: int, p: int) -> tuple[int, ...]:
        s, t = int(self.assign[i]), int(self.assign[p])
        self._move(i, t)
        self._move(p, s)
        self._refresh(s)
        self._refresh(t)
        self._recompute_cost()
        return tuple(j for j in (s, t) if j != self.m)

    def apply(self, i: int, action: Action) -> tuple[int, ...]:
        if action.kind is ActionKind.JOIN:
            return self.apply_join(i, action.target)
        if action.kind is ActionKind.EXCHANGE:
            if int(self.assign[action.partner]) != action.target:
                raise IllegalActionError("partner is not in the target coalition")
            return self.apply_exchange(i, action.partner)
        return ()
