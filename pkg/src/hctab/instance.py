"""Problem data for budget-constrained task allocation with heterogeneous costs.

An :class:`Instance` holds ``n`` agents, ``m`` tasks and a capability universe
of size ``universe``.  Agents, tasks and capabilities are all indexed from 0.
Each agent owns a competency level for a subset of capabilities and a cost for
every task it can perform (its feasible set).  Each task requires a nonempty
subset of capabilities.  A single global budget bounds the summed cost of the
assigned agents.

The module also provides the random scenario generator used in the
experiments, two scenario metrics (budget rate and heterogeneity degree) and a
line-oriented JSON file format.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

__all__ = [
    "Instance",
    "InstanceError",
    "GeneratorConfig",
    "generate_instance",
    "heterogeneity_degree",
    "budget_rate",
    "serialize_instance",
    "parse_instance",
    "load_instance",
    "save_instance",
]


class InstanceError(ValueError):
    """Raised for malformed instances, configs or instance files."""


@dataclass(frozen=True, eq=True)
class Instance:
    """Immutable problem instance.

    ``capabilities[i]`` maps capability id to competency for agent ``i``;
    ``costs[i]`` maps task id to cost for every task in agent ``i``'s feasible
    set; ``required[j]`` is the sorted tuple of capability ids task ``j`` needs.
    """

    n: int
    m: int
    universe: int
    budget: float
    capabilities: tuple[Mapping[int, float], ...]
    costs: tuple[Mapping[int, float], ...]
    required: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        self.validate()

    @classmethod
    def build(
        cls,
        budget: float,
        capabilities: Sequence[Mapping[int, float]],
        costs: Sequence[Mapping[int, float]],
        required: Sequence[Sequence[int]],
        universe: int | None = None,
    ) -> "Instance":
        """Convenience constructor that infers ``n``, ``m`` and ``universe``."""
        caps = tuple({int(k): float(h) for k, h in sorted(c.items())} for c in capabilities)
        cst = tuple({int(j): float(c) for j, c in sorted(c.items())} for c in costs)
        req = tuple(tuple(sorted(int(k) for k in r)) for r in required)
        if universe is None:
            seen = [k for c in caps for k in c] + [k for r in req for k in r]
            universe = max(seen) + 1 if seen else 1
        return cls(
            n=len(caps),
            m=len(req),
            universe=universe,
            budget=float(budget),
            capabilities=caps,
            costs=cst,
            required=req,
        )

    def validate(self) -> None:
        if self.n < 1 or self.m < 1 or self.universe < 1:
            raise InstanceError("n, m and universe must be positive")
        if len(self.capabilities) != self.n or len(self.costs) != self.n:
            raise InstanceError("per-agent records do not match n")
        if len(self.required) != self.m:
            raise InstanceError("per-task records do not match m")
        if not (self.budget >= 0 and math.isfinite(self.budget)):
            raise InstanceError(f"budget must be finite and >= 0, got {self.budget!r}")
        for i, caps in enumerate(self.capabilities):
            for k, h in caps.items():
                if not 0 <= k < self.universe:
                    raise InstanceError(f"agents[{i}].capabilities: id {k} outside [0, {self.universe})")
                if not (h >= 0 and math.isfinite(h)):
                    raise InstanceError(f"agents[{i}].capabilities[{k}]: competency {h!r} must be >= 0")
        for i, cst in enumerate(self.costs):
            for j, c in cst.items():
                if not 0 <= j < self.m:
                    raise InstanceError(f"agents[{i}].feasible: task id {j} outside [0, {self.m})")
                if not (c > 0 and math.isfinite(c)):
                    raise InstanceError(f"agents[{i}].feasible[{j}]: cost {c!r} must be > 0")
        for j, req in enumerate(self.required):
            if not req:
                raise InstanceError(f"tasks[{j}].required is empty")
            if len(set(req)) != len(req):
                raise InstanceError(f"tasks[{j}].required has duplicates")
            for k in req:
                if not 0 <= k < self.universe:
                    raise InstanceError(f"tasks[{j}].required: id {k} outside [0, {self.universe})")

    @property
    def dummy(self) -> int:
        """Coalition id of the unassigned agents."""
        return self.m

    def feasible(self, i: int) -> tuple[int, ...]:
        return self.feasible_sets[i]

    def cost(self, i: int, j: int) -> float:
        """Cost of agent ``i`` on coalition ``j``; the dummy coalition is free."""
        if j == self.m:
            return 0.0
        return self.costs[i][j]

    @cached_property
    def feasible_sets(self) -> tuple[tuple[int, ...], ...]:
        return tuple(tuple(sorted(c)) for c in self.costs)

    @cached_property
    def competency_matrix(self) -> np.ndarray:
        """``n x universe`` array; capabilities an agent lacks are 0."""
        H = np.zeros((self.n, self.universe))
        for i, caps in enumerate(self.capabilities):
            for k, h in caps.items():
                H[i, k] = h
        H.setflags(write=False)
        return H

    @cached_property
    def requirement_matrix(self) -> np.ndarray:
        """``(m + 1) x universe`` 0/1 array; the dummy row is all zero."""
        R = np.zeros((self.m + 1, self.universe))
        for j, req in enumerate(self.required):
            R[j, list(req)] = 1.0
        R.setflags(write=False)
        return R

    @cached_property
    def cost_matrix(self) -> np.ndarray:
        """``n x (m + 1)`` array; infeasible pairs are ``inf``, dummy column 0."""
        C = np.full((self.n, self.m + 1), np.inf)
        C[:, self.m] = 0.0
        for i, cst in enumerate(self.costs):
            for j, c in cst.items():
                C[i, j] = c
        C.setflags(write=False)
        return C

    @cached_property
    def cost_bounds(self) -> tuple[float, float]:
        vals = [c for cst in self.costs for c in cst.values()]
        if not vals:
            return (0.0, 0.0)
        return (min(vals), max(vals))


# ---------------------------------------------------------------------------
# generation


@dataclass(frozen=True)
class GeneratorConfig:
    """Parameters of the random scenario generator.

    Integer ranges are inclusive.  ``cost_range`` is sampled as a continuous
    uniform; a zero-width range yields constant costs.
    """

    task_count: int
    agents_per_task_ratio: int = 3
    feasible_fraction_range: tuple[float, float] = (0.1, 0.2)
    capabilities_per_agent_range: tuple[int, int] = (1, 10)
    capabilities_per_task_range: tuple[int, int] = (5, 10)
    competency_range: tuple[int, int] = (1, 10)
    cost_range: tuple[float, float] = (1.0, 20.0)
    budget_rate: float = 5.0
    capability_universe_size: int = 10
    seed: int = 0

    def feasible_count_bounds(self) -> tuple[int, int]:
        lo_f, hi_f = self.feasible_fraction_range
        m = self.task_count
        return math.floor(lo_f * m), min(m, math.ceil(hi_f * m))

    def validate(self) -> None:
        if self.task_count < 1:
            raise InstanceError("task_count must be positive")
        if self.agents_per_task_ratio < 1:
            raise InstanceError("agents_per_task_ratio must be positive")
        for name in (
            "feasible_fraction_range",
            "capabilities_per_agent_range",
            "capabilities_per_task_range",
            "competency_range",
            "cost_range",
        ):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise InstanceError(f"{name} is empty: {lo} > {hi}")
        if self.capabilities_per_task_range[1] > self.capability_universe_size:
            raise InstanceError("capabilities_per_task upper bound exceeds universe size")
        if self.capabilities_per_agent_range[1] > self.capability_universe_size:
            raise InstanceError("capabilities_per_agent upper bound exceeds universe size")
        if self.capabilities_per_task_range[0] < 1 or self.capabilities_per_agent_range[0] < 1:
            raise InstanceError("capability count ranges must start at 1 or more")
        if self.competency_range[0] < 0:
            raise InstanceError("competencies must be nonnegative")
        if self.cost_range[0] <= 0:
            raise InstanceError("costs must be strictly positive")
        if not self.budget_rate > 0:
            raise InstanceError("budget_rate must be positive")
        lo, _ = self.feasible_count_bounds()
        if lo < 1:
            raise InstanceError(
                f"degenerate config: floor({self.feasible_fraction_range[0]} * {self.task_count}) < 1, "
                "agents would have no feasible task"
            )


def generate_instance(cfg: GeneratorConfig) -> Instance:
    """Draw a random instance; a pure function of ``cfg`` (seed included)."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    m = cfg.task_count
    n = cfg.agents_per_task_ratio * m
    W = cfg.capability_universe_size

    required = []
    for _ in range(m):
        cnt = int(rng.integers(cfg.capabilities_per_task_range[0], cfg.capabilities_per_task_range[1] + 1))
        required.append(tuple(sorted(int(k) for k in rng.choice(W, size=cnt, replace=False))))

    f_lo, f_hi = cfg.feasible_count_bounds()
    c_lo, c_hi = cfg.cost_range
    h_lo, h_hi = cfg.competency_range
    capabilities, costs = [], []
    for _ in range(n):
        cnt = int(rng.integers(cfg.capabilities_per_agent_range[0], cfg.capabilities_per_agent_range[1] + 1))
        ks = sorted(int(k) for k in rng.choice(W, size=cnt, replace=False))
        hs = rng.integers(h_lo, h_hi + 1, size=cnt)
        capabilities.append({k: float(h) for k, h in zip(ks, hs)})

        cnt = int(rng.integers(f_lo, f_hi + 1))
        js = sorted(int(j) for j in rng.choice(m, size=cnt, replace=False))
        if c_lo == c_hi:
            cs = np.full(cnt, float(c_lo))
        else:
            cs = rng.uniform(c_lo, c_hi, size=cnt)
        costs.append({j: float(c) for j, c in zip(js, cs)})

    return Instance(
        n=n,
        m=m,
        universe=W,
        budget=float(cfg.budget_rate * m),
        capabilities=tuple(capabilities),
        costs=tuple(costs),
        required=tuple(required),
    )


def heterogeneity_degree(min_cost: float, max_cost: float, global_max_cost: float) -> float:
    """Spread of a cost interval relative to the largest cost of all scenarios."""
    if not (0 < min_cost <= max_cost <= global_max_cost):
        raise InstanceError(
            f"need 0 < min_cost <= max_cost <= global_max_cost, got {min_cost}, {max_cost}, {global_max_cost}"
        )
    return (max_cost - min_cost) / global_max_cost


def budget_rate(instance: Instance) -> float:
    return instance.budget / instance.m


# ---------------------------------------------------------------------------
# file format
#
# Valid JSON, laid out one record per line so diffs stay readable and errors
# can be pinned to a line.  Field order is fixed, floats use repr (exact
# round trip).


def serialize_instance(instance: Instance) -> str:
    lines = [
        "{",
        f'"n": {instance.n},',
        f'"m": {instance.m},',
        f'"universe": {instance.universe},',
        f'"budget": {json.dumps(instance.budget)},',
        '"agents": [',
    ]
    for i in range(instance.n):
        rec = {
            "id": i,
            "capabilities": [[k, h] for k, h in sorted(instance.capabilities[i].items())],
            "feasible": [[j, c] for j, c in sorted(instance.costs[i].items())],
        }
        lines.append(json.dumps(rec) + ("," if i < instance.n - 1 else ""))
    lines.append("],")
    lines.append('"tasks": [')
    for j in range(instance.m):
        rec = {"id": j, "required": list(instance.required[j])}
        lines.append(json.dumps(rec) + ("," if j < instance.m - 1 else ""))
    lines.append("]")
    lines.append("}")
    return "\n".join(lines) + "\n"


def _field(obj: dict, key: str, where: str):
    if key not in obj:
        raise InstanceError(f"{where}: missing field '{key}'")
    return obj[key]


def _record_line(text: str, section: str, index: int) -> int | None:
    """Line of the ``index``-th record in ``section`` for canonical files."""
    lines = text.splitlines()
    for ln, line in enumerate(lines, start=1):
        if line.strip().startswith(f'"{section}"'):
            target = ln + 1 + index
            return target if target <= len(lines) else None
    return None


def parse_instance(text: str) -> Instance:
    """Parse the instance file format; errors name the offending field and line."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"line {exc.lineno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise InstanceError("line 1: top level must be an object")

    n = _field(doc, "n", "top level")
    m = _field(doc, "m", "top level")
    universe = _field(doc, "universe", "top level")
    budget = _field(doc, "budget", "top level")
    agents = _field(doc, "agents", "top level")
    tasks = _field(doc, "tasks", "top level")
    for name, val in (("n", n), ("m", m), ("universe", universe)):
        if not isinstance(val, int) or isinstance(val, bool):
            raise InstanceError(f"field '{name}': expected integer, got {val!r}")
    if not isinstance(budget, (int, float)) or isinstance(budget, bool):
        raise InstanceError(f"field 'budget': expected number, got {budget!r}")
    if len(agents) != n:
        raise InstanceError(f"field 'agents': {len(agents)} records but n = {n}")
    if len(tasks) != m:
        raise InstanceError(f"field 'tasks': {len(tasks)} records but m = {m}")

    capabilities: list[dict[int, float]] = [{} for _ in range(n)]
    costs: list[dict[int, float]] = [{} for _ in range(n)]
    required: list[tuple[int, ...]] = [() for _ in range(m)]

    def fail(section: str, index: int, msg: str) -> InstanceError:
        ln = _record_line(text, section, index)
        prefix = f"line {ln}: " if ln is not None else ""
        return InstanceError(f"{prefix}{section}[{index}]: {msg}")

    seen = set()
    for pos, rec in enumerate(agents):
        try:
            i = _field(rec, "id", f"agents[{pos}]")
            if not isinstance(i, int) or not 0 <= i < n or i in seen:
                raise InstanceError(f"bad or duplicate agent id {i!r}")
            seen.add(i)
            caps = {}
            for k, h in _field(rec, "capabilities", f"agents[{pos}]"):
                if not (isinstance(k, int) and 0 <= k < universe):
                    raise InstanceError(f"capability id {k!r} outside [0, {universe})")
                if not h >= 0:
                    raise InstanceError(f"competency {h!r} for capability {k} must be >= 0")
                caps[k] = float(h)
            cst = {}
            for j, c in _field(rec, "feasible", f"agents[{pos}]"):
                if not (isinstance(j, int) and 0 <= j < m):
                    raise InstanceError(f"task id {j!r} outside [0, {m})")
                if not c > 0:
                    raise InstanceError(f"cost {c!r} for task {j} must be > 0")
                cst[j] = float(c)
        except (InstanceError, TypeError, ValueError) as exc:
            raise fail("agents", pos, str(exc)) from None
        capabilities[i] = caps
        costs[i] = cst

    seen = set()
    for pos, rec in enumerate(tasks):
        try:
            j = _field(rec, "id", f"tasks[{pos}]")
            if not isinstance(j, int) or not 0 <= j < m or j in seen:
                raise InstanceError(f"bad or duplicate task id {j!r}")
            seen.add(j)
            req = _field(rec, "required", f"tasks[{pos}]")
            for k in req:
                if not (isinstance(k, int) and 0 <= k < universe):
                    raise InstanceError(f"capability id {k!r} outside [0, {universe})")
            if not req:
                raise InstanceError("required capability set is empty")
        except (InstanceError, TypeError, ValueError) as exc:
            raise fail("tasks", pos, str(exc)) from None
        required[j] = tuple(sorted(req))

    return Instance(
        n=n,
        m=m,
        universe=universe,
        budget=float(budget),
        capabilities=tuple(capabilities),
        costs=tuple(costs),
        required=tuple(required),
    )


def save_instance(instance: Instance, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_instance(instance))


def load_instance(path) -> Instance:
    with open(path, encoding="utf-8") as fh:
        return parse_instance(fh.read())
