"""Experiment driver: multi-seed runs, aggregate metrics, parameter sweeps, CSV output."""

from __future__ import annotations

import csv
import dataclasses
import enum
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from .baselines import BaselineParams, run_bra, run_brp, run_cf
from .instance import GeneratorConfig, Instance, InstanceError, generate_instance
from .learning import LearningParams, RunResult, Scheduler, Variant, run

log = logging.getLogger(__name__)

__all__ = [
    "ALGORITHMS",
    "OUTPUT_DIR_ENV",
    "Axis",
    "ExperimentConfig",
    "ExperimentResult",
    "MetricsRow",
    "RunRecord",
    "compute_gap",
    "cost_interval_for_heterogeneity",
    "load_config",
    "run_algorithm",
    "run_experiment",
    "sweep",
    "write_aggregate_csv",
    "write_runs_csv",
]

ALGORITHMS = ("LLH", "LLH_NCE", "LLH_NHL", "CF", "BRP", "BRA")
OUTPUT_DIR_ENV = "HCTAB_OUTPUT_DIR"
RUNS_HEADER = ["scenario", "algorithm", "seed", "objective", "cu_rate", "iterations", "converged", "wall_ms"]
AGGREGATE_HEADER = [
    "scenario", "n", "m", "axis", "axis_value", "algorithm",
    "best", "worst", "average", "gap", "cu_rate", "cpu_time",
]


class Axis(enum.Enum):
    BUDGET_RATE = "budget_rate"
    HETEROGENEITY = "heterogeneity"
    AGENT_SCALE = "agent_scale"


@dataclass
class ExperimentConfig:
    scenarios: list[dict[str, Any]]
    algorithms: list[str] = field(default_factory=lambda: ["LLH"])
    repeats: int = 10
    reference_algorithm: str = "LLH"
    output: str | None = None
    base_seed: int = 0
    # False: one instance per scenario; True: a fresh instance per repeat
    vary_instance: bool = False
    beta0: float = LearningParams.beta0
    lam: float = LearningParams.lam
    smooth: int = LearningParams.smooth
    t_max: int | None = None
    chi: float = BaselineParams.chi
    scheduler: str = Scheduler.RANDOM_RELAY.value

    def __post_init__(self) -> None:
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        unknown = [a for a in self.algorithms if a not in ALGORITHMS]
        if unknown:
            raise ValueError(f"unknown algorithms {unknown}; choose from {ALGORITHMS}")
        if not self.scenarios:
            raise ValueError("at least one scenario is required")


@dataclass(frozen=True)
class RunRecord:
    scenario: str
    algorithm: str
    seed: int
    objective: float
    cu_rate: float
    iterations: int
    converged: bool
    wall_ms: float


@dataclass(frozen=True)
class MetricsRow:
    scenario: str
    n: int
    m: int
    algorithm: str
    best: float
    worst: float
    average: float
    gap: float | None
    cu_rate: float
    cpu_time: float
    axis: str = ""
    axis_value: float | None = None


@dataclass
class ExperimentResult:
    rows: list[MetricsRow]
    runs: list[RunRecord]
    failures: dict[str, str]

    @property
    def ok(self) -> bool:
        return not self.failures


def compute_gap(avg_reference: float, avg_algorithm: float) -> float:
    """Percentage by which the reference average exceeds ``avg_algorithm``."""
    if avg_algorithm == 0:
        raise ZeroDivisionError("gap is undefined for a zero average")
    return 100.0 * (avg_reference - avg_algorithm) / avg_algorithm


def cost_interval_for_heterogeneity(gamma: float, global_max: float = 20.0, center: float = 10.5) -> tuple[float, float]:
    """Cost interval of width ``gamma * global_max`` centred on ``center``."""
    if not 0 <= gamma <= 1:
        raise ValueError("heterogeneity degree must lie in [0, 1]")
    half = gamma * global_max / 2
    lo, hi = center - half, center + half
    if lo <= 0:
        raise ValueError(f"interval ({lo}, {hi}) reaches non-positive costs")
    return lo, hi


def run_algorithm(name: str, instance: Instance, seed: int, cfg: ExperimentConfig | None = None) -> RunResult:
    cfg = cfg or ExperimentConfig(scenarios=[{}])
    scheduler = Scheduler(cfg.scheduler)
    if name.startswith("LLH"):
        variant = {"LLH": Variant.FULL, "LLH_NCE": Variant.NO_CE, "LLH_NHL": Variant.NO_HLL}[name]
        params = LearningParams(
            beta0=cfg.beta0, lam=cfg.lam, smooth=cfg.smooth, t_max=cfg.t_max,
            variant=variant, scheduler=scheduler, seed=seed,
        )
        return run(instance, params)
    params = BaselineParams(chi=cfg.chi, t_max=cfg.t_max, seed=seed, scheduler=scheduler)
    runner: Callable[[Instance, BaselineParams], RunResult] = {"CF": run_cf, "BRP": run_brp, "BRA": run_bra}[name]
    return runner(instance, params)


def _generator_config(overrides: dict[str, Any], default_seed: int) -> GeneratorConfig:
    kw = {k: v for k, v in overrides.items() if k not in ("id", "axis", "axis_value")}
    for key in ("feasible_fraction_range", "capabilities_per_agent_range", "capabilities_per_task_range",
                "competency_range", "cost_range"):
        if key in kw:
            kw[key] = tuple(kw[key])
    kw.setdefault("seed", default_seed)
    return GeneratorConfig(**kw)


def _scenario_id(overrides: dict[str, Any], gen: GeneratorConfig) -> str:
    if "id" in overrides:
        return str(overrides["id"])
    sid = f"n{gen.agents_per_task_ratio * gen.task_count}_m{gen.task_count}"
    if "axis" in overrides:
        sid += f"_{overrides['axis']}{overrides['axis_value']:g}"
    return sid


def _aggregate(scenario: str, n: int, m: int, records: list[RunRecord], cfg: ExperimentConfig, axis: str,
               axis_value: float | None) -> list[MetricsRow]:
    by_algo: dict[str, list[RunRecord]] = {}
    for r in records:
        by_algo.setdefault(r.algorithm, []).append(r)
    averages = {a: float(np.mean([r.objective for r in rs])) for a, rs in by_algo.items()}
    ref = averages.get(cfg.reference_algorithm)
    rows = []
    for algo in cfg.algorithms:
        rs = by_algo.get(algo)
        if not rs:
            continue
        objs = [r.objective for r in rs]
        avg = averages[algo]
        gap = compute_gap(ref, avg) if ref is not None and avg != 0 else None
        rows.append(MetricsRow(
            scenario=scenario, n=n, m=m, algorithm=algo,
            best=max(objs), worst=min(objs), average=avg, gap=gap,
            cu_rate=float(np.mean([r.cu_rate for r in rs])),
            cpu_time=float(np.mean([r.wall_ms for r in rs])) / 1000.0,
            axis=axis, axis_value=axis_value,
        ))
    return rows


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> ExperimentResult:
    """Run every algorithm ``repeats`` times on each scenario and aggregate.

    Repeat ``r`` uses seed ``base_seed ^ r``.  A failing scenario is logged
    and reported in ``failures``; the remaining scenarios still run.
    """
    rows: list[MetricsRow] = []
    runs: list[RunRecord] = []
    failures: dict[str, str] = {}
    for overrides in cfg.scenarios:
        label = str(overrides.get("id", overrides))
        try:
            gen = _generator_config(overrides, cfg.base_seed)
            scenario = _scenario_id(overrides, gen)
            label = scenario
            instance = generate_instance(gen)
            records = []
            for algo in cfg.algorithms:
                for r in range(cfg.repeats):
                    seed = cfg.base_seed ^ r
                    inst = generate_instance(dataclasses.replace(gen, seed=gen.seed ^ r)) if cfg.vary_instance else instance
                    res = run_algorithm(algo, inst, seed, cfg)
                    records.append(RunRecord(
                        scenario, algo, seed, res.objective, res.cu_rate,
                        res.iterations, res.converged, res.wall_time * 1000.0,
                    ))
            runs.extend(records)
            rows.extend(_aggregate(scenario, instance.n, instance.m, records, cfg,
                                   overrides.get("axis", ""), overrides.get("axis_value")))
        except (InstanceError, ValueError, ZeroDivisionError) as exc:
            log.error("scenario %s failed: %s", label, exc)
            failures[label] = str(exc)
    if write:
        out = Path(cfg.output or os.environ.get(OUTPUT_DIR_ENV, "."))
        out.mkdir(parents=True, exist_ok=True)
        write_runs_csv(runs, out / "runs.csv")
        write_aggregate_csv(rows, out / "aggregate.csv")
    return ExperimentResult(rows, runs, failures)


def sweep(cfg: ExperimentConfig, axis: Axis, values: Sequence[float], write: bool = True) -> ExperimentResult:
    """Clone each scenario once per axis value and run the experiment over all clones."""
    scenarios = []
    for base in cfg.scenarios:
        for v in values:
            s = dict(base)
            s["axis"], s["axis_value"] = axis.value, float(v)
            if axis is Axis.BUDGET_RATE:
                if not 0 < v:
                    raise ValueError("budget rate must be positive")
                s["budget_rate"] = float(v)
            elif axis is Axis.HETEROGENEITY:
                s["cost_range"] = cost_interval_for_heterogeneity(float(v))
            else:
                if int(v) != v or v < 1:
                    raise ValueError("agent scale values are task counts (positive integers)")
                s["task_count"] = int(v)
            if "id" in s:
                s["id"] = f"{s['id']}_{axis.value}{float(v):g}"
            scenarios.append(s)
    return run_experiment(dataclasses.replace(cfg, scenarios=scenarios), write=write)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_runs_csv(runs: Sequence[RunRecord], path) -> None:
    ordered = sorted(runs, key=lambda r: (r.scenario, r.algorithm, r.seed))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(RUNS_HEADER)
        for r in ordered:
            w.writerow([_fmt(getattr(r, k)) for k in RUNS_HEADER])


def write_aggregate_csv(rows: Sequence[MetricsRow], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(AGGREGATE_HEADER)
        for r in rows:
            w.writerow([_fmt(getattr(r, k)) for k in AGGREGATE_HEADER])


def load_config(path) -> ExperimentConfig:
    """Read an :class:`ExperimentConfig` from a JSON object of its fields."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValueError("config must be a JSON object")
    names = {f.name for f in dataclasses.fields(ExperimentConfig)}
    extra = set(doc) - names
    if extra:
        raise ValueError(f"unknown config keys: {sorted(extra)}")
    return ExperimentConfig(**doc)
