"""Command line entry point.

Usage::

    hctab generate --tasks 50 --seed 1 -o inst.json
    hctab run inst.json --algo LLH --seed 3 --trace steps.csv
    hctab experiment config.json
    hctab sweep config.json --axis budget_rate --values 1,5,9,13
    hctab oracle small.json
    hctab check-epg --trials 10000 --instances 50
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

import numpy as np

from . import harness
from .instance import GeneratorConfig, InstanceError, generate_instance, load_instance, serialize_instance
from .learning import write_trace
from .oracle import DEFAULT_STATE_CAP, InstanceTooLargeError, brute_force_optimum, check_potential_identity

EPG_TOLERANCE = 1e-9


def _generate(args) -> int:
    cfg = GeneratorConfig(
        task_count=args.tasks,
        agents_per_task_ratio=args.ratio,
        feasible_fraction_range=(args.feasible_min, args.feasible_max),
        cost_range=(args.cost_min, args.cost_max),
        budget_rate=args.budget_rate,
        seed=args.seed,
    )
    text = serialize_instance(generate_instance(cfg))
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _run(args) -> int:
    instance = load_instance(args.instance)
    algo = args.algo
    if args.variant and algo == "LLH":
        algo = {"full": "LLH", "no_ce": "LLH_NCE", "no_hll": "LLH_NHL"}[args.variant]
    cfg = harness.ExperimentConfig(
        scenarios=[{}],
        algorithms=[algo],
        beta0=args.beta0,
        lam=args.lam,
        smooth=args.smooth,
        t_max=args.tmax,
        chi=args.chi,
        scheduler=args.scheduler,
    )
    res = harness.run_algorithm(algo, instance, args.seed, cfg)
    if args.trace:
        write_trace(res, args.trace)
    print(f"algorithm   {res.algorithm}")
    print(f"objective   {res.objective:g}")
    print(f"total_cost  {res.total_cost:.6g} / {instance.budget:g}")
    print(f"cu_rate     {res.cu_rate:.4f}")
    print(f"iterations  {res.iterations}")
    print(f"converged   {res.converged}")
    print(f"wall_ms     {res.wall_time * 1000:.1f}")
    print("assignment  " + " ".join(str(a) for a in res.final_partition.assignment))
    return 0


def _experiment(args) -> int:
    cfg = harness.load_config(args.config)
    if args.output:
        cfg = dataclasses.replace(cfg, output=args.output)
    result = harness.run_experiment(cfg)
    _print_rows(result.rows)
    return 0 if result.ok else 1


def _sweep(args) -> int:
    cfg = harness.load_config(args.config)
    if args.output:
        cfg = dataclasses.replace(cfg, output=args.output)
    values = [float(v) for v in args.values.split(",") if v.strip()]
    result = harness.sweep(cfg, harness.Axis(args.axis), values)
    _print_rows(result.rows)
    return 0 if result.ok else 1


def _print_rows(rows) -> None:
    for r in rows:
        gap = "" if r.gap is None else f"{r.gap:.2f}%"
        print(f"{r.scenario:>24} {r.algorithm:>8}  best {r.best:9.1f}  worst {r.worst:9.1f}  "
              f"avg {r.average:9.1f}  gap {gap:>8}  cu {r.cu_rate:.4f}  cpu {r.cpu_time:.3f}s")


def _oracle(args) -> int:
    instance = load_instance(args.instance)
    res = brute_force_optimum(instance, cap=args.cap)
    print(f"best_value  {res.best_value:g}")
    print(f"states      {res.states_enumerated}")
    print("assignment  " + " ".join(str(a) for a in res.best_partition.assignment))
    return 0


def _check_epg(args) -> int:
    rng = np.random.default_rng(args.seed)
    if args.instance:
        instances = [load_instance(args.instance)]
    else:
        instances = []
        for _ in range(args.instances):
            m = int(rng.integers(2, args.max_agents // 3 + 1))
            cfg = GeneratorConfig(
                task_count=m,
                feasible_fraction_range=(0.5, 1.0),
                competency_range=(0, 10),
                budget_rate=float(rng.uniform(1, 13)),
                seed=int(rng.integers(2**63)),
            )
            instances.append(generate_instance(cfg))
    per = [args.trials // len(instances) + (1 if k < args.trials % len(instances) else 0) for k in range(len(instances))]
    worst, total = 0.0, 0
    for inst, trials in zip(instances, per):
        rep = check_potential_identity(inst, trials, rng)
        worst = max(worst, rep.max_abs_error)
        total += rep.trials_run
    print(f"instances      {len(instances)}")
    print(f"trials_run     {total}")
    print(f"max_abs_error  {worst:.3e}")
    return 0 if worst <= EPG_TOLERANCE else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hctab", description="Budget-constrained task allocation by coalition formation")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a random instance")
    g.add_argument("--tasks", type=int, default=50)
    g.add_argument("--ratio", type=int, default=3, help="agents per task")
    g.add_argument("--budget-rate", type=float, default=5.0)
    g.add_argument("--feasible-min", type=float, default=0.1)
    g.add_argument("--feasible-max", type=float, default=0.2)
    g.add_argument("--cost-min", type=float, default=1.0)
    g.add_argument("--cost-max", type=float, default=20.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("-o", "--output")
    g.set_defaults(func=_generate)

    r = sub.add_parser("run", help="run one algorithm on an instance file")
    r.add_argument("instance")
    r.add_argument("--algo", choices=harness.ALGORITHMS, default="LLH")
    r.add_argument("--variant", choices=["full", "no_ce", "no_hll"])
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--beta0", type=float, default=harness.ExperimentConfig.beta0)
    r.add_argument("--lambda", dest="lam", type=float, default=harness.ExperimentConfig.lam)
    r.add_argument("--smooth", type=int, default=harness.ExperimentConfig.smooth)
    r.add_argument("--tmax", type=int, help="handoff limit (default 500 * n)")
    r.add_argument("--chi", type=float, default=harness.ExperimentConfig.chi)
    r.add_argument("--scheduler", choices=["random_relay", "round_robin"], default="random_relay")
    r.add_argument("--trace", help="write acted steps to this CSV file")
    r.set_defaults(func=_run)

    e = sub.add_parser("experiment", help="run a JSON experiment config")
    e.add_argument("config")
    e.add_argument("-o", "--output", help=f"output directory (default ${harness.OUTPUT_DIR_ENV} or .)")
    e.set_defaults(func=_experiment)

    s = sub.add_parser("sweep", help="sweep one scenario parameter")
    s.add_argument("config")
    s.add_argument("--axis", choices=[a.value for a in harness.Axis], required=True)
    s.add_argument("--values", required=True, help="comma separated")
    s.add_argument("-o", "--output")
    s.set_defaults(func=_sweep)

    o = sub.add_parser("oracle", help="exact optimum of a small instance")
    o.add_argument("instance")
    o.add_argument("--cap", type=int, default=DEFAULT_STATE_CAP)
    o.set_defaults(func=_oracle)

    c = sub.add_parser("check-epg", help="fuzz the potential-game identity")
    c.add_argument("--trials", type=int, default=10000)
    c.add_argument("--instances", type=int, default=50)
    c.add_argument("--max-agents", type=int, default=30)
    c.add_argument("--instance", help="check this instance file instead of random ones")
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=_check_epg)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (InstanceError, InstanceTooLargeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
