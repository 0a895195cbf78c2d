import csv
import json

import pytest

from hctab import cli
from hctab.harness import (
    AGGREGATE_HEADER,
    OUTPUT_DIR_ENV,
    RUNS_HEADER,
    Axis,
    ExperimentConfig,
    compute_gap,
    cost_interval_for_heterogeneity,
    load_config,
    run_algorithm,
    run_experiment,
    sweep,
)
from hctab.instance import GeneratorConfig, generate_instance

SMALL = {"task_count": 10}


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_gap_examples():
    assert round(compute_gap(1034.9, 803.5), 2) == 28.80
    assert round(compute_gap(1034.9, 992.5), 2) == 4.27
    assert compute_gap(512.0, 512.0) == 0
    with pytest.raises(ZeroDivisionError):
        compute_gap(1.0, 0.0)


def test_single_repeat_row():
    res = run_experiment(ExperimentConfig(scenarios=[SMALL], repeats=1), write=False)
    assert len(res.rows) == 1
    row = res.rows[0]
    assert row.best == row.worst == row.average
    assert row.gap == 0
    assert (row.n, row.m, row.scenario) == (30, 10, "n30_m10")


def test_aggregates_recompute_from_runs():
    cfg = ExperimentConfig(scenarios=[SMALL], algorithms=["LLH", "CF", "BRA"], repeats=4)
    res = run_experiment(cfg, write=False)
    assert len(res.runs) == 12
    avg = {}
    for row in res.rows:
        objs = [r.objective for r in res.runs if r.algorithm == row.algorithm]
        assert row.best == max(objs) and row.worst == min(objs)
        assert row.average == pytest.approx(sum(objs) / len(objs))
        avg[row.algorithm] = row.average
        assert 0 <= row.cu_rate <= 1
    for row in res.rows:
        assert row.gap == pytest.approx(compute_gap(avg["LLH"], row.average))
    assert sorted(r.seed for r in res.runs if r.algorithm == "LLH") == [0, 1, 2, 3]


def test_csv_output_is_deterministic(tmp_path):
    cfg = ExperimentConfig(scenarios=[SMALL, {"task_count": 12, "id": "twelve"}], algorithms=["LLH", "BRP"], repeats=2)
    for name in ("a", "b"):
        run_experiment(ExperimentConfig(**{**cfg.__dict__, "output": str(tmp_path / name)}))

    def strip(rows, col):
        return [{k: v for k, v in r.items() if k != col} for r in rows]

    for fname, timing in (("runs.csv", "wall_ms"), ("aggregate.csv", "cpu_time")):
        a, b = read_csv(tmp_path / "a" / fname), read_csv(tmp_path / "b" / fname)
        assert a and strip(a, timing) == strip(b, timing)
    assert list(read_csv(tmp_path / "a" / "runs.csv")[0]) == RUNS_HEADER
    agg = read_csv(tmp_path / "a" / "aggregate.csv")
    assert list(agg[0]) == AGGREGATE_HEADER
    assert {r["scenario"] for r in agg} == {"n30_m10", "twelve"}


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path / "env"))
    run_experiment(ExperimentConfig(scenarios=[SMALL], repeats=1))
    assert (tmp_path / "env" / "runs.csv").exists()


def test_failing_scenario_is_isolated():
    cfg = ExperimentConfig(scenarios=[{"task_count": 4}, SMALL], repeats=1)
    res = run_experiment(cfg, write=False)
    assert not res.ok and len(res.failures) == 1
    assert [r.scenario for r in res.rows] == ["n30_m10"]


def test_vary_instance_changes_instances():
    fixed = run_experiment(ExperimentConfig(scenarios=[SMALL], algorithms=["CF"], repeats=3), write=False)
    varied = run_experiment(ExperimentConfig(scenarios=[SMALL], algorithms=["CF"], repeats=3, vary_instance=True), write=False)
    assert len({r.objective for r in fixed.runs}) == 1  # CF ignores its seed
    assert len({r.objective for r in varied.runs}) > 1


def test_sweep_cardinality():
    cfg = ExperimentConfig(scenarios=[SMALL], algorithms=["LLH", "CF"], repeats=1)
    res = sweep(cfg, Axis.BUDGET_RATE, [1, 5, 13], write=False)
    assert len(res.rows) == 3 * 2
    assert sorted({r.axis_value for r in res.rows}) == [1, 5, 13]
    assert {r.axis for r in res.rows} == {"budget_rate"}


def test_sweep_agent_scale():
    cfg = ExperimentConfig(scenarios=[SMALL], algorithms=["CF"], repeats=1)
    res = sweep(cfg, Axis.AGENT_SCALE, [10, 20], write=False)
    assert [(r.n, r.m) for r in res.rows] == [(30, 10), (60, 20)]
    with pytest.raises(ValueError):
        sweep(cfg, Axis.AGENT_SCALE, [2.5], write=False)


def test_heterogeneity_interval():
    lo, hi = cost_interval_for_heterogeneity(0.3)
    assert hi - lo == 6
    assert (lo + hi) / 2 == 10.5
    with pytest.raises(ValueError):
        cost_interval_for_heterogeneity(1.5)


def test_zero_heterogeneity_gives_equal_costs():
    cfg = GeneratorConfig(task_count=20, cost_range=cost_interval_for_heterogeneity(0.0), seed=2)
    inst = generate_instance(cfg)
    for row in inst.costs:
        assert len(set(row.values())) == 1
    res = sweep(ExperimentConfig(scenarios=[SMALL], repeats=1), Axis.HETEROGENEITY, [0.0, 0.5], write=False)
    assert res.ok and len(res.rows) == 2


def test_config_validation(tmp_path):
    with pytest.raises(ValueError):
        ExperimentConfig(scenarios=[SMALL], algorithms=["XYZ"])
    with pytest.raises(ValueError):
        ExperimentConfig(scenarios=[])
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"scenarios": [SMALL], "bogus": 1}))
    with pytest.raises(ValueError, match="bogus"):
        load_config(path)
    path.write_text(json.dumps({"scenarios": [SMALL], "repeats": 2, "algorithms": ["CF"]}))
    assert load_config(path).repeats == 2


def test_run_algorithm_names():
    inst = generate_instance(GeneratorConfig(task_count=10, seed=1))
    for name in ("LLH", "LLH_NCE", "LLH_NHL", "CF", "BRP", "BRA"):
        assert run_algorithm(name, inst, 0).algorithm == name


# --- command line ------------------------------------------------------------


def test_cli_generate_run_oracle(tmp_path, capsys):
    inst_path = tmp_path / "inst.json"
    assert cli.main(["generate", "--tasks", "3", "--feasible-min", "0.5", "--feasible-max", "1.0",
                     "--seed", "4", "-o", str(inst_path)]) == 0
    trace = tmp_path / "trace.csv"
    assert cli.main(["run", str(inst_path), "--algo", "LLH", "--seed", "1", "--trace", str(trace)]) == 0
    out = capsys.readouterr().out
    llh = float(out.split("objective")[1].split()[0])
    assert trace.read_text().startswith("t,agent,action_kind")
    assert cli.main(["oracle", str(inst_path)]) == 0
    best = float(capsys.readouterr().out.split("best_value")[1].split()[0])
    assert llh <= best
    assert cli.main(["run", str(inst_path), "--variant", "no_ce"]) == 0
    assert "LLH_NCE" in capsys.readouterr().out


def test_cli_check_epg(capsys):
    assert cli.main(["check-epg", "--trials", "300", "--instances", "3"]) == 0
    out = capsys.readouterr().out
    assert "trials_run     300" in out


def test_cli_experiment_and_sweep(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"scenarios": [SMALL], "algorithms": ["LLH", "CF"], "repeats": 2}))
    assert cli.main(["experiment", str(cfg), "-o", str(tmp_path / "exp")]) == 0
    assert len(read_csv(tmp_path / "exp" / "runs.csv")) == 4
    assert cli.main(["sweep", str(cfg), "--axis", "budget_rate", "--values", "1,13", "-o", str(tmp_path / "sw")]) == 0
    assert len(read_csv(tmp_path / "sw" / "aggregate.csv")) == 4


def test_cli_errors(tmp_path, capsys):
    assert cli.main(["run", str(tmp_path / "missing.json")]) == 2
    assert "error" in capsys.readouterr().err
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"scenarios": [{"task_count": 4}], "repeats": 1}))
    assert cli.main(["experiment", str(cfg), "-o", str(tmp_path / "o")]) == 1
