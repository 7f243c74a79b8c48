import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from passopt import scenario_io
from passopt.batch import aggregate_report, run_batch
from passopt.scenario_io import (gen_scenarios, read_dataset_csv, read_json,
                                 read_records_csv, record_to_scenario,
                                 write_dataset_csv, write_json,
                                 write_records_csv)


def test_gen_deterministic_and_inside():
    a = gen_scenarios(8, {"n_users": 3}, master_seed=42)
    b = gen_scenarios(8, {"n_users": 3}, master_seed=42)
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)
    for rec in a["scenarios"]:
        users = np.array(rec["users"])
        assert np.all((users[:, 0] >= 0) & (users[:, 0] <= rec["span_x"]))
        assert np.all((users[:, 1] >= 0) & (users[:, 1] <= rec["span_y"]))
    # per-scenario seeds are order-independent
    c = gen_scenarios(4, {"n_users": 3}, master_seed=42)
    assert [r["seed"] for r in c["scenarios"]] == \
        [r["seed"] for r in a["scenarios"][:4]]


def test_gen_rejects_bad_params():
    with pytest.raises(ValueError):
        gen_scenarios(2, {"n_users": 0})
    with pytest.raises(ValueError):
        gen_scenarios(2, {"frequency": 1e9})
    with pytest.raises(ValueError):
        gen_scenarios(-1, {})


def test_scenario_json_roundtrip(tmp_path):
    payload = gen_scenarios(3, {"n_users": 2}, master_seed=7)
    path = tmp_path / "scen.json"
    write_json(payload, path)
    back = read_json(path)
    assert back == payload
    scen = record_to_scenario(back["scenarios"][0])
    assert scen.n_users == 2


def test_dataset_layout_and_roundtrip(tmp_path):
    payload = gen_scenarios(5, {"n_users": 4}, master_seed=9)
    path = tmp_path / "data.csv"
    write_dataset_csv(payload, path)
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    # 2K feature values per record: x-coordinates then y-coordinates
    assert header[-8:] == [f"x_u_{i}" for i in range(4)] + \
        [f"y_u_{i}" for i in range(4)]
    back = read_dataset_csv(path)
    assert len(back) == 5
    for rec, orig in zip(back, payload["scenarios"]):
        np.testing.assert_allclose(rec["users"], orig["users"], rtol=1e-15)
        assert rec["seed"] == orig["seed"]


def test_run_records_roundtrip(tmp_path):
    recs = [scenario_io.RunRecord("s0000", 5, "mmpdd", 31.25, [15.0, 16.25],
                                  0.5, True, 1e-8, 12)]
    path = tmp_path / "r.csv"
    write_records_csv(recs, path)
    back = read_records_csv(path)
    assert back[0].sum_rate == 31.25
    assert back[0].per_user_rates == [15.0, 16.25]
    assert back[0].converged is True
    with pytest.raises(ValueError):
        scenario_io.RunRecord("x", 1, "bogus", 0.0, [], 0.0, True, 0.0, 0)


def _strip_wall_time(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    idx = rows[0].index("wall_time_s")
    return [[c for i, c in enumerate(row) if i != idx] for row in rows]


def test_run_batch_deterministic_and_aggregates(tmp_path):
    payload = gen_scenarios(4, {"n_users": 1, "pas_per_waveguide": 2},
                            master_seed=3)
    recs1, _ = run_batch(payload, "uniform")
    recs2, _ = run_batch(payload, "uniform")
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_records_csv(recs1, p1)
    write_records_csv(recs2, p2)
    assert _strip_wall_time(p1) == _strip_wall_time(p2)

    rows = aggregate_report([(10.0, recs1)])
    assert len(rows) == 1
    x, method, mean, std, n = rows[0]
    assert method == "uniform" and n == 4
    assert mean == pytest.approx(np.mean([r.sum_rate for r in recs1]))


def test_run_batch_worker_count_invariance(tmp_path):
    payload = gen_scenarios(4, {"n_users": 1, "pas_per_waveguide": 1},
                            master_seed=5)
    os.environ["PASSOPT_WORKERS"] = "1"
    recs1, _ = run_batch(payload, "mmpdd")
    os.environ["PASSOPT_WORKERS"] = "3"
    recs2, _ = run_batch(payload, "mmpdd")
    os.environ.pop("PASSOPT_WORKERS")
    ids1 = [(r.scenario_id, r.sum_rate, r.residual_inf) for r in recs1]
    ids2 = [(r.scenario_id, r.sum_rate, r.residual_inf) for r in recs2]
    assert ids1 == ids2


def test_run_batch_oracle_failure_rows():
    payload = gen_scenarios(2, {"n_users": 2, "pas_per_waveguide": 4},
                            master_seed=1)
    recs, _ = run_batch(payload, "oracle")     # N*L = 8 too large
    assert all(r.error for r in recs)
    assert all(not r.converged for r in recs)
    assert len(recs) == 2


def test_aggregate_report_empty_and_failed():
    assert aggregate_report([]) == []
    bad = scenario_io.RunRecord("s0", 1, "oracle", float("nan"), [], 0.0,
                                False, float("nan"), 0, error="boom")
    assert aggregate_report([(0.0, [bad])]) == []


def _cli(*args, env_extra=None):
    env = dict(os.environ)
    env.update(env_extra or {})
    return subprocess.run([sys.executable, "-m", "passopt.cli", *args],
                          capture_output=True, text=True, env=env)


def test_cli_end_to_end(tmp_path):
    scen = tmp_path / "scen.json"
    out = _cli("gen", "--count", "2", "--users", "1", "--pas", "2",
               "--master-seed", "3", "-o", str(scen))
    assert out.returncode == 0, out.stderr

    results = tmp_path / "res.csv"
    out = _cli("solve", str(scen), "--method", "uniform", "-o", str(results))
    assert out.returncode == 0, out.stderr
    recs = read_records_csv(results)
    assert len(recs) == 2 and all(r.method == "uniform" for r in recs)

    sols = tmp_path / "sols"
    out = _cli("solve", str(scen), "--method", "kdl-search", "--budget", "80",
               "-o", str(tmp_path / "kdl.csv"), "--save-solutions", str(sols))
    assert out.returncode == 0, out.stderr
    sol_file = sols / "kdl_search_solutions.json"
    assert sol_file.exists()

    eval_out = tmp_path / "eval.csv"
    out = _cli("eval", str(scen), str(sol_file), "-o", str(eval_out))
    assert out.returncode == 0, out.stderr
    erecs = read_records_csv(eval_out)
    krecs = read_records_csv(tmp_path / "kdl.csv")
    for e, k in zip(erecs, krecs):
        assert e.sum_rate == pytest.approx(k.sum_rate, rel=1e-9)

    data = tmp_path / "data.csv"
    assert _cli("dataset", str(scen), "-o", str(data)).returncode == 0
    assert len(read_dataset_csv(data)) == 2

    report = tmp_path / "report.csv"
    out = _cli("report", "-o", str(report), f"10:{results}",
               f"12:{tmp_path / 'kdl.csv'}")
    assert out.returncode == 0, out.stderr
    with open(report) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["x", "method", "mean_sum_rate", "std_sum_rate", "n"]
    assert len(rows) == 3


def test_eval_raw_parameter_file(tmp_path):
    """The eval subcommand decodes raw parameter interchange files through
    the same projections as the library decode."""
    from passopt import decode_raw_params, effective_channel, sinr_and_rate
    from passopt.kktdual import raw_param_dim
    from passopt.scenario_io import solution_from_raw_params, write_solutions

    payload = gen_scenarios(2, {"n_users": 2, "pas_per_waveguide": 3},
                            master_seed=17)
    scen_path = tmp_path / "scen.json"
    write_json(payload, scen_path)
    rng = np.random.default_rng(0)
    sols = []
    expected = {}
    for rec in payload["scenarios"]:
        scen = record_to_scenario(rec)
        raw = rng.standard_normal(raw_param_dim(scen))
        sols.append(solution_from_raw_params(rec["id"], raw, 2, 2, 3))
        _, placement, beam = decode_raw_params(raw, scen)
        rep = sinr_and_rate(effective_channel(scen, placement), beam, scen)
        expected[rec["id"]] = rep.sum_rate
    sol_path = tmp_path / "raw.json"
    write_solutions(sols, sol_path)
    out = _cli("eval", str(scen_path), str(sol_path),
               "-o", str(tmp_path / "scored.csv"))
    assert out.returncode == 0, out.stderr
    for rec in read_records_csv(tmp_path / "scored.csv"):
        assert rec.sum_rate == pytest.approx(expected[rec.scenario_id],
                                             rel=1e-12)


def test_report_empty_results(tmp_path):
    empty = tmp_path / "empty.csv"
    write_records_csv([], empty)
    out_path = tmp_path / "report.csv"
    out = _cli("report", "-o", str(out_path), f"5:{empty}")
    assert out.returncode == 0, out.stderr
    with open(out_path) as fh:
        rows = list(csv.reader(fh))
    assert rows == [["x", "method", "mean_sum_rate", "std_sum_rate", "n"]]


def test_cli_invalid_inputs(tmp_path):
    out = _cli("gen", "--count", "2", "--users", "0", "-o",
               str(tmp_path / "x.json"))
    assert out.returncode == 2
    out = _cli("solve", str(tmp_path / "missing.json"), "--method", "mmpdd",
               "-o", str(tmp_path / "y.csv"))
    assert out.returncode == 2


def test_cli_strict_nonconvergence(tmp_path):
    scen = tmp_path / "scen.json"
    _cli("gen", "--count", "1", "--users", "2", "--pas", "4",
         "--master-seed", "1", "-o", str(scen))
    out = _cli("solve", str(scen), "--method", "oracle", "--strict",
               "-o", str(tmp_path / "r.csv"))
    assert out.returncode == 3          # oversized oracle rows never converge
