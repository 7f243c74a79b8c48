import numpy as np
import pytest

from passopt import check_feasibility
from passopt.baselines import grid_oracle
from passopt.mmpdd import SolverConfig, export_trace_csv, solve
from passopt.scenario_io import gen_scenarios, record_to_scenario


def _scenario(seed, n_users=2, pas=4, **params):
    payload = gen_scenarios(1, {"n_users": n_users, "pas_per_waveguide": pas,
                                **params}, master_seed=seed)
    return record_to_scenario(payload["scenarios"][0])


def test_solve_single_user_near_grid_optimum():
    scen = _scenario(5, n_users=1, pas=1)
    res = solve(scen, SolverConfig(max_outer=100))
    oracle = grid_oracle(scen, resolution=1e-3)
    assert res.sum_rate >= 0.98 * oracle.sum_rate
    assert res.converged


def test_solve_residuals_and_feasibility(rng):
    scen = _scenario(11)
    res = solve(scen, SolverConfig(max_outer=100), collect_inner=True)
    assert res.residual_inf <= 1e-6
    assert res.trace[-1].residual_inf <= 1e-6
    assert check_feasibility(scen, res.placement, res.beam) == []
    assert res.sum_rate == pytest.approx(np.sum(res.per_user_rates), abs=1e-9)


def test_solve_inner_al_monotone():
    scen = _scenario(3)
    res = solve(scen, SolverConfig(max_outer=100), collect_inner=True)
    for seq in res.inner_al:
        diffs = np.diff(seq)
        if diffs.size:
            assert diffs.max() <= 1e-9


def test_solve_deterministic():
    scen = _scenario(7)
    a = solve(scen, SolverConfig(max_outer=50))
    b = solve(scen, SolverConfig(max_outer=50))
    assert a.sum_rate == b.sum_rate
    np.testing.assert_array_equal(a.placement.x, b.placement.x)
    np.testing.assert_array_equal(a.beam.d, b.beam.d)


def test_max_iterations_flag():
    scen = _scenario(9)
    res = solve(scen, SolverConfig(max_outer=1, eps_final=1e-30))
    assert not res.converged
    assert res.flag == "max_iterations"
    assert res.iterations == 1
    assert check_feasibility(scen, res.placement, res.beam) == []


def test_trace_csv_export(tmp_path):
    scen = _scenario(13)
    res = solve(scen, SolverConfig(max_outer=20))
    path = tmp_path / "trace.csv"
    export_trace_csv(res.trace, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "outer_iter,inner_sweeps,sum_rate,al_value,residual_inf,rho"
    assert len(lines) == len(res.trace) + 1
    first = lines[1].split(",")
    assert int(first[0]) == 1
    assert float(first[5]) == pytest.approx(1e-4)
