import json

import numpy as np
import pytest

from actuator_opt import Intervals1D, assemble_fem_1d, project_initial_condition
from actuator_opt.geometry import LevelSetField, levelset_from_shape, measure
from actuator_opt.lqr import lq_cost, solve_lq, worst_case_initial
from actuator_opt.optimize import (
    DegenerateSensitivityError,
    OptimizeConfig,
    continuation,
    levelset_design,
    position_descent,
    position_scan,
    worst_case_design,
)
from actuator_opt.sensitivity import topological_field


@pytest.fixture(scope="module")
def coarse():
    return assemble_fem_1d(50, 0.01)


@pytest.fixture(scope="module")
def bump(coarse):
    return project_initial_condition(lambda x: np.maximum(np.sin(3 * np.pi * x), 0) ** 2, coarse)


def check_record(rec, beta0, shrink):
    totals = rec.accepted_totals()
    assert all(b < a for a, b in zip(totals[:-1], totals[1:]))
    betas = [it.beta for it in rec.iterates]
    assert all(b <= a for a, b in zip(betas[:-1], betas[1:]))
    n_rej = 0
    for it in rec.iterates:
        assert it.beta == pytest.approx(beta0 * shrink**n_rej, rel=1e-12)
        n_rej += not it.accepted


def test_config_validation():
    with pytest.raises(ValueError):
        OptimizeConfig(beta0=0)
    with pytest.raises(ValueError):
        OptimizeConfig(beta_shrink=1.0)
    with pytest.raises(ValueError):
        OptimizeConfig(eps_stop=0)
    with pytest.raises(ValueError):
        OptimizeConfig(alpha_schedule=(1.0, 1.0))


def test_stationary_start(coarse):
    f = project_initial_condition(lambda x: np.sin(np.pi * x), coarse)
    rec = position_descent(Intervals1D(((0.4, 0.6),)), f, coarse, OptimizeConfig(eps_stop=1e-6))
    assert rec.stop_reason == "gradient" and rec.iterates == []


def test_position_descent_record(coarse):
    f = project_initial_condition(lambda x: np.sin(np.pi * x), coarse)
    cfg = OptimizeConfig(beta0=0.2, max_iters=60)
    rec = position_descent(Intervals1D(((0.1, 0.3),)), f, coarse, cfg)
    check_record(rec, 0.2, 0.5)
    (a, b), = rec.final_shape.intervals
    assert abs(0.5 * (a + b) - 0.5) < 0.02


def test_scan_symmetry_and_argmin(coarse):
    f = project_initial_condition(lambda x: np.sin(np.pi * x), coarse)
    centres = np.linspace(0.1, 0.9, 17)
    pairs, best = position_scan(f, coarse, 0.2, centres)
    costs = np.array([v for _, v in pairs])
    np.testing.assert_allclose(costs, costs[::-1], rtol=1e-8)
    assert best == pytest.approx(0.5)
    with pytest.raises(ValueError):
        position_scan(f, coarse, 0.2, [0.05])


def test_pure_penalty_shrinks(coarse):
    psi0 = levelset_from_shape(Intervals1D(((0.3, 0.7),)), 51)
    rec = levelset_design(psi0, np.zeros(coarse.n), coarse, 1.0, 0.2, OptimizeConfig(max_iters=200))
    sizes = [it.report.size for it in rec.iterates if it.accepted]
    assert sizes[0] < 0.4
    gaps = [abs(s - 0.2) for s in sizes]
    assert all(b < a for a, b in zip(gaps[:-1], gaps[1:]))
    assert abs(rec.final_report.size - 0.2) < 0.01
    check_record(rec, 0.5, 0.5)


def test_degenerate_sensitivity(coarse):
    psi0 = levelset_from_shape(Intervals1D(((0.3, 0.7),)), 51)
    with pytest.raises(DegenerateSensitivityError):
        levelset_design(psi0, np.zeros(coarse.n), coarse, 0.0, 0.2)


def test_single_stage_continuation_equals_design(coarse, bump):
    psi0 = levelset_from_shape(Intervals1D(((0.4, 0.6),)), 51)
    cfg = OptimizeConfig(alpha_schedule=(1.0,), max_iters=80)
    a = continuation(psi0, bump, coarse, 0.2, cfg)
    b = levelset_design(psi0, bump, coarse, 1.0, 0.2, cfg)
    assert a.final_report.total == b.final_report.total
    assert len(a.per_alpha) == 1
    np.testing.assert_array_equal(a.final_psi.psi, b.final_psi.psi)


def test_continuation_rows_and_stationarity(coarse, bump):
    psi0 = levelset_from_shape(Intervals1D(((0.4, 0.6),)), 51)
    cfg = OptimizeConfig(alpha_schedule=(0.1, 1.0, 10.0), max_iters=300)
    rec = continuation(psi0, bump, coarse, 0.2, cfg)
    assert [a for a, _, _ in rec.per_alpha] == [0.1, 1.0, 10.0]
    first, last = rec.per_alpha[0][1], rec.per_alpha[-1][1]
    assert abs(last.size - 0.2) <= abs(first.size - 0.2)
    # converged shape is stationary on its boundary: g vanishes at every interface point
    fld = topological_field(rec.final_shape, bump, coarse, 10.0, 0.2)
    x = np.linspace(0, 1, 51)
    scale = np.max(np.abs(fld.g))
    for p in rec.final_shape.boundary_points:
        assert abs(np.interp(p, x, fld.g)) < 0.1 * scale


def test_worst_case_parity_and_value(coarse):
    shape = Intervals1D(((0.2, 0.35), (0.65, 0.8)))
    sol = solve_lq(shape, coarse)
    wc = worst_case_initial(sol.riccati, coarse.S)
    f = wc.representatives[0]
    a = topological_field(shape, f, coarse, 1.0, 0.2, solution=sol).g
    b = topological_field(shape, -f, coarse, 1.0, 0.2, solution=sol).g
    np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-12)
    assert lq_cost(sol.riccati, f) == pytest.approx(wc.lambda_max, rel=1e-8)


def test_worst_case_design_monotone(coarse):
    psi0 = levelset_from_shape(Intervals1D(((0.4, 0.6),)), 51)
    rec = worst_case_design(psi0, coarse, 1.0, 0.2, OptimizeConfig(max_iters=40))
    check_record(rec, 0.5, 0.5)


def test_run_record_serialisation(tmp_path, coarse, bump):
    psi0 = levelset_from_shape(Intervals1D(((0.4, 0.6),)), 51)
    rec = continuation(psi0, bump, coarse, 0.2, OptimizeConfig(alpha_schedule=(1.0,), max_iters=20))
    rec.write_json(tmp_path / "run.json")
    rec.write_history_csv(tmp_path / "h.csv")
    data = json.loads((tmp_path / "run.json").read_text())
    assert len(data["iterates"]) == len(rec.iterates)
    assert data["final_report"]["total"] == rec.final_report.total
    lines = (tmp_path / "h.csv").read_text().splitlines()
    assert lines[0] == "iter,beta,accepted,total,lq,penalty,size"
    assert len(lines) == len(rec.iterates) + 1
