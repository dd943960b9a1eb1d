import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings, strategies as st

from actuator_opt import Intervals1D, assemble_fem_1d
from actuator_opt.lqr import (
    InstabilityError,
    adjoint_at,
    lq_cost,
    penalty,
    rk4_propagator,
    simulate_closed_loop,
    solve_lq,
    total_cost,
    worst_case_cost,
    worst_case_initial,
    write_trajectory_csv,
)
from actuator_opt.riccati import solve_are

SQ2 = np.sqrt(2) - 1


def scalar_pi():
    return solve_are(np.array([[-1.0]]), np.array([1.0]), np.array([[1.0]]), 1.0)


def test_lq_cost_basics():
    Pi = scalar_pi()
    assert lq_cost(Pi, [0.0]) == 0.0
    assert lq_cost(Pi, [1.0]) == pytest.approx(SQ2)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=4, max_size=4))
def test_lq_cost_parity(f):
    rng = np.random.default_rng(0)
    C = rng.standard_normal((4, 4))
    Pi = C @ C.T
    f = np.array(f)
    assert lq_cost(Pi, f) == lq_cost(Pi, -f)


def test_total_cost_report(heat1d, sine_ic, centred):
    r0 = total_cost(centred, sine_ic, 0.0, 0.2, heat1d)
    assert r0.penalty_part == 0.0 and r0.total == r0.lq_part
    r1 = total_cost(centred, sine_ic, 10.0, 0.2, heat1d)
    assert r1.penalty_part == pytest.approx(0.0, abs=1e-25)
    r2 = total_cost(centred, sine_ic, 10.0, 0.1, heat1d)
    assert r2.penalty_part == pytest.approx(penalty(0.2, 10.0, 0.1))
    assert r2.total == r2.lq_part + r2.penalty_part
    assert r2.size == pytest.approx(0.2)


def test_zero_initial_state(heat1d, centred):
    sol = solve_lq(centred, heat1d)
    traj = simulate_closed_loop(heat1d, sol.B, sol.Pi, np.zeros(heat1d.n), T=1.0, dt=0.01)
    assert np.all(traj.states == 0) and np.all(traj.controls == 0)


def test_open_loop_matches_expm():
    sys_ = assemble_fem_1d(6, 0.1)
    f = np.arange(1.0, 6.0)
    traj = simulate_closed_loop(sys_, np.zeros(5), np.zeros((5, 5)), f, T=2.0, dt=1e-3, record_every=100)
    for t, y in zip(traj.state_times, traj.states):
        np.testing.assert_allclose(y, sla.expm(sys_.A * t) @ f, atol=1e-8)
    np.testing.assert_array_equal(traj.states[0], f)


def test_rk4_substeps_match_stability():
    sys_ = assemble_fem_1d(200, 0.01)
    P, n_sub = rk4_propagator(sys_.A, 0.01)
    assert n_sub > 1
    assert np.max(np.abs(np.linalg.eigvals(P))) < 1.0


def test_controls_are_feedback(heat1d, sine_ic, centred):
    sol = solve_lq(centred, heat1d)
    traj = simulate_closed_loop(heat1d, sol.B, sol.Pi, sine_ic, T=5.0, dt=0.01, record_every=50)
    k = traj.state_times.size
    u = -(traj.states @ (sol.Pi @ sol.B)) / 1e-3
    np.testing.assert_allclose(traj.controls[::50][:k], u, rtol=1e-10, atol=1e-12)


def test_blowup_detected(heat1d, sine_ic, centred):
    sol = solve_lq(centred, heat1d)
    with pytest.raises(InstabilityError):
        # wrong-sign feedback destabilises the loop
        simulate_closed_loop(heat1d, sol.B, -50 * sol.Pi, sine_ic, T=50.0, dt=0.01)


def test_bad_time_grid(heat1d, sine_ic, centred):
    sol = solve_lq(centred, heat1d)
    with pytest.raises(ValueError):
        simulate_closed_loop(heat1d, sol.B, sol.Pi, sine_ic, T=0.001, dt=0.01)


def test_adjoint():
    Pi = scalar_pi()
    assert adjoint_at(Pi, [0.0])[0] == 0.0
    assert adjoint_at(Pi, [1.0])[0] == pytest.approx(2 * SQ2)
    y = np.array([0.3])
    assert adjoint_at(Pi, -y)[0] == -adjoint_at(Pi, y)[0]
    M = np.array([[2.0]])
    assert adjoint_at(Pi, [1.0], M)[0] == pytest.approx(SQ2)


def test_worst_case_proportional():
    S = np.diag([1.0, 2.0, 3.0])
    wc = worst_case_initial(S, S)
    assert wc.lambda_max == pytest.approx(1.0)
    assert len(wc.representatives) == 6  # every direction ties


def test_worst_case_representatives(heat1d, centred):
    sol = solve_lq(centred, heat1d)
    wc = worst_case_initial(sol.riccati, heat1d.S)
    assert len(wc.representatives) % 2 == 0
    v = wc.representatives[0]
    np.testing.assert_allclose(wc.representatives[1], -v)
    assert v @ heat1d.S @ v == pytest.approx(1.0, abs=1e-10)
    assert lq_cost(sol.riccati, v) == pytest.approx(wc.lambda_max, rel=1e-8)
    assert worst_case_cost(centred, 0.0, 0.2, heat1d, solution=sol).lq_part == wc.lambda_max
    rng = np.random.default_rng(4)
    for _ in range(100):
        f = rng.standard_normal(heat1d.n)
        assert wc.lambda_max >= lq_cost(sol.riccati, f) / (f @ heat1d.S @ f) * (1 - 1e-12)


def test_trajectory_csv(tmp_path, heat1d, sine_ic, centred):
    sol = solve_lq(centred, heat1d)
    traj = simulate_closed_loop(heat1d, sol.B, sol.Pi, sine_ic, T=0.05, dt=0.01)
    p = tmp_path / "traj.csv"
    write_trajectory_csv(p, traj)
    lines = p.read_text().splitlines()
    assert lines[0] == "t,sq_norm_M,u" and len(lines) == 7
