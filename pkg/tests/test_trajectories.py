from __future__ import annotations

import numpy as np
import pytest

from lazyoqw.clt import clt_report, steady_state
from lazyoqw.exceptions import BudgetExceeded, NumericalFailure, StructureError
from lazyoqw.lattice import LatticeState, evolve, position_distribution
from lazyoqw.model import WalkModel
from lazyoqw.trajectories import (
    TrajectoryState,
    default_workers,
    enumerate_branches,
    ensemble_stats,
    ergodic_average,
    jump_law,
    positions_csv,
    run_trajectory,
    sample_jumps,
    sample_step,
    simulate_positions,
    trajectory_rng,
)
from lazyoqw.zoo import CircleParams, build_circle, classical_walk, lazy_identity

from oracles import convolution_power


def test_lazy_model_never_moves():
    model = lazy_identity(2, 2)
    path = run_trajectory(model, None, 50, seed=1)
    assert not np.any(path.xs)
    rng = np.random.default_rng(0)
    s = TrajectoryState.initial(model)
    for _ in range(10):
        s = sample_step(model, s, rng)
    assert not np.any(s.x) and s.n == 10


def test_scalar_step_law():
    model = classical_walk(0.5, 0.25, 0.25)
    np.testing.assert_allclose(jump_law(model, [[1.0]]), [0.5, 0.25, 0.25])


def test_line_walk_law_from_mixed_state(line_walk):
    direct = [np.trace(a @ a.conj().T).real / 2 for a in line_walk.ops]
    np.testing.assert_allclose(direct, [1 / 3] * 3, atol=1e-15)
    np.testing.assert_allclose(jump_law(line_walk, np.eye(2) / 2), direct, atol=1e-15)


def test_empirical_one_step_law(line_walk):
    tau = np.array([[0.8, 0.3j], [-0.3j, 0.2]])
    p = jump_law(line_walk, tau)
    N = 10**6
    j = sample_jumps(line_walk, tau, N, np.random.default_rng(5))
    freq = np.bincount(j, minlength=3) / N
    se = np.sqrt(p * (1 - p) / N)
    assert np.all(np.abs(freq - p) <= 4 * se)


def test_sample_step_and_sample_jumps_share_rule(line_walk):
    tau = np.array([[0.8, 0.3j], [-0.3j, 0.2]])
    js = sample_jumps(line_walk, tau, 200, np.random.default_rng(9))
    rng = np.random.default_rng(9)
    for j in js:
        s = sample_step(line_walk, TrajectoryState(tau, [0]), rng)
        assert s.x[0] == line_walk.displacements[j, 0]


def test_sample_step_update(line_walk):
    tau = np.eye(2) / 2
    s = sample_step(line_walk, TrajectoryState(tau, [0]), np.random.default_rng(2))
    j = {0: 0, 1: 1, -1: 2}[int(s.x[0])]
    a = line_walk.ops[j]
    expected = a @ tau @ a.conj().T
    np.testing.assert_allclose(s.tau, expected / np.trace(expected), atol=1e-15)


def test_stay_branch_still_transforms_coin():
    a0 = np.array([[0.0, 1.0], [0.0, 0.0]])
    model = WalkModel(1, [a0, np.diag([1.0, 0.0]), np.zeros((2, 2))])
    s = sample_step(model, TrajectoryState(np.diag([0.0, 1.0]), [0]), np.random.default_rng(0))
    assert s.x[0] == 0
    np.testing.assert_allclose(s.tau, np.diag([1.0, 0.0]))


def test_unit_trace_along_path(line_walk):
    path = run_trajectory(line_walk, None, 500, seed=3)
    np.testing.assert_allclose(np.einsum("kii->k", path.taus), 1.0, atol=1e-12)


def test_seed_determinism(line_walk):
    a = run_trajectory(line_walk, None, 300, seed=11, traj_id=4)
    b = run_trajectory(line_walk, None, 300, seed=11, traj_id=4)
    np.testing.assert_array_equal(a.xs, b.xs)
    np.testing.assert_array_equal(a.taus, b.taus)
    c = run_trajectory(line_walk, None, 300, seed=12, traj_id=4)
    assert not np.array_equal(a.xs, c.xs)


def test_streams_depend_only_on_seed_and_index():
    a = trajectory_rng(7, 3).random(5)
    b = trajectory_rng(7, 3).random(5)
    c = trajectory_rng(7, 4).random(5)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_ensemble_member_replays(line_walk):
    finals, paths = simulate_positions(line_walk, None, 200, 40, seed=5, block=16, workers=1, record=True)
    for k in (0, 17, 39):
        path = run_trajectory(line_walk, None, 200, seed=5, traj_id=k)
        np.testing.assert_array_equal(path.xs, paths[k])
        np.testing.assert_array_equal(path.xs[-1], finals[k])


def test_block_size_and_workers_do_not_change_results(line_walk):
    a, _ = simulate_positions(line_walk, None, 100, 300, seed=8, block=300, workers=1)
    b, _ = simulate_positions(line_walk, None, 100, 300, seed=8, block=37, workers=1)
    c, _ = simulate_positions(line_walk, None, 100, 300, seed=8, block=37, workers=3)
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(a, c)


def test_threads_env_var(monkeypatch):
    monkeypatch.setenv("OQW_THREADS", "3")
    assert default_workers() == 3
    monkeypatch.setenv("OQW_THREADS", "x")
    with pytest.raises(StructureError):
        default_workers()


def test_ensemble_stats_fields(line_walk):
    stats = ensemble_stats(line_walk, None, 100, 2000, seed=1, m=[0.0], workers=1)
    assert stats.n_traj == 2000 and stats.n_steps == 100 and stats.n_batches == 100
    np.testing.assert_array_equal(stats.emp_cov, stats.emp_cov.T)
    assert np.linalg.eigvalsh(stats.emp_cov).min() >= 0
    assert np.all(stats.stderr > 0)
    np.testing.assert_allclose(stats.scaled_cov, stats.emp_cov / 100)


def test_two_trajectories_have_positive_stderr(line_walk):
    stats = ensemble_stats(line_walk, None, 50, 2, seed=0, m=[0.0], workers=1)
    assert stats.n_batches == 1
    assert np.all(stats.stderr > 0)


def test_ensemble_uses_pipeline_mean_by_default(line_walk):
    stats = ensemble_stats(line_walk, None, 20, 10, seed=0, workers=1)
    assert abs(stats.m[0]) < 1e-12


def test_classical_scaled_variance():
    model = classical_walk(0.5, 0.25, 0.25)
    stats = ensemble_stats(model, None, 400, 20_000, seed=2, m=[0.0])
    assert abs(stats.scaled_cov[0, 0] - 0.5) <= 4 * stats.stderr[0]


def test_circle_mean_per_step():
    model = build_circle(CircleParams())
    rep = clt_report(model)
    stats = ensemble_stats(model, None, 2000, 10_000, seed=4, m=rep.m)
    assert abs(stats.mean_per_step[0] - 0.00222) <= 4 * stats.mean_stderr[0]


@pytest.mark.slow
def test_circle_mean_per_step_full_size():
    model = build_circle(CircleParams())
    stats = ensemble_stats(model, None, 2000, 100_000, seed=4)
    assert abs(stats.mean_per_step[0] - 0.00222) <= 4 * stats.mean_stderr[0]


@pytest.mark.slow
def test_classical_scaled_variance_full_size():
    model = classical_walk(0.5, 0.25, 0.25)
    stats = ensemble_stats(model, None, 1000, 100_000, seed=2, m=[0.0])
    assert abs(stats.scaled_cov[0, 0] - 0.5) <= 4 * stats.stderr[0]


def test_ergodic_average_scalar():
    assert ergodic_average(classical_walk(0.5, 0.25, 0.25), None, 100, seed=0)[0, 0] == pytest.approx(1.0)


def test_ergodic_average_converges(line_walk):
    rho = steady_state(line_walk)
    a = ergodic_average(line_walk, None, 10**5, seed=1)
    b = ergodic_average(line_walk, None, 10**5, seed=2)
    assert np.max(np.abs(a - rho)) <= 1e-2
    assert np.max(np.abs(a - b)) <= 2e-2


def test_enumeration_zero_steps(line_walk):
    tau = np.array([[0.6, 0.1], [0.1, 0.4]])
    res = enumerate_branches(line_walk, tau, 0, site=[2])
    assert res.n_branches == 1
    np.testing.assert_array_equal(res.state.coords, [[2]])
    np.testing.assert_allclose(res.state.taus[0], tau)


def test_enumeration_matches_evolution(line_walk):
    res = enumerate_branches(line_walk, None, 6)
    ev = evolve(line_walk, LatticeState.initial(line_walk), 6)
    np.testing.assert_array_equal(res.state.coords, ev.coords)
    np.testing.assert_allclose(res.state.taus, ev.taus, atol=1e-10)
    np.testing.assert_allclose(res.distribution.probs, position_distribution(ev).probs, atol=1e-10)


def test_enumeration_classical_convolution():
    model = classical_walk(0.4, 0.35, 0.25)
    res = enumerate_branches(model, None, 4)
    np.testing.assert_allclose(res.distribution.probs, convolution_power(np.array([0.25, 0.4, 0.35]), 4), atol=1e-12)


def test_enumeration_budget(line_walk):
    with pytest.raises(BudgetExceeded):
        enumerate_branches(line_walk, None, 15)
    with pytest.raises(BudgetExceeded):
        enumerate_branches(line_walk, None, 3, budget=26)


def test_corrupted_state_is_reported():
    model = WalkModel(1, [np.diag([1.0, 0.0]), np.diag([0.0, 1.0]), np.zeros((2, 2))])
    from lazyoqw.trajectories import _advance

    taus = np.zeros((1, 2, 2), dtype=complex)
    with pytest.raises(NumericalFailure):
        _advance(model, taus, np.zeros((1, 1), dtype=np.int64), np.array([[0.5]]))


def test_positions_csv_layout():
    paths = np.array([[[0, 0], [1, 0]], [[0, 0], [0, -1]]])
    text = positions_csv(paths)
    assert text.splitlines() == ["traj_id,n,x_1,x_2", "0,0,0,0", "0,1,1,0", "1,0,0,0", "1,1,0,-1"]


def test_init_dimension_checked(line_walk):
    with pytest.raises(StructureError):
        run_trajectory(line_walk, TrajectoryState(np.eye(3) / 3, [0]), 3)
