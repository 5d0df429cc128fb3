import math

import numpy as np
import pytest

from sbpc.controller import (
    DisturbanceSpec,
    read_log_csv,
    replay,
    run_multiobjective,
    run_nominal,
    run_relaxed,
    sample_disturbance,
    simulate,
)
from sbpc.dynamics import stage_cost
from sbpc.ocp import OcpProblem, solve_nominal


def test_nominal_desk_reaches_target(desk):
    log = run_nominal(desk.with_(d_bar=0.0))
    assert log.completed and log.feasible_steps == desk.k_f
    assert log.terminal_delta == 0.0
    assert len(log.states) == desk.k_f + 1
    assert [s.u_cmd for s in log.steps] == [1.0] * 3 + [0.0] * 6 + [-1.0] * 3


def test_single_step_horizon(desk):
    s = desk.with_(k_f=1, L=1, terminal_center=(0.0, 1.0), d_bar=0.0)
    log = run_nominal(s)
    assert log.completed and len(log.steps) == 1 and log.states[-1] == (0.0, 1.0)


def test_relaxed_equals_nominal_without_disturbance(desk):
    s = desk.with_(d_bar=0.0)
    a, b = run_nominal(s), run_relaxed(s)
    assert a.states == b.states
    assert all(st.gamma_lb == 0.0 for st in b.steps)


def test_multiobjective_large_omega_matches_nominal(desk):
    s = desk.with_(d_bar=0.0)
    assert run_multiobjective(s, 1e6).states == run_nominal(s).states


@pytest.mark.parametrize("run_index", range(5))
def test_multiobjective_side_by_side_gamma(desk, run_index):
    rel = run_relaxed(desk, run_index=run_index)
    mo = run_multiobjective(desk, 1e6, run_index=run_index)
    assert rel.states == mo.states
    for a, b in zip(rel.steps, mo.steps):
        assert abs(a.gamma_lb - b.gamma_lb) <= 1e-6


def test_tail_cost_decrease_nominal(desk):
    s = desk.with_(d_bar=0.0)
    log = run_nominal(s)
    model = s.built_model
    costs = []
    for k, x in enumerate(log.states[:-1]):
        p = OcpProblem(model, k, s.k_f, x, s.policy, s.inputs, s.terminal)
        costs.append(solve_nominal(p).cost)
    for k in range(len(costs) - 1):
        ell = stage_cost(model, log.states[k], log.steps[k].u_applied)
        assert costs[k + 1] <= costs[k] - ell + 1e-9


def test_nominal_aborts_under_disturbance(desk):
    fixed = DisturbanceSpec(0.1, "fixed", 0, (0.1,) * desk.k_f)
    log = run_nominal(desk, disturbance=fixed)
    assert log.status == "aborted" and "infeasible" in log.message


def test_initial_infeasible(desk):
    log = run_nominal(desk.with_(terminal_center=(500.0, 0.0), d_bar=0.0))
    assert log.status == "initial_infeasible" and log.steps == []


def test_relaxed_under_disturbance_completes(desk):
    log = run_relaxed(desk, run_index=0)
    assert log.completed and log.feasible_steps == desk.k_f
    assert all(abs(s.d) <= desk.d_bar for s in log.steps)
    assert math.isfinite(log.terminal_delta)


def test_fixed_sequence_is_deterministic(desk):
    fixed = DisturbanceSpec(0.05, "fixed", 0, (0.05,) * desk.k_f)
    a = run_relaxed(desk, disturbance=fixed)
    b = run_relaxed(desk, disturbance=fixed)
    assert a.to_csv() == b.to_csv()
    assert [s.d for s in a.steps] == [0.05] * desk.k_f


def test_log_bytes_identical_for_same_seed(desk):
    assert run_relaxed(desk, run_index=5).to_csv() == run_relaxed(desk, run_index=5).to_csv()
    assert run_relaxed(desk, run_index=5).to_csv() != run_relaxed(desk, run_index=6).to_csv()


def test_replay_reproduces_states(desk):
    log = run_relaxed(desk, run_index=2)
    states, applied = read_log_csv(log.to_csv())
    assert states == log.states
    assert replay(desk.built_model, desk.x0, applied) == states


def test_disturbance_sampling():
    spec = DisturbanceSpec(0.2, "uniform", 4)
    draws = np.array([sample_disturbance(spec, k, 0) for k in range(100_000)])
    assert np.all(np.abs(draws) <= 0.2)
    assert abs(draws.mean()) < 0.01
    assert sample_disturbance(spec, 17, 3) == sample_disturbance(spec, 17, 3)
    assert sample_disturbance(DisturbanceSpec(0.0), 3) == 0.0
    ext = {sample_disturbance(DisturbanceSpec(0.2, "extreme", 1), k) for k in range(50)}
    assert ext == {0.2, -0.2}


def test_disturbance_spec_validation():
    with pytest.raises(ValueError):
        DisturbanceSpec(-1.0)
    with pytest.raises(ValueError):
        DisturbanceSpec(0.1, "fixed", 0, (0.2,))


def test_unknown_algorithm(desk):
    with pytest.raises(ValueError):
        simulate(desk, "greedy")


def test_train_demo_nominal(train_demo):
    log = run_nominal(train_demo.with_(d_bar=0.0))
    assert log.completed and log.terminal_delta == 0.0
    limits = [train_demo.built_model.track.speed_limit(x[0]) for x in log.states]
    assert all(0.0 <= x[1] <= lim for x, lim in zip(log.states, limits))
