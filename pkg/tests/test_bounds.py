import math

import numpy as np
import pytest

from sbpc.bounds import (
    KFunction,
    ModuliPair,
    analytic_integrator_moduli,
    beta_sequence,
    cumulative_bound,
    estimate_moduli,
    propagate_perturbation_bound,
    scenario_moduli,
    verify_bound,
)
from sbpc.dynamics import IntegratorModel

EX = ModuliPair(KFunction.linear(1.5), KFunction.linear(2.0))


def test_beta_hand_example():
    assert beta_sequence(EX, 0.1, 3) == pytest.approx([0.2, 0.5, 0.95], abs=1e-15)
    assert cumulative_bound(EX, 0.1, 3) == pytest.approx(1.65, abs=1e-15)


def test_beta_zero_disturbance():
    assert beta_sequence(EX, 0.0, 10) == [0.0] * 10
    assert cumulative_bound(EX, 0.0, 10) == 0.0


@pytest.mark.parametrize("k_x", [0.5, 1.0, 1.5, 2.0])
def test_beta_geometric_closed_form(k_x):
    k_u, d = 0.7, 0.03
    m = ModuliPair(KFunction.linear(k_x), KFunction.linear(k_u))
    betas = beta_sequence(m, d, 21)
    for k, b in enumerate(betas):
        assert b == pytest.approx(k_u * d * sum(k_x**i for i in range(k + 1)), rel=1e-12)


def test_beta_monotone():
    betas = beta_sequence(EX, 0.1, 20)
    assert all(b >= a for a, b in zip(betas, betas[1:]))
    grid = np.linspace(0, 0.5, 26)
    vals = [cumulative_bound(EX, d, 12) for d in grid]
    assert vals[0] == 0.0 and all(b > a for a, b in zip(vals, vals[1:]))
    assert cumulative_bound(EX, 0.2, 5) > cumulative_bound(EX, 0.1, 5)


def test_propagation_identity():
    d = 0.07
    assert propagate_perturbation_bound(EX, d, 1) == EX.a_u(d)
    assert propagate_perturbation_bound(EX, d, 2) == EX.a_u(d) + EX.a_x(EX.a_u(d))
    betas = beta_sequence(EX, d, 9)
    assert [propagate_perturbation_bound(EX, d, s) for s in range(1, 10)] == betas


def test_tabulated_kfunction():
    f = KFunction(grid=(0.0, 1.0, 2.0), values=(0.0, 2.0, 3.0))
    assert f(0.5) == 1.0 and f(1.5) == 2.5 and f(3.0) == 4.0
    with pytest.raises(ValueError):
        KFunction(grid=(0.0, 1.0), values=(0.5, 1.0))
    with pytest.raises(ValueError):
        KFunction(grid=(0.0, 1.0), values=(0.0, 0.0))


def test_monte_carlo_open_loop_deviation_within_bound():
    # vectorized oracle, independent of the model classes
    dt, w = 1.0, np.array([0.5, 1.0])
    m = analytic_integrator_moduli(IntegratorModel(dt), tuple(w))
    k_f, d_bar = 12, 0.05
    rng = np.random.default_rng(123)
    u = rng.choice([-1.0, 0.0, 1.0], size=k_f)
    d = rng.uniform(-d_bar, d_bar, size=(10_000, k_f))
    d[:10] = d_bar * np.sign(rng.uniform(-1, 1, size=(10, k_f)))
    x = np.zeros(2)
    xt = np.zeros((10_000, 2))
    for j in range(k_f):
        x = np.array([x[0] + dt * x[1], x[1] + dt * u[j]])
        xt = np.stack([xt[:, 0] + dt * xt[:, 1], xt[:, 1] + dt * (u[j] + d[:, j])], axis=1)
        dev = np.max(np.abs(xt - x) * w, axis=1).max()
        assert dev <= propagate_perturbation_bound(m, d_bar, j + 1) + 1e-12


def test_estimate_recovers_integrator_constants():
    model = IntegratorModel(1.0)
    for w in ((1.0, 1.0), (0.5, 1.0)):
        est = estimate_moduli(model, ((-5, 5), (-5, 5)), (-1, 1), 4000, weights=w, seed=1)
        kx, ku = est.raw
        exact = analytic_integrator_moduli(model, w).raw
        assert abs(kx - exact[0]) <= 0.05 * exact[0] and kx <= exact[0] + 1e-12
        assert abs(ku - exact[1]) <= 1e-12
        assert est.a_x.slope == pytest.approx(1.2 * kx)


class Constant:
    def step_scalar(self, x1, x2, u):
        return (3.0, -1.0)


def test_estimate_constant_model():
    est = estimate_moduli(Constant(), ((0, 1), (0, 1)), (-1, 1), 1000)
    assert est.raw == (0.0, 0.0)


def test_estimate_reproducible_and_validated():
    model = IntegratorModel(1.0)
    a = estimate_moduli(model, ((0, 1), (0, 1)), (-1, 1), 1000, seed=9)
    b = estimate_moduli(model, ((0, 1), (0, 1)), (-1, 1), 1000, seed=9)
    assert a == b and a.raw == b.raw
    with pytest.raises(ValueError):
        estimate_moduli(model, ((0, 0), (0, 1)), (-1, 1), 1000)
    with pytest.raises(ValueError):
        estimate_moduli(model, ((0, 1), (0, 1)), (-1, 1), 10)


def test_verify_zero_disturbance(desk):
    rep = verify_bound(desk.with_(d_bar=0.0), 5)
    assert rep.beta_total == 0.0 and rep.max_delta_observed == 0.0 and rep.margin == 0.0
    assert rep.passed


def test_verify_desk(desk):
    rep = verify_bound(desk, 200)
    assert rep.violations == 0 and rep.margin >= 0 and rep.completed_runs == 200


def test_verify_halved_bound_detects(scenario_dir):
    from sbpc.scenario import parse_scenario

    s = parse_scenario(scenario_dir / "short_integrator.ini")
    assert verify_bound(s, 300).violations == 0
    assert verify_bound(s, 300, bound_scale=0.5).violations > 0


def test_verify_parallel_matches_serial(desk):
    a = verify_bound(desk, 8, workers=1)
    b = verify_bound(desk, 8, workers=2)
    assert a.deltas == b.deltas


def test_report_text(desk):
    text = verify_bound(desk, 3).to_text()
    for key in ("d_bar", "k_f", "beta_total", "max_delta_observed", "violations", "runs"):
        assert f"{key} = " in text


def test_scenario_moduli_kinds(desk, train_demo):
    assert scenario_moduli(desk).note == "analytic"
    lin = scenario_moduli(desk.with_(moduli="linear", k_x=1.5, k_u=2.0))
    assert cumulative_bound(lin, 0.1, 3) == pytest.approx(1.65)
    est = scenario_moduli(train_demo.with_(moduli_samples=1000))
    assert "inflated" in est.note and est.a_x.slope > 1.0
