"""Policy-program assembly and solver tests against independent oracles."""

import numpy as np
import pytest

from oracles import fista_policy, rollout_policy_cost
from satmpc import (
    ConfigError,
    CostSpec,
    InputConstraint,
    NoiseModel,
    PolicyParameters,
    PolicySolver,
    SystemModel,
    assemble,
    build_batch,
    compute_moments,
    evaluate_expected_cost,
    solve,
    standard_sigmoid,
)
from satmpc.qp import structure_mask


def _instance(rng, n, m, N, u_max=2.0, sigma=1.0):
    A = 0.5 * rng.standard_normal((n, n))
    B = rng.standard_normal((n, m))
    model = SystemModel(A, B, np.eye(n), rng.standard_normal(n) * 0.2)
    cost = CostSpec(np.eye(n), np.eye(m) * 0.5, N=N)
    noise = NoiseModel(np.zeros(n), np.full(n, sigma**2))
    con = InputConstraint(u_max, min(1.0, u_max))
    lam = compute_moments(standard_sigmoid(), noise, N, mode="quadrature")
    batch = build_batch(model, cost)
    return model, cost, noise, con, lam, batch


def test_structure_mask_layout():
    mask = structure_mask(3, 2, 1)
    assert mask.shape == (3, 6)
    assert not mask[0].any()  # first step sees no noise
    assert mask[1, :2].all() and not mask[1, 2:].any()
    assert mask[2, :4].all() and not mask[2, 4:].any()
    # non-square blocks
    mask = structure_mask(2, 1, 2)
    assert mask.shape == (4, 2)
    assert not mask[:2].any() and mask[2:, :1].all() and not mask[2:, 1:].any()


def test_assemble_matches_direct_formulas():
    rng = np.random.default_rng(21)
    model, cost, noise, con, lam, batch = _instance(rng, 2, 1, 3)
    x0 = rng.standard_normal(2)
    qp = assemble(batch, x0, noise, lam, con)
    drift = batch.A_bar @ x0 + batch.D_bar @ batch.r_bar
    DF = batch.D_bar @ batch.F_bar
    assert np.allclose(qp.b, 2.0 * drift @ batch.Q_bar @ batch.B_bar, atol=1e-12)
    assert np.allclose(qp.M1, batch.R_bar + batch.B_bar.T @ batch.Q_bar @ batch.B_bar, atol=1e-12)
    assert np.allclose(qp.M2, 2.0 * DF.T @ batch.Q_bar @ batch.B_bar, atol=1e-12)
    cov = np.diag(noise.stacked_cov_diag(3))
    c_ref = drift @ batch.Q_bar @ drift + np.trace(DF.T @ batch.Q_bar @ DF @ cov)
    assert qp.c == pytest.approx(float(c_ref), rel=1e-12)


def test_assemble_errors():
    rng = np.random.default_rng(22)
    model, cost, noise, con, lam, batch = _instance(rng, 2, 1, 2)
    with pytest.raises(ConfigError):
        assemble(batch, np.zeros(3), noise, lam, con)
    with pytest.raises(ConfigError):
        assemble(batch, np.zeros(2), NoiseModel([0.1, 0.0], [1.0, 1.0]), lam, con)
    lam_short = compute_moments(standard_sigmoid(), noise, 1, mode="quadrature")
    with pytest.raises(ConfigError):
        assemble(batch, np.zeros(2), noise, lam_short, con)


def test_scalar_horizon_one_analytic():
    # N=1 has no feedback entries, so the program is min b d + M1 d^2
    model = SystemModel([[0.5]], [[1.0]])
    cost = CostSpec(np.eye(1), np.eye(1), N=1)
    noise = NoiseModel([0.0], [1.0])
    lam = compute_moments(standard_sigmoid(), noise, 1, mode="quadrature")
    batch = build_batch(model, cost)

    qp = assemble(batch, [1.0], noise, lam, InputConstraint(5.0, 1.0))
    assert qp.b[0] == pytest.approx(2.0 * 0.5)  # 2 A x0 Q B
    assert qp.M1[0, 0] == pytest.approx(2.0)  # R + B Q B
    policy = solve(qp)
    assert policy.d_bar[0] == pytest.approx(-0.25, abs=1e-7)
    assert policy.objective == pytest.approx(-0.125, abs=1e-7)
    assert policy.kkt_residual <= 1e-6

    # active bound: the unconstrained minimizer is clipped to -u_max
    qp_tight = assemble(batch, [1.0], noise, lam, InputConstraint(0.1, 0.1))
    policy = solve(qp_tight)
    assert policy.d_bar[0] == pytest.approx(-0.1, abs=1e-7)
    assert policy.objective == pytest.approx(-0.08, abs=1e-7)
    assert policy.feasibility_margin >= -1e-9


def test_zero_policy_feasible_and_optimality_sign():
    rng = np.random.default_rng(23)
    for k in range(5):
        model, cost, noise, con, lam, batch = _instance(rng, 2, 1, 2)
        qp = assemble(batch, rng.standard_normal(2) * 3, noise, lam, con)
        zero = PolicyParameters(
            G_bar=np.zeros((2, 4)), d_bar=np.zeros(2),
            objective=0.0, kkt_residual=0.0, feasibility_margin=con.u_max,
        )
        assert evaluate_expected_cost(zero, qp) == pytest.approx(qp.c, rel=1e-12)
        # zero is feasible, so the optimum can never be worse than it
        policy = solve(qp)
        assert policy.objective <= 1e-9
        assert policy.feasibility_margin >= -1e-9


def test_solver_against_proximal_oracle():
    rng = np.random.default_rng(24)
    for k in range(12):
        n = int(rng.integers(1, 3))
        m = int(rng.integers(1, 3))
        N = int(rng.integers(1, 4))
        u_max = float(rng.uniform(0.3, 3.0))
        model, cost, noise, con, lam, batch = _instance(rng, n, m, N, u_max=u_max)
        x0 = rng.standard_normal(n) * rng.uniform(0.5, 4.0)
        qp = assemble(batch, x0, noise, lam, con)
        policy = solve(qp)
        G_ref, d_ref, obj_ref = fista_policy(
            qp.b, qp.M1, qp.M2, lam.lambda1, lam.lambda2,
            qp.structure_mask, qp.u_max, qp.phi_max,
        )
        assert policy.objective == pytest.approx(obj_ref, abs=2e-5)
        assert policy.kkt_residual <= 1e-6
        assert np.all(policy.G_bar[~qp.structure_mask] == 0.0)


def test_expected_cost_against_monte_carlo():
    rng = np.random.default_rng(25)
    model, cost, noise, con, lam, batch = _instance(rng, 2, 1, 2, u_max=2.0)
    x0 = np.array([1.5, -0.5])
    qp = assemble(batch, x0, noise, lam, con)
    policy = solve(qp)
    predicted = evaluate_expected_cost(policy, qp)
    mean, se = rollout_policy_cost(
        model, cost, standard_sigmoid(), policy.G_bar, policy.d_bar,
        x0, noise, np.random.default_rng(77), samples=200_000,
    )
    assert abs(predicted - mean) <= 4.0 * se


def test_optimum_survives_feasible_perturbations():
    rng = np.random.default_rng(26)
    model, cost, noise, con, lam, batch = _instance(rng, 2, 1, 3)
    qp = assemble(batch, [2.0, -1.0], noise, lam, con)
    policy = solve(qp)
    base = policy.objective
    for k in range(40):
        G = policy.G_bar + 1e-2 * rng.standard_normal(policy.G_bar.shape) * qp.structure_mask
        d = policy.d_bar + 1e-2 * rng.standard_normal(policy.d_bar.shape)
        rowsum = np.abs(d) + qp.phi_max * np.abs(G).sum(axis=1)
        scale = np.minimum(1.0, qp.u_max / np.maximum(rowsum, 1e-300))
        trial = PolicyParameters(G_bar=G * scale[:, None], d_bar=d * scale,
                                 objective=0.0, kkt_residual=0.0, feasibility_margin=0.0)
        perturbed = evaluate_expected_cost(trial, qp) - qp.c
        assert perturbed >= base - 1e-8


def test_objective_nonincreasing_in_input_budget():
    rng = np.random.default_rng(27)
    model, cost, noise, con, lam, batch = _instance(rng, 2, 1, 2)
    x0 = np.array([3.0, -2.0])
    prev = np.inf
    for u_max in [0.2, 0.5, 1.0, 2.0, 5.0]:
        qp = assemble(batch, x0, noise, lam, InputConstraint(u_max, 0.2))
        obj = solve(qp).objective
        assert obj <= prev + 1e-9
        prev = obj


def test_hard_bound_over_noise_draws():
    rng = np.random.default_rng(28)
    model, cost, noise, con, lam, batch = _instance(rng, 2, 1, 3, u_max=1.5)
    qp = assemble(batch, [4.0, 4.0], noise, lam, con)
    policy = solve(qp)
    sat = standard_sigmoid()
    w = rng.normal(0.0, 1.0, size=(10_000, 6))
    u = sat.evaluate(w) @ policy.G_bar.T + policy.d_bar
    assert np.max(np.abs(u)) <= con.u_max + 1e-9


def test_policy_solver_matches_fresh_solves():
    rng = np.random.default_rng(29)
    model, cost, noise, con, lam, batch = _instance(rng, 2, 1, 3)
    solver = PolicySolver(batch, noise, lam, con)
    for k in range(4):
        x0 = rng.standard_normal(2) * (2.0 + k)
        policy, qp = solver.solve_at(x0)
        fresh_qp = assemble(batch, x0, noise, lam, con)
        fresh = solve(fresh_qp)
        assert qp.c == pytest.approx(fresh_qp.c, rel=1e-10, abs=1e-10)
        assert np.allclose(qp.b, fresh_qp.b, atol=1e-12)
        assert policy.objective == pytest.approx(fresh.objective, abs=2e-6)
        assert np.allclose(policy.d_bar, fresh.d_bar, atol=1e-4)
        assert evaluate_expected_cost(policy, qp) == pytest.approx(
            evaluate_expected_cost(fresh, fresh_qp), abs=2e-6)


def test_policy_solver_x0_validation():
    rng = np.random.default_rng(30)
    model, cost, noise, con, lam, batch = _instance(rng, 2, 1, 2)
    solver = PolicySolver(batch, noise, lam, con)
    with pytest.raises(ConfigError):
        solver.solve_at([1.0, 2.0, 3.0])


def test_evaluate_rejects_structure_violations():
    rng = np.random.default_rng(31)
    model, cost, noise, con, lam, batch = _instance(rng, 2, 1, 2)
    qp = assemble(batch, [1.0, 1.0], noise, lam, con)
    G = np.zeros((2, 4))
    G[0, 0] = 0.1  # first block row must stay zero
    bad = PolicyParameters(G_bar=G, d_bar=np.zeros(2), objective=0.0,
                           kkt_residual=0.0, feasibility_margin=0.0)
    with pytest.raises(ConfigError):
        evaluate_expected_cost(bad, qp)
    wrong_shape = PolicyParameters(G_bar=np.zeros((2, 2)), d_bar=np.zeros(2),
                                   objective=0.0, kkt_residual=0.0, feasibility_margin=0.0)
    with pytest.raises(ConfigError):
        evaluate_expected_cost(wrong_shape, qp)
