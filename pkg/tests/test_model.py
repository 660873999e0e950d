"""Validation and normal-form tests for the problem-description layer."""

import numpy as np
import pytest

from satmpc import (
    ConfigError,
    CostSpec,
    InputConstraint,
    NoiseModel,
    SystemModel,
    normalize_affine,
    scaled_sigmoid,
    standard_sigmoid,
    validate,
)


def test_model_defaults():
    m = SystemModel([[0.5, 0.1], [0.0, 0.4]], [[1.0], [2.0]])
    assert m.n == 2 and m.m == 1
    assert np.array_equal(m.F, np.eye(2))
    assert np.array_equal(m.r, np.zeros(2))


def test_model_vector_b_is_column():
    m = SystemModel([[0.5]], [2.0])
    assert m.B.shape == (1, 1)


def test_model_arrays_frozen():
    m = SystemModel([[0.5]], [[1.0]])
    with pytest.raises(ValueError):
        m.A[0, 0] = 9.0


def test_model_shape_errors():
    with pytest.raises(ConfigError):
        SystemModel([[0.5, 0.1]], [[1.0]])  # A not square
    with pytest.raises(ConfigError):
        SystemModel([[0.5]], [[1.0], [2.0]])  # B rows mismatch
    with pytest.raises(ConfigError):
        SystemModel([[0.5]], [[1.0]], F=[[1.0, 0.0]])
    with pytest.raises(ConfigError):
        SystemModel([[0.5]], [[1.0]], r=[1.0, 2.0])
    with pytest.raises(ConfigError):
        SystemModel([[np.nan]], [[1.0]])


def test_spectral_radius_and_schur():
    assert SystemModel([[0.5]], [[1.0]]).spectral_radius == pytest.approx(0.5)
    assert SystemModel([[0.5]], [[1.0]]).is_schur
    assert not SystemModel([[1.0]], [[1.0]]).is_schur
    # borderline radius within tolerance of 1 is rejected too
    assert not SystemModel([[1.0 - 1e-13]], [[1.0]]).is_schur
    # rotation: complex eigenvalues, radius 0.9
    c, s = 0.9 * np.cos(0.3), 0.9 * np.sin(0.3)
    assert SystemModel([[c, -s], [s, c]], [[1.0], [0.0]]).spectral_radius == pytest.approx(0.9)


def test_input_constraint_validation():
    con = InputConstraint(10.0, 5.0)
    assert con.u_max == 10.0 and con.phi_max == 5.0
    with pytest.raises(ConfigError):
        InputConstraint(0.0, 1.0)
    with pytest.raises(ConfigError):
        InputConstraint(1.0, -1.0)
    with pytest.raises(ConfigError):
        InputConstraint(1.0, 2.0)  # budget above the hard bound
    with pytest.raises(ConfigError):
        InputConstraint(np.inf, 1.0)


def test_noise_model_basics():
    nm = NoiseModel([0.0, 0.0], [4.0, 9.0])
    assert np.array_equal(nm.sigma, [2.0, 3.0])
    assert nm.is_zero_mean
    assert nm.dim == 2
    assert np.array_equal(nm.stacked_mean(3), np.zeros(6))
    assert np.array_equal(nm.stacked_cov_diag(3), [4.0, 9.0] * 3)
    assert not NoiseModel([0.1, 0.0], [1.0, 1.0]).is_zero_mean


def test_noise_model_errors():
    with pytest.raises(ConfigError):
        NoiseModel([0.0], [-1.0])
    with pytest.raises(ConfigError):
        NoiseModel([0.0, 0.0], [1.0])


def test_cost_broadcast_and_sequences():
    cost = CostSpec(np.eye(2) * 3.0, [[2.0]], N=4)
    assert len(cost.Q) == 5 and len(cost.R) == 4
    assert cost.n == 2 and cost.m == 1 and cost.N == 4
    for Q in cost.Q:
        assert np.array_equal(Q, 3.0 * np.eye(2))
    # per-stage sequences pass through in order
    Qs = [np.eye(1) * (k + 1.0) for k in range(3)]
    cost2 = CostSpec(Qs, [np.eye(1)] * 2, N=2)
    assert cost2.Q[2][0, 0] == 3.0


def test_cost_errors():
    with pytest.raises(ConfigError):
        CostSpec(np.eye(2), np.eye(1), N=0)
    with pytest.raises(ConfigError):
        CostSpec([np.eye(2)] * 3, np.eye(1), N=3)  # needs N+1 stage matrices
    with pytest.raises(ConfigError):
        CostSpec([[1.0, 0.5], [0.2, 1.0]], np.eye(1), N=2)  # asymmetric
    with pytest.raises(ConfigError):
        CostSpec(np.zeros((2, 2)), np.eye(1), N=2)  # not positive definite
    with pytest.raises(ConfigError):
        CostSpec(-np.eye(2), np.eye(1), N=2)


def test_cost_matrices_frozen():
    cost = CostSpec(np.eye(2), np.eye(1), N=2)
    with pytest.raises(ValueError):
        cost.Q[0][0, 0] = 5.0


def test_normalize_affine_formulas():
    rng = np.random.default_rng(11)
    A = 0.3 * rng.standard_normal((3, 3))
    B_hat = rng.standard_normal((3, 2))
    F = rng.standard_normal((3, 3))
    r_hat = rng.standard_normal(3)
    S = np.eye(2) + 0.1 * rng.standard_normal((2, 2))
    l = rng.standard_normal(2)
    mu_hat = rng.standard_normal(3)
    model, noise = normalize_affine(A, B_hat, F, r_hat, S, l, mu_hat, cov_diag=[1.0, 2.0, 3.0])
    assert np.allclose(model.B, B_hat @ S)
    assert np.allclose(model.r, B_hat @ l + r_hat + F @ mu_hat)
    assert noise.is_zero_mean
    assert np.array_equal(noise.cov_diag, [1.0, 2.0, 3.0])

    # one plant step agrees between the original and the normal form
    x = rng.standard_normal(3)
    u = rng.standard_normal(2)
    e = rng.standard_normal(3)  # centered noise sample
    v = S @ u + l
    step_orig = A @ x + B_hat @ v + F @ (mu_hat + e) + r_hat
    step_norm = model.A @ x + model.B @ u + model.F @ e + model.r
    assert np.allclose(step_orig, step_norm, atol=1e-12)


def test_normalize_affine_singular_transform():
    with pytest.raises(ConfigError):
        normalize_affine(
            np.eye(2) * 0.5, np.eye(2), np.eye(2), np.zeros(2),
            np.zeros((2, 2)), np.zeros(2), np.zeros(2),
        )


def _problem(A=None):
    model = SystemModel(A if A is not None else [[0.5]], [[1.0]])
    con = InputConstraint(10.0, 5.0)
    noise = NoiseModel(np.zeros(model.n), np.ones(model.n))
    cost = CostSpec(np.eye(model.n), np.eye(model.m), N=2)
    return model, con, noise, cost


def test_validate_clean():
    report = validate(*_problem())
    assert report.ok
    assert report.is_schur
    assert report.warnings == ()


def test_validate_dimension_errors():
    model, con, noise, cost = _problem()
    bad_cost = CostSpec(np.eye(2), np.eye(1), N=2)
    with pytest.raises(ConfigError):
        validate(model, con, noise, bad_cost)
    bad_noise = NoiseModel(np.zeros(2), np.ones(2))
    with pytest.raises(ConfigError):
        validate(model, con, bad_noise, cost)


def test_validate_warnings():
    report = validate(*_problem(A=[[1.2]]))
    assert report.ok and not report.is_schur
    assert any("Schur" in w for w in report.warnings)

    model, con, noise, cost = _problem()
    tight = InputConstraint(10.0, 1.0)
    report = validate(model, tight, noise, cost, sat=scaled_sigmoid(5.0, 1.0))
    assert any("phi_max" in w for w in report.warnings)
    report = validate(model, tight, noise, cost, sat=standard_sigmoid())
    assert report.warnings == ()
