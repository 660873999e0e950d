"""Plant, input-constraint, noise, and cost descriptions with validation.

The plant is the affine stochastic system

    x_{t+1} = A x_t + B u_t + F w_t + r

with hard elementwise input bound ||u_t||_inf <= u_max and i.i.d. Gaussian
noise w_t. Systems whose input set is a general affine box can be brought
into this normal form with `normalize_affine`.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

SCHUR_TOL = 1e-12


def _as_matrix(name, value, rows=None, cols=None):
    M = np.array(value, dtype=float)
    if M.ndim == 1:
        M = M.reshape(-1, 1)
    if M.ndim != 2:
        raise ConfigError(f"{name} must be a matrix, got array of ndim {M.ndim}")
    if not np.all(np.isfinite(M)):
        raise ConfigError(f"{name} contains non-finite entries")
    if rows is not None and M.shape[0] != rows:
        raise ConfigError(f"{name} must have {rows} rows, got {M.shape[0]}")
    if cols is not None and M.shape[1] != cols:
        raise ConfigError(f"{name} must have {cols} columns, got {M.shape[1]}")
    return M


def _as_vector(name, value, length=None):
    v = np.array(value, dtype=float).reshape(-1)
    if not np.all(np.isfinite(v)):
        raise ConfigError(f"{name} contains non-finite entries")
    if length is not None and v.size != length:
        raise ConfigError(f"{name} must have length {length}, got {v.size}")
    return v


def _freeze(*arrays):
    for a in arrays:
        a.setflags(write=False)


class SystemModel:
    """Affine plant x+ = A x + B u + F w + r.

    Arguments
    ---------
    A : (n, n) state matrix
    B : (n, m) input matrix
    F : (n, n) noise matrix, identity if omitted
    r : (n,) affine drift, zero if omitted
    """

    def __init__(self, A, B, F=None, r=None):
        A = _as_matrix("A", A)
        n = A.shape[0]
        if A.shape[1] != n:
            raise ConfigError(f"A must be square, got shape {A.shape}")
        B = _as_matrix("B", B, rows=n)
        F = np.eye(n) if F is None else _as_matrix("F", F, rows=n, cols=n)
        r = np.zeros(n) if r is None else _as_vector("r", r, n)
        self.A = A
        self.B = B
        self.F = F
        self.r = r
        self.n = n
        self.m = B.shape[1]
        _freeze(self.A, self.B, self.F, self.r)

    @property
    def spectral_radius(self):
        return float(np.max(np.abs(np.linalg.eigvals(self.A))))

    @property
    def is_schur(self):
        # borderline radii are rejected: drift constants degenerate there
        return self.spectral_radius < 1.0 - SCHUR_TOL


class InputConstraint:
    """Hard input bound and saturator budget used by the policy QP.

    `u_max` bounds every input coordinate pathwise. `phi_max` is the constant
    that multiplies the l1 norm of the feedback-gain rows in the QP
    constraint; the hard bound is guaranteed whenever the chosen saturator
    never exceeds it.
    """

    def __init__(self, u_max, phi_max):
        u_max = float(u_max)
        phi_max = float(phi_max)
        if not np.isfinite(u_max) or u_max <= 0:
            raise ConfigError("u_max must be a positive finite number")
        if not np.isfinite(phi_max) or phi_max <= 0:
            raise ConfigError("phi_max must be a positive finite number")
        if phi_max > u_max:
            raise ConfigError("phi_max must not exceed u_max")
        self.u_max = u_max
        self.phi_max = phi_max


class NoiseModel:
    """I.i.d. Gaussian noise with independent components.

    Arguments
    ---------
    mean : (n,) mean of w_t
    cov_diag : (n,) componentwise variances (diagonal covariance)
    """

    def __init__(self, mean, cov_diag):
        mean = _as_vector("noise mean", mean)
        cov_diag = _as_vector("noise cov_diag", cov_diag, mean.size)
        if np.any(cov_diag < 0):
            raise ConfigError("noise variances must be nonnegative")
        self.mean = mean
        self.cov_diag = cov_diag
        self.dim = mean.size
        _freeze(self.mean, self.cov_diag)

    @property
    def sigma(self):
        return np.sqrt(self.cov_diag)

    @property
    def is_zero_mean(self):
        return bool(np.all(self.mean == 0.0))

    def stacked_mean(self, N):
        """Horizon-stacked mean, the N-fold repetition of the step mean."""
        return np.tile(self.mean, N)

    def stacked_cov_diag(self, N):
        return np.tile(self.cov_diag, N)


class CostSpec:
    """Quadratic stage costs over a horizon of N steps.

    Arguments
    ---------
    Q : one (n, n) matrix broadcast to all N+1 stages, or a sequence of N+1
    R : one (m, m) matrix broadcast to all N stages, or a sequence of N
    N : horizon length >= 1

    All matrices must be symmetric positive definite.
    """

    def __init__(self, Q, R, N):
        N = int(N)
        if N < 1:
            raise ConfigError("horizon N must be >= 1")
        self.N = N
        self.Q = self._stage_list("Q", Q, N + 1)
        self.R = self._stage_list("R", R, N)
        self.n = self.Q[0].shape[0]
        self.m = self.R[0].shape[0]

    @staticmethod
    def _stage_list(name, value, count):
        arr = np.asarray(value, dtype=float)
        if arr.ndim <= 2:
            single = _as_matrix(name, np.atleast_2d(arr))
            mats = [single.copy() for _ in range(count)]
        else:
            if arr.shape[0] != count:
                raise ConfigError(f"{name} must supply {count} stage matrices, got {arr.shape[0]}")
            mats = [_as_matrix(f"{name}[{k}]", arr[k]) for k in range(count)]
        out = []
        for k, M in enumerate(mats):
            if M.shape[0] != M.shape[1] or M.shape != mats[0].shape:
                raise ConfigError(f"{name}[{k}] must be square and consistently sized")
            if np.max(np.abs(M - M.T)) > 1e-12:
                raise ConfigError(f"{name}[{k}] must be symmetric within 1e-12")
            M = (M + M.T) / 2.0
            if np.linalg.eigvalsh(M)[0] <= 0:
                raise ConfigError(f"{name}[{k}] must be positive definite")
            _freeze(M)
            out.append(M)
        return tuple(out)


def normalize_affine(A, B_hat, F, r_hat, S, l, noise_mean_hat, cov_diag=None):
    """Absorb an affine input transform and a noise mean into normal form.

    A plant x+ = A x + B_hat v + F w_hat + r_hat with inputs v = S u + l from
    an affine box and noise mean E[w_hat] is rewritten over the centered box
    and zero-mean noise.

    Arguments
    ---------
    S : (m, m) invertible input transform
    l : (m,) input offset
    noise_mean_hat : (n,) mean of the original noise
    cov_diag : (n,) noise variances carried through unchanged, zero if omitted

    Returns
    -------
    (SystemModel, NoiseModel) with B = B_hat S, r = B_hat l + r_hat + F E[w_hat],
    and exactly zero stored noise mean.
    """
    A = _as_matrix("A", A)
    n = A.shape[0]
    B_hat = _as_matrix("B_hat", B_hat, rows=n)
    m = B_hat.shape[1]
    F = _as_matrix("F", F, rows=n, cols=n)
    r_hat = _as_vector("r_hat", r_hat, n)
    S = _as_matrix("S", S, rows=m, cols=m)
    l = _as_vector("l", l, m)
    mu_hat = _as_vector("noise_mean_hat", noise_mean_hat, n)
    if abs(np.linalg.det(S)) < 1e-300:
        raise ConfigError("input-set transform not invertible")
    B = B_hat @ S
    r = B_hat @ l + r_hat + F @ mu_hat
    cov = np.zeros(n) if cov_diag is None else _as_vector("cov_diag", cov_diag, n)
    return SystemModel(A, B, F, r), NoiseModel(np.zeros(n), cov)


@dataclass(frozen=True)
class ValidationReport:
    warnings: tuple
    is_schur: bool

    @property
    def ok(self):
        # hard violations raise during validation, so reaching a report is ok
        return True


def validate(model, constraint, noise, cost, sat=None):
    """Cross-check a full problem description.

    Dimension mismatches and indefinite cost matrices are hard errors.
    Everything that merely disables a downstream capability (certificates,
    the hard-bound guarantee) comes back as a warning.

    Returns
    -------
    ValidationReport with a warnings tuple and the Schur flag.
    """
    if cost.n != model.n:
        raise ConfigError(f"cost matrices are {cost.n}x{cost.n} but the state dimension is {model.n}")
    if cost.m != model.m:
        raise ConfigError(f"R matrices are {cost.m}x{cost.m} but the input dimension is {model.m}")
    if noise.dim != model.n:
        raise ConfigError(f"noise dimension {noise.dim} does not match state dimension {model.n}")
    warnings = []
    if not model.is_schur:
        warnings.append(
            f"A is not Schur stable (spectral radius {model.spectral_radius:.6g}); "
            "variance certificates are unavailable"
        )
    if sat is not None and sat.phi_max > constraint.phi_max:
        warnings.append(
            "saturator bound exceeds the QP budget phi_max; the hard input bound "
            "is not guaranteed pathwise"
        )
    return ValidationReport(warnings=tuple(warnings), is_schur=model.is_schur)
