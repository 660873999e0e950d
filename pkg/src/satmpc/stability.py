"""Foster-Lyapunov certificates of bounded second moments.

For a Schur-stable A the closed loop under either controller admits a
geometric drift condition outside a sublevel set, which yields an explicit
bound on E[||x_t||^2] that holds uniformly in t. This module solves the
discrete Lyapunov equations, assembles the drift constants, and compares
the resulting bound curve against empirical moments from a simulation.
"""

from dataclasses import dataclass

import math
import numpy as np
import scipy.linalg

from .batch import horizon_blocks
from .errors import ConfigError, NumericalError

LYAPUNOV_RESIDUAL_TOL = 1e-8
THETA_GRID_POINTS = 100


def solve_discrete_lyapunov(M):
    """P symmetric positive definite with M' P M - P = -I.

    Arguments
    ---------
    M : square Schur-stable matrix

    Raises ConfigError when M is not Schur stable and NumericalError when
    the residual exceeds 1e-8.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    if np.max(np.abs(np.linalg.eigvals(M))) >= 1.0:
        raise ConfigError("matrix is not Schur stable; no Lyapunov solution exists")
    P = scipy.linalg.solve_discrete_lyapunov(M.T, np.eye(n))
    P = 0.5 * (P + P.T)
    residual = float(np.linalg.norm(M.T @ P @ M - P + np.eye(n), np.inf))
    if not residual <= LYAPUNOV_RESIDUAL_TOL:
        raise NumericalError(f"Lyapunov residual {residual:.3e} exceeds {LYAPUNOV_RESIDUAL_TOL}")
    return P


def _col_sum_norm(M):
    # max column abs sum, which keeps each Hoelder pairing against an
    # inf-norm-bounded vector valid
    M = np.atleast_2d(M)
    if M.size == 0:
        return 0.0
    return float(np.max(np.sum(np.abs(M), axis=0)))


def _pick_theta(lam_max, n, c1, c2):
    # theta trades the drift radius against the contraction factor; scan a
    # log grid over the admissible interval and keep the smallest
    # steady-state offset b/(1-lambda)
    lo = max(0.0, 1.0 - lam_max)
    pad = (1.0 - lo) * 1e-6
    grid = np.geomspace(lo + pad, 1.0 - pad, THETA_GRID_POINTS)
    best = None
    for theta in grid:
        r = (c1 + math.sqrt(c1 * c1 + c2 * theta)) / theta
        lam = 1.0 - (1.0 - theta) / lam_max
        b = lam_max * n * r * r + 2.0 * c1 * r + c2
        score = b / (1.0 - lam)
        if best is None or score < best[0]:
            best = (score, float(theta), r, lam, b)
    _, theta, r, lam, b = best
    return theta, r, lam, b


@dataclass(frozen=True)
class DriftCertificate:
    """One-step drift certificate for the re-solving controller.

    Outside {||x||_inf <= r} the Lyapunov value x' P x contracts by lam in
    expectation; inside, the expected next value is at most b. moment_bound
    propagates this to a per-step bound on E[x_t' P x_t].
    """

    P: np.ndarray
    theta: float
    c1: float
    c2: float
    r: float
    lam: float
    b: float
    lam_min_P: float
    lam_max_P: float

    @property
    def n(self):
        return self.P.shape[0]

    def lyapunov_value(self, x):
        x = np.asarray(x, dtype=float)
        return float(x @ self.P @ x)

    def initial_value(self, x0_batch):
        """Mean of x0' P x0 over rows of x0_batch."""
        X = np.atleast_2d(np.asarray(x0_batch, dtype=float))
        return float(np.mean(np.einsum("ij,jk,ik->i", X, self.P, X)))

    def moment_bound(self, t, v0):
        """Upper bound on E[x_t' P x_t] starting from E[x_0' P x_0] = v0."""
        lt = self.lam ** t
        return lt * v0 + self.b * (1.0 - lt) / (1.0 - self.lam)

    def state_second_moment_bound(self, t, v0):
        return self.moment_bound(t, v0) / self.lam_min_P


@dataclass(frozen=True)
class RhcCertificate:
    """Blockwise drift certificate for the replanning controller.

    Holds per-step families for ell = 1..N and the aggregate constants that
    give a uniform bound at every t = kN + ell. At N = 1 the intermediate
    aggregates are absent and the bound reduces to the one-step form.
    """

    N: int
    n: int
    P_blocks: tuple
    theta: tuple
    c1: tuple
    c2: tuple
    r: tuple
    lam_ell: tuple
    lam: object        # max over ell = 1..N-1, None when N = 1
    r_prime: object
    lam_bar: object
    lam_under: object
    lam_prime: float
    lam_N: float
    r_N: float
    b: float
    b_prime: float
    lam_min_PN: float
    lam_max_PN: float

    @property
    def P_N(self):
        return self.P_blocks[-1]

    def lyapunov_value(self, x):
        x = np.asarray(x, dtype=float)
        return float(x @ self.P_N @ x)

    def initial_value(self, x0_batch):
        """Mean of x0' P_N x0 over rows of x0_batch."""
        X = np.atleast_2d(np.asarray(x0_batch, dtype=float))
        return float(np.mean(np.einsum("ij,jk,ik->i", X, self.P_N, X)))

    def moment_bound(self, t, v0):
        """Upper bound on E[x_t' P_N x_t] at t = kN + ell."""
        k, ell = divmod(int(t), self.N)
        lk = self.lam_N ** k
        if ell == 0:
            return lk * v0 + self.b * (1.0 - lk) / (1.0 - self.lam_N)
        return self.lam_prime * lk * v0 + self.b / (1.0 - self.lam_N) + self.b_prime

    def state_second_moment_bound(self, t, v0):
        return self.moment_bound(t, v0) / self.lam_min_PN


def mpc_drift_constants(model, constraint, noise, P=None):
    """Certificate for the controller that re-solves at every step.

    The constants bound the one-step growth of x' P x under any admissible
    input ||u||_inf <= u_max:

        c1 = ||A'P(F mu + r)||_1 + m ||A'PB|| u_max
        c2 = r'Pr + 2 ||B'P(F mu + r)||_1 u_max + m ||B'PB|| u_max^2
             + 2 |r'P F mu| + tr(F'PF Sigma)

    where the matrix norm is the max column abs sum.
    """
    if P is None:
        P = solve_discrete_lyapunov(model.A)
    if noise.dim != model.F.shape[1]:
        raise ConfigError("noise dimension does not match F")
    A, B, F, rv = model.A, model.B, model.F, model.r
    U = constraint.u_max
    mu = noise.mean
    drift = F @ mu + rv
    c1 = float(np.sum(np.abs(A.T @ P @ drift))) + model.m * _col_sum_norm(A.T @ P @ B) * U
    FtPF = F.T @ P @ F
    c2 = (float(rv @ P @ rv)
          + 2.0 * float(np.sum(np.abs(B.T @ P @ drift))) * U
          + model.m * _col_sum_norm(B.T @ P @ B) * U * U
          + 2.0 * abs(float(rv @ P @ (F @ mu)))
          + float(np.sum(np.diag(FtPF) * noise.cov_diag)))
    eigs = np.linalg.eigvalsh(P)
    theta, r, lam, b = _pick_theta(float(eigs[-1]), model.n, c1, c2)
    return DriftCertificate(P=P, theta=theta, c1=c1, c2=c2, r=r, lam=lam, b=b,
                            lam_min_P=float(eigs[0]), lam_max_P=float(eigs[-1]))


def rhc_drift_constants(model, constraint, noise, lam_matrices):
    """Certificate for the controller that replans every N steps.

    Per step ell the constants follow the one-step pattern with the block
    rollout matrices B_ell, D_ell. The feedback-gain contribution, exactly
    max over the gain budget of tr(G' Bl'PlBl G L1) + 2 tr(G' Bl'PlDlF L2),
    is replaced by the norm product

        (N n)(u_max/phi_max)^2 ||Bl'PlBl||_F ||L1||_F
        + 2 (u_max/phi_max)(N n) ||Bl'PlDlF||_F ||L2||_F

    which dominates it on the whole budget. The aggregate constants give a
    uniform bound valid between replanning instants.
    """
    N = lam_matrices.N
    if lam_matrices.n != model.n:
        raise ConfigError("moment matrices are not sized for the saturated noise signal")
    A_bar, B_bar, D_bar, F_bar, r_bar = horizon_blocks(model, N)
    n, m = model.n, model.m
    U = constraint.u_max
    gain_budget = U / constraint.phi_max
    mu_bar = noise.stacked_mean(N)
    cov_bar = noise.stacked_cov_diag(N)
    drift_bar = F_bar @ mu_bar + r_bar
    # Frobenius norms of the full stacked diagonal moment matrices
    fro1 = math.sqrt(N) * float(np.linalg.norm(lam_matrices.diag1))
    fro2 = math.sqrt(N) * float(np.linalg.norm(lam_matrices.diag2))

    P_blocks, thetas, c1s, c2s, rs, lams = [], [], [], [], [], []
    eig_lo, eig_hi = [], []
    for ell in range(1, N + 1):
        rows = slice(ell * n, (ell + 1) * n)
        A_pow = A_bar[rows]
        B_ell = B_bar[rows]
        D_ell = D_bar[rows]
        P_ell = solve_discrete_lyapunov(A_pow)
        BtP = B_ell.T @ P_ell
        DF = D_ell @ F_bar
        c1 = (float(np.sum(np.abs(A_pow.T @ P_ell @ (D_ell @ drift_bar))))
              + m * _col_sum_norm(A_pow.T @ P_ell @ B_ell) * U)
        gain_term = ((N * n) * gain_budget ** 2 * float(np.linalg.norm(BtP @ B_ell)) * fro1
                     + 2.0 * gain_budget * (N * n) * float(np.linalg.norm(BtP @ DF)) * fro2)
        Dr = D_ell @ r_bar
        c2 = (float(Dr @ P_ell @ Dr)
              + 2.0 * float(np.sum(np.abs(BtP @ (D_ell @ drift_bar)))) * U
              + m * _col_sum_norm(BtP @ B_ell) * U * U
              + 2.0 * abs(float(Dr @ P_ell @ (DF @ mu_bar)))
              + float(np.einsum("ji,jk,ki->", DF, P_ell, DF * cov_bar))
              + gain_term)
        eigs = np.linalg.eigvalsh(P_ell)
        theta, r_ell, lam_ell, _ = _pick_theta(float(eigs[-1]), n, c1, c2)
        P_blocks.append(P_ell)
        thetas.append(theta)
        c1s.append(c1)
        c2s.append(c2)
        rs.append(r_ell)
        lams.append(lam_ell)
        eig_lo.append(float(eigs[0]))
        eig_hi.append(float(eigs[-1]))

    lam_min_PN, lam_max_PN = eig_lo[-1], eig_hi[-1]
    lam_N, r_N = lams[-1], rs[-1]
    b = lam_max_PN * n * r_N * r_N + 2.0 * c1s[-1] * r_N + c2s[-1]
    if N == 1:
        lam = r_prime = lam_bar = lam_under = None
        lam_prime, b_prime = 1.0, 0.0
    else:
        lam = max(lams[:-1])
        r_prime = max(rs[:-1])
        lam_bar = max(eig_hi[:-1])
        lam_under = min(eig_lo[:-1])
        lam_prime = lam * (lam_bar * lam_max_PN) / (lam_under * lam_min_PN)
        b_prime = max((lam_max_PN / eig_lo[ell])
                      * (eig_hi[ell] * n * r_prime * r_prime + 2.0 * c1s[ell] * r_prime + c2s[ell])
                      for ell in range(N - 1))
    return RhcCertificate(
        N=N, n=n,
        P_blocks=tuple(P_blocks), theta=tuple(thetas), c1=tuple(c1s), c2=tuple(c2s),
        r=tuple(rs), lam_ell=tuple(lams),
        lam=lam, r_prime=r_prime, lam_bar=lam_bar, lam_under=lam_under,
        lam_prime=lam_prime, lam_N=lam_N, r_N=r_N, b=b, b_prime=b_prime,
        lam_min_PN=lam_min_PN, lam_max_PN=lam_max_PN,
    )


def certificate_for(model, constraint, noise, lam_matrices=None, mode="mpc"):
    """Certificate for the given controller mode, or None when A is not Schur."""
    if not model.is_schur:
        return None
    if mode == "mpc":
        return mpc_drift_constants(model, constraint, noise)
    if mode == "rhc":
        if lam_matrices is None:
            raise ConfigError("rhc certificate needs the moment matrices")
        return rhc_drift_constants(model, constraint, noise, lam_matrices)
    raise ConfigError(f"unknown controller mode {mode!r}")


@dataclass(frozen=True)
class CheckReport:
    """Outcome of comparing empirical moments against a certificate bound.

    passed is meaningful only when status is 'ok'; status 'no_certificate'
    means the check was skipped because no certificate exists.
    """

    status: str
    passed: bool
    max_ratio: float
    bounds: tuple
    observed: tuple


def empirical_variance_check(summary, cert):
    """Check mean ||x_t||^2 from a simulation against the certificate curve.

    Passes when the empirical mean stays below the bound plus four standard
    errors at every t. Reports the largest observed/bound ratio.
    """
    if cert is None:
        return CheckReport(status="no_certificate", passed=False, max_ratio=0.0,
                           bounds=(), observed=tuple(summary.mean_sq_norm))
    v0 = cert.initial_value(summary.initial_states)
    observed = np.asarray(summary.mean_sq_norm, dtype=float)
    se = np.asarray(summary.sq_norm_se, dtype=float)
    bounds = np.array([cert.state_second_moment_bound(t, v0)
                       for t in range(summary.T + 1)])
    passed = bool(np.all(observed <= bounds + 4.0 * se))
    ratios = np.zeros_like(observed)
    pos = bounds > 0
    ratios[pos] = observed[pos] / bounds[pos]
    ratios[~pos & (observed > 0)] = np.inf
    return CheckReport(status="ok", passed=passed, max_ratio=float(np.max(ratios)),
                       bounds=tuple(float(v) for v in bounds),
                       observed=tuple(float(v) for v in observed))
