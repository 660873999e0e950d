"""Assembly and solution of the policy optimization program.

The decision variables are the noise-feedback gain G_bar (strictly lower
block triangular, so only causal feedback enters) and the feedforward d_bar.
With zero-mean noise the expected cost is

    b^T d + d^T M1 d + tr(G^T M1 G lambda1) + tr(M2 G lambda2) + c

subject to the rowwise budget |d_i| + phi_max ||G_i||_1 <= u_max, which
guarantees the hard input bound for every noise realization. The row budget
is linearized with auxiliary variables T_ij >= |G_ij|, giving a standard
inequality-constrained QP handed to OSQP; solutions are then projected
exactly onto the row budgets and KKT residuals are recomputed from scratch.
"""

from dataclasses import dataclass

import numpy as np
import osqp
import scipy.sparse as sp

from .errors import ConfigError, NumericalError


@dataclass(frozen=True)
class SolveSettings:
    max_iter: int = 1_000_000
    eps_abs: float = 1e-11
    eps_rel: float = 1e-11


# contract thresholds for a returned solution
PRIMAL_TOL = 1e-6
DUAL_TOL = 1e-6
COMP_TOL = 1e-6


@dataclass(frozen=True)
class QpProblem:
    """Data of one policy program instance."""

    b: np.ndarray
    M1: np.ndarray
    M2: np.ndarray
    c: float
    lam: object
    u_max: float
    phi_max: float
    structure_mask: np.ndarray
    N: int
    n: int
    m: int


@dataclass(frozen=True)
class PolicyParameters:
    """Solver output: the policy plus optimality diagnostics.

    `objective` is the x0-dependent part of the expected cost (without the
    constant c); `evaluate_expected_cost` adds c back. `feasibility_margin`
    is min over rows of u_max - |d_i| - phi_max ||G_i||_1.
    """

    G_bar: np.ndarray
    d_bar: np.ndarray
    objective: float
    kkt_residual: float
    feasibility_margin: float


@dataclass(frozen=True)
class EpigraphQp:
    """Standard-form QP min 1/2 z^T H z + h^T z s.t. E z <= e.

    z stacks the free entries of G_bar, then d_bar, then the auxiliary
    absolute-value bounds T (one per free entry). z = 0 is always feasible.
    """

    H: np.ndarray
    h: np.ndarray
    E: np.ndarray
    e: np.ndarray
    free: tuple
    N: int
    n: int
    m: int


def structure_mask(N, n, m):
    # block row ell may feed back noise blocks j < ell only; first row zero
    mask = np.zeros((N * m, N * n), dtype=bool)
    for i in range(N * m):
        for j in range(N * n):
            mask[i, j] = (i // m) > (j // n)
    return mask


def assemble(batch, x0, noise, lam, constraint):
    """Build the QP data for initial state x0.

    Arguments
    ---------
    batch : BatchMatrices over horizon N
    x0 : (n,) current state
    noise : zero-mean NoiseModel (the moment formulas assume E[phi] = 0)
    lam : MomentMatrices of matching dimension
    constraint : InputConstraint

    Returns
    -------
    QpProblem
    """
    N, n, m = batch.N, batch.n, batch.m
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.size != n:
        raise ConfigError(f"x0 must have length {n}, got {x0.size}")
    if noise.dim != n:
        raise ConfigError("noise dimension does not match the model")
    if not noise.is_zero_mean:
        raise ConfigError("assemble assumes zero-mean noise; use normalize_affine first")
    if lam.dim != N * n:
        raise ConfigError(f"moment matrices have dimension {lam.dim}, expected {N * n}")

    A_bar, B_bar, D_bar, F_bar, r_bar = batch.A_bar, batch.B_bar, batch.D_bar, batch.F_bar, batch.r_bar
    Q_bar = batch.Q_bar
    mu_bar = noise.stacked_mean(N)
    cov_bar = noise.stacked_cov_diag(N)

    drift = A_bar @ x0 + D_bar @ r_bar
    b = 2.0 * (drift + D_bar @ (F_bar @ mu_bar)) @ Q_bar @ B_bar
    M1 = batch.R_bar + B_bar.T @ Q_bar @ B_bar
    M2 = 2.0 * F_bar.T @ D_bar.T @ Q_bar @ B_bar
    DF = D_bar @ F_bar
    QDF = Q_bar @ DF
    trace_term = float(np.einsum("ij,ij,j->", DF, QDF, cov_bar))
    c = float(drift @ Q_bar @ drift + trace_term + 2.0 * drift @ QDF @ mu_bar)
    return QpProblem(
        b=b, M1=M1, M2=M2, c=c, lam=lam,
        u_max=constraint.u_max, phi_max=constraint.phi_max,
        structure_mask=structure_mask(N, n, m), N=N, n=n, m=m,
    )


def reformulate_epigraph(qp):
    """Rewrite the policy program as min 1/2 z^T H z + h^T z, E z <= e."""
    mask = qp.structure_mask
    free = tuple((i, j) for i in range(mask.shape[0]) for j in range(mask.shape[1]) if mask[i, j])
    nf = len(free)
    Nm = qp.N * qp.m
    nz = nf + Nm + nf
    L1 = qp.lam.lambda1
    L2 = qp.lam.lambda2

    H = np.zeros((nz, nz))
    if nf:
        rows = np.array([p[0] for p in free])
        cols = np.array([p[1] for p in free])
        # tr(G^T M1 G L1) as a quadratic form over the free entries
        H[:nf, :nf] = 2.0 * qp.M1[np.ix_(rows, rows)] * L1[np.ix_(cols, cols)]
    H[nf:nf + Nm, nf:nf + Nm] = 2.0 * qp.M1

    h = np.zeros(nz)
    lin = qp.M2.T @ L2.T
    for p, (i, j) in enumerate(free):
        h[p] = lin[i, j]
    h[nf:nf + Nm] = qp.b

    n_rows = 2 * nf + 2 * Nm
    E = np.zeros((n_rows, nz))
    e = np.zeros(n_rows)
    for p in range(nf):
        E[2 * p, p] = 1.0
        E[2 * p, nf + Nm + p] = -1.0
        E[2 * p + 1, p] = -1.0
        E[2 * p + 1, nf + Nm + p] = -1.0
    row = 2 * nf
    for i in range(Nm):
        for sign in (1.0, -1.0):
            E[row, nf + i] = sign
            for p, (ip, _) in enumerate(free):
                if ip == i:
                    E[row, nf + Nm + p] = qp.phi_max
            e[row] = qp.u_max
            row += 1
    return EpigraphQp(H=H, h=h, E=E, e=e, free=free, N=qp.N, n=qp.n, m=qp.m)


def _objective_value(qp, G, d):
    L1 = qp.lam.lambda1
    L2 = qp.lam.lambda2
    return float(qp.b @ d + d @ qp.M1 @ d
                 + np.trace(G.T @ qp.M1 @ G @ L1) + np.trace(qp.M2 @ G @ L2))


def _project_rows(qp, G, d):
    # exact rescale of any row whose budget is violated; cheap and keeps
    # the objective change at the order of the violation
    rowsum = np.abs(d) + qp.phi_max * np.abs(G).sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(rowsum > qp.u_max, qp.u_max / rowsum, 1.0)
    return G * scale[:, None], d * scale


def _kkt_residual(epi, z, y):
    slack = epi.E @ z - epi.e
    prim = max(0.0, float(np.max(slack))) / (1.0 + float(np.max(np.abs(epi.e), initial=0.0)))
    dual = float(np.max(np.abs(epi.H @ z + epi.h + epi.E.T @ y)))
    comp = float(np.max(np.abs(y * slack)))
    return prim, dual, comp


def _extract(qp, epi, z, y):
    nf = len(epi.free)
    Nm = qp.N * qp.m
    G = np.zeros((Nm, qp.N * qp.n))
    for p, (i, j) in enumerate(epi.free):
        G[i, j] = z[p]
    d = z[nf:nf + Nm].copy()
    G, d = _project_rows(qp, G, d)
    prim, dual, comp = _kkt_residual(epi, z, y)
    if prim > PRIMAL_TOL or dual > DUAL_TOL or comp > COMP_TOL:
        raise NumericalError(
            f"solver residuals exceed contract: primal {prim:.2e}, dual {dual:.2e}, "
            f"complementarity {comp:.2e}",
            best_estimate=(G, d),
        )
    margin = float(np.min(qp.u_max - np.abs(d) - qp.phi_max * np.abs(G).sum(axis=1)))
    return PolicyParameters(
        G_bar=G, d_bar=d,
        objective=_objective_value(qp, G, d),
        kkt_residual=max(prim, dual, comp),
        feasibility_margin=margin,
    )


def _setup_osqp(epi, settings):
    P = sp.csc_matrix(np.triu(epi.H))
    A = sp.csc_matrix(epi.E)
    prob = osqp.OSQP()
    prob.setup(P, epi.h, A, -np.inf * np.ones(epi.e.size), epi.e,
               eps_abs=settings.eps_abs, eps_rel=settings.eps_rel,
               max_iter=settings.max_iter, polishing=False, verbose=False,
               scaled_termination=False)
    return prob


def _run_osqp(prob):
    # status is checked by hand below, so the solver must not raise itself
    res = prob.solve(raise_error=False)
    status = res.info.status
    if "solved" not in status:
        raise NumericalError(f"QP solver stopped with status {status!r}", best_estimate=res.x)
    return res.x, res.y


def solve(qp, settings=None):
    """Solve one policy program instance.

    Returns
    -------
    PolicyParameters; raises NumericalError if the solver stalls or the
    recomputed KKT residuals break the accuracy contract.
    """
    settings = settings or SolveSettings()
    epi = reformulate_epigraph(qp)
    prob = _setup_osqp(epi, settings)
    z, y = _run_osqp(prob)
    return _extract(qp, epi, z, y)


def evaluate_expected_cost(policy, qp):
    """Expected cost of a policy under the program's moment data.

    Returns the full expectation, i.e. the solver objective plus the
    constant c.
    """
    G, d = policy.G_bar, policy.d_bar
    if G.shape != qp.structure_mask.shape or d.size != qp.N * qp.m:
        raise ConfigError("policy dimensions do not match the program")
    if np.any(G[~qp.structure_mask] != 0.0):
        raise ConfigError("policy violates the causal structure mask")
    return _objective_value(qp, G, d) + qp.c


class PolicySolver:
    """Reusable solver for a fixed problem family, varying only x0.

    Only the linear term of the QP depends on the current state, so the
    epigraph matrices and the OSQP workspace are built once; subsequent
    states update the linear term and warm start from the previous solution.

    Arguments
    ---------
    batch : BatchMatrices
    noise : zero-mean NoiseModel
    lam : MomentMatrices
    constraint : InputConstraint
    """

    def __init__(self, batch, noise, lam, constraint, settings=None):
        self.batch = batch
        self.noise = noise
        self.lam = lam
        self.constraint = constraint
        self.settings = settings or SolveSettings()
        self.N, self.n, self.m = batch.N, batch.n, batch.m
        self._template = assemble(batch, np.zeros(batch.n), noise, lam, constraint)
        self._epi = reformulate_epigraph(self._template)
        self._nf = len(self._epi.free)
        # b(x0) = (A_bar x0 + offset) @ W with a constant offset
        self._W = 2.0 * (batch.Q_bar @ batch.B_bar)
        self._offset = batch.D_bar @ (batch.F_bar @ noise.stacked_mean(batch.N)) + batch.D_bar @ batch.r_bar
        self._drift0 = batch.D_bar @ batch.r_bar
        self._QDF = batch.Q_bar @ (batch.D_bar @ batch.F_bar)
        self._ctrace = self._template.c  # c at x0 = 0 carries the pure noise terms
        self._prob = _setup_osqp(self._epi, self.settings)

    def problem_at(self, x0):
        """Assemble the QpProblem for a given state without solving it."""
        return assemble(self.batch, x0, self.noise, self.lam, self.constraint)

    def solve_at(self, x0):
        """Solve at state x0 with the warm-started workspace.

        Returns (PolicyParameters, QpProblem), the problem carrying the
        constant term c for expected-cost evaluation.
        """
        x0 = np.asarray(x0, dtype=float).reshape(-1)
        if x0.size != self.n:
            raise ConfigError(f"x0 must have length {self.n}, got {x0.size}")
        Ax = self.batch.A_bar @ x0
        b = (Ax + self._offset) @ self._W
        h = self._epi.h.copy()
        h[self._nf:self._nf + self.N * self.m] = b
        self._prob.update(q=h)
        z, y = _run_osqp(self._prob)
        epi = EpigraphQp(H=self._epi.H, h=h, E=self._epi.E, e=self._epi.e,
                         free=self._epi.free, N=self.N, n=self.n, m=self.m)
        drift = Ax + self._drift0
        extra = float(drift @ self.batch.Q_bar @ drift - self._drift0 @ self.batch.Q_bar @ self._drift0
                      + 2.0 * (drift - self._drift0) @ self._QDF @ self.noise.stacked_mean(self.N))
        qp = QpProblem(
            b=b, M1=self._template.M1, M2=self._template.M2, c=self._ctrace + extra,
            lam=self.lam, u_max=self.constraint.u_max, phi_max=self.constraint.phi_max,
            structure_mask=self._template.structure_mask, N=self.N, n=self.n, m=self.m,
        )
        return _extract(qp, epi, z, y), qp
