"""Stacked horizon matrices for the compact trajectory form.

Over a horizon of N steps the trajectory satisfies

    x_bar = A_bar x0 + B_bar u_bar + D_bar F_bar w_bar + D_bar r_bar

where x_bar stacks x_0..x_N, u_bar stacks the N inputs, and w_bar the N
noise vectors. Row block ell of A_bar is A^ell; B_bar and D_bar are strictly
lower block triangular with first block row zero.
"""

from scipy.linalg import block_diag
import numpy as np

from .errors import ConfigError


class BatchMatrices:
    """Container for the stacked matrices of one horizon.

    Fields: A_bar ((N+1)n, n), B_bar ((N+1)n, Nm), D_bar ((N+1)n, Nn),
    F_bar (Nn, Nn), r_bar (Nn,), Q_bar ((N+1)n, (N+1)n), R_bar (Nm, Nm),
    plus the dimensions N, n, m.
    """

    def __init__(self, A_bar, B_bar, D_bar, F_bar, r_bar, Q_bar, R_bar, N, n, m):
        self.A_bar = A_bar
        self.B_bar = B_bar
        self.D_bar = D_bar
        self.F_bar = F_bar
        self.r_bar = r_bar
        self.Q_bar = Q_bar
        self.R_bar = R_bar
        self.N = N
        self.n = n
        self.m = m
        for M in (A_bar, B_bar, D_bar, F_bar, r_bar, Q_bar, R_bar):
            M.setflags(write=False)


def _matrix_powers(A, N):
    # repeated multiplication, exact also for defective A
    powers = [np.eye(A.shape[0])]
    for _ in range(N):
        powers.append(A @ powers[-1])
    return powers


def horizon_blocks(model, N):
    """Stack the dynamics-only matrices for a horizon of N steps.

    Returns
    -------
    (A_bar, B_bar, D_bar, F_bar, r_bar) without any cost weighting.
    """
    if N < 1:
        raise ConfigError("horizon N must be >= 1")
    n, m = model.n, model.m
    powers = _matrix_powers(model.A, N)
    A_bar = np.vstack(powers)
    D_bar = np.zeros(((N + 1) * n, N * n))
    for ell in range(1, N + 1):
        for j in range(ell):
            D_bar[ell * n:(ell + 1) * n, j * n:(j + 1) * n] = powers[ell - 1 - j]
    B_bar = D_bar @ np.kron(np.eye(N), model.B)
    F_bar = np.kron(np.eye(N), model.F)
    r_bar = np.tile(model.r, N)
    return A_bar, B_bar, D_bar, F_bar, r_bar


def build_batch(model, cost):
    """Build the full stacked-matrix set for a model and a cost over N steps.

    Arguments
    ---------
    model : SystemModel
    cost : CostSpec whose dimensions match the model

    Returns
    -------
    BatchMatrices
    """
    if cost.n != model.n or cost.m != model.m:
        raise ConfigError("cost dimensions do not match the model")
    N = cost.N
    A_bar, B_bar, D_bar, F_bar, r_bar = horizon_blocks(model, N)
    Q_bar = block_diag(*cost.Q)
    R_bar = block_diag(*cost.R)
    return BatchMatrices(A_bar, B_bar, D_bar, F_bar, r_bar, Q_bar, R_bar, N, model.n, model.m)


def extract_step(batch, ell):
    """Pull the single-step rollout matrices for step ell of the block.

    x_{kN+ell} = A^ell x_{kN} + B_ell u_bar + D_ell F_bar w_bar + D_ell r_bar.

    Arguments
    ---------
    ell : step index in 1..N

    Returns
    -------
    (A_pow, B_ell, D_ell) where A_pow is n x n and B_ell, D_ell are the
    block row ell of B_bar and D_bar.
    """
    if not 1 <= ell <= batch.N:
        raise ConfigError(f"step index must be in 1..{batch.N}, got {ell}")
    n = batch.n
    rows = slice(ell * n, (ell + 1) * n)
    A_pow = batch.A_bar[rows].copy()
    B_ell = batch.B_bar[rows].copy()
    D_ell = batch.D_bar[rows].copy()
    return A_pow, B_ell, D_ell
