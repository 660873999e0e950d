"""Closed-loop execution of the optimized policies.

MPC re-solves the program at every step and applies the feedforward of the
first stage; the first block row of the gain is structurally zero, so no
noise feedback enters the applied input. RHC solves once per block of N
steps and plays the full policy through the block, feeding back saturated
reconstructed noise.
"""

import numpy as np

from .errors import ConfigError


def reconstruct_noise(x_next, x, u, model):
    """Recover the noise contribution F w from two consecutive states.

    Returns x_next - A x - B u - r exactly.
    """
    return (np.asarray(x_next, dtype=float) - model.A @ x - model.B @ u - model.r)


def mpc_step(x, solver):
    """Solve at the current state and return the applied input.

    Returns
    -------
    (u, policy) where u is the first-stage feedforward d*_0.
    """
    policy, _ = solver.solve_at(x)
    return policy.d_bar[:solver.m].copy(), policy


def rhc_plan(x_block, solver):
    """Solve the block program at the block-start state."""
    policy, _ = solver.solve_at(x_block)
    return policy


def rhc_step(policy, sat, ell, noise_history, model):
    """Input for step ell of an RHC block.

    u = d*_ell + sum_{i < ell} G_{ell,i} phi(F w_i) with phi applied
    elementwise to each reconstructed noise vector.

    Arguments
    ---------
    ell : step index within the block, 0-based
    noise_history : list of the ell reconstructed F w vectors so far
    """
    n, m = model.n, model.m
    if len(noise_history) != ell:
        raise ConfigError(f"noise history holds {len(noise_history)} steps, expected {ell}")
    u = policy.d_bar[ell * m:(ell + 1) * m].copy()
    for i, fw in enumerate(noise_history):
        block = policy.G_bar[ell * m:(ell + 1) * m, i * n:(i + 1) * n]
        u += block @ sat.evaluate(fw)
    return u


class ClosedLoopController:
    """Stateful per-trajectory controller for either mode.

    Call `input_for(x)` to get the input at the current step, apply it, and
    then call `observe(x, u, x_next)` so the RHC mode can reconstruct the
    realized noise. MPC ignores observations by design: its applied input
    depends on the current state only.
    """

    def __init__(self, mode, solver, sat, model):
        if mode not in ("mpc", "rhc"):
            raise ConfigError(f"mode must be 'mpc' or 'rhc', got {mode!r}")
        self.mode = mode
        self.solver = solver
        self.sat = sat
        self.model = model
        self.N = solver.N
        self.policy = None
        self.block_start = None
        self.noise_history = []
        self.ell = 0

    def input_for(self, x):
        if self.mode == "mpc":
            u, self.policy = mpc_step(x, self.solver)
            return u
        if self.ell == 0:
            self.policy = rhc_plan(x, self.solver)
            self.block_start = np.array(x, dtype=float)
            self.noise_history = []
        return rhc_step(self.policy, self.sat, self.ell, self.noise_history, self.model)

    def observe(self, x, u, x_next):
        if self.mode == "mpc":
            return
        self.noise_history.append(reconstruct_noise(x_next, x, u, self.model))
        self.ell += 1
        if self.ell == self.N:
            self.ell = 0
