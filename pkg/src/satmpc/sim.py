"""Closed-loop Monte-Carlo engine.

Runs MPC or RHC trajectories from sampled initial conditions under sampled
Gaussian noise, recording states, inputs, stage costs and reconstructed
noise. Randomness follows a documented stream layout: the root seed spawns
one child per trial, and each trial child spawns (x0 stream, noise stream),
all PCG64. The layout is mode independent, so both controller modes see
identical initial conditions and noise when given the same seed, and
extending the trial count leaves existing trials' draws unchanged.
"""

from dataclasses import dataclass

import math
import numpy as np

from .control import ClosedLoopController, reconstruct_noise
from .errors import ConfigError, NumericalError
from .qp import PolicySolver
from .batch import build_batch


class FixedX0:
    """Initial-condition sampler returning a constant vector."""

    def __init__(self, value):
        self.value = np.asarray(value, dtype=float).reshape(-1)

    def draw(self, rng):
        return self.value.copy()


class UniformBoxX0:
    """Initial-condition sampler uniform over an axis-aligned box."""

    def __init__(self, lo, hi):
        self.lo = np.asarray(lo, dtype=float).reshape(-1)
        self.hi = np.asarray(hi, dtype=float).reshape(-1)
        if self.lo.size != self.hi.size or np.any(self.lo > self.hi):
            raise ConfigError("uniform_box bounds must satisfy lo <= hi componentwise")

    def draw(self, rng):
        return rng.uniform(self.lo, self.hi)


@dataclass(frozen=True)
class TrajectoryRecord:
    """One simulated closed-loop path."""

    trial: int
    seed: int
    states: np.ndarray       # (T+1, n)
    inputs: np.ndarray       # (T, m)
    stage_costs: np.ndarray  # (T,), x_t' Q x_t + u_t' R u_t
    noises: np.ndarray       # (T, n), reconstructed F w per step
    initial_state_cost: float
    terminal_state_cost: float


@dataclass(frozen=True)
class SimulationSummary:
    """Aggregates across trials."""

    mode: str
    T: int
    trials: int
    seed: int
    indices: tuple
    index_mean: float
    index_se: float
    successor_indices: tuple
    successor_index_mean: float
    successor_index_se: float
    mean_sq_norm: tuple      # length T+1, mean of ||x_t||^2 across trials
    sq_norm_se: tuple
    max_input_abs: float
    initial_states: np.ndarray
    failures: tuple


def performance_index(record, include_terminal=False):
    """Running cost sum_{t=0}^{T-1} (x_t' Q x_t + u_t' R u_t).

    With `include_terminal` the cost of the final state is added as well.
    """
    total = float(np.sum(record.stage_costs))
    if include_terminal:
        total += record.terminal_state_cost
    return total


def successor_state_index(record):
    """Running cost charging each input with the state it produces.

    Equals sum_{t=0}^{T-1} (x_{t+1}' Q x_{t+1} + u_t' R u_t), i.e. the plain
    running cost with the initial-state cost swapped for the terminal one.
    This is the accounting that matches the published benchmark indices.
    """
    return (performance_index(record)
            - record.initial_state_cost + record.terminal_state_cost)


def _mean_se(values):
    arr = np.asarray(values, dtype=float)
    mean = float(np.mean(arr))
    se = float(np.std(arr, ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0
    return mean, se


def simulate(model, constraint, noise, cost, sat, lam, mode, T, trials, x0_sampler, seed,
             settings=None):
    """Run closed-loop Monte Carlo for one controller mode.

    In rhc mode the planning horizon is rounded up to a whole number of
    blocks; reporting is truncated at T. A solver failure aborts only the
    affected trial and is reported in the summary's `failures`.

    Arguments
    ---------
    mode : 'mpc' or 'rhc'
    T : reported trajectory length, >= 1
    trials : number of independent trials, >= 1
    x0_sampler : FixedX0 or UniformBoxX0
    seed : root seed for the documented stream layout

    Returns
    -------
    (SimulationSummary, list of TrajectoryRecord ordered by trial id)
    """
    T = int(T)
    trials = int(trials)
    if T < 1 or trials < 1:
        raise ConfigError("T and trials must both be >= 1")
    batch = build_batch(model, cost)
    N = batch.N
    T_plan = T if mode == "mpc" else N * ((T + N - 1) // N)
    solver = PolicySolver(batch, noise, lam, constraint, settings=settings)
    Q0 = cost.Q[0]
    R0 = cost.R[0]

    root = np.random.SeedSequence(seed)
    children = root.spawn(trials)
    records = []
    failures = []
    for trial in range(trials):
        x0_stream, noise_stream = children[trial].spawn(2)
        rng_x0 = np.random.Generator(np.random.PCG64(x0_stream))
        rng_w = np.random.Generator(np.random.PCG64(noise_stream))
        x0 = x0_sampler.draw(rng_x0)
        if x0.size != model.n:
            raise ConfigError("x0 sampler dimension does not match the model")
        w = noise.mean + noise.sigma * rng_w.standard_normal((T_plan, model.n))

        controller = ClosedLoopController(mode, solver, sat, model)
        states = np.zeros((T + 1, model.n))
        inputs = np.zeros((T, model.m))
        costs = np.zeros(T)
        noises = np.zeros((T, model.n))
        states[0] = x0
        x = x0
        try:
            for t in range(T):
                u = controller.input_for(x)
                x_next = model.A @ x + model.B @ u + model.F @ w[t] + model.r
                controller.observe(x, u, x_next)
                inputs[t] = u
                costs[t] = float(x @ Q0 @ x + u @ R0 @ u)
                noises[t] = reconstruct_noise(x_next, x, u, model)
                states[t + 1] = x_next
                x = x_next
        except NumericalError:
            failures.append(trial)
            continue
        records.append(TrajectoryRecord(
            trial=trial, seed=seed,
            states=states, inputs=inputs, stage_costs=costs, noises=noises,
            initial_state_cost=float(x0 @ Q0 @ x0),
            terminal_state_cost=float(states[T] @ Q0 @ states[T]),
        ))
    if not records:
        raise NumericalError(f"all {trials} trials failed in the solver")

    indices = tuple(performance_index(rec) for rec in records)
    succ = tuple(successor_state_index(rec) for rec in records)
    index_mean, index_se = _mean_se(indices)
    succ_mean, succ_se = _mean_se(succ)
    sq = np.array([np.sum(rec.states ** 2, axis=1) for rec in records])  # (trials, T+1)
    mean_sq = np.mean(sq, axis=0)
    if len(records) > 1:
        se_sq = np.std(sq, axis=0, ddof=1) / math.sqrt(len(records))
    else:
        se_sq = np.zeros(T + 1)
    summary = SimulationSummary(
        mode=mode, T=T, trials=trials, seed=seed,
        indices=indices, index_mean=index_mean, index_se=index_se,
        successor_indices=succ, successor_index_mean=succ_mean, successor_index_se=succ_se,
        mean_sq_norm=tuple(float(v) for v in mean_sq),
        sq_norm_se=tuple(float(v) for v in se_sq),
        max_input_abs=float(max(np.max(np.abs(rec.inputs)) for rec in records)),
        initial_states=np.array([rec.states[0] for rec in records]),
        failures=tuple(failures),
    )
    return summary, records
