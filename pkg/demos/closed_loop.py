"""MPC versus RHC on the published benchmark.

Both controllers solve the same program; MPC re-solves it at every step
and applies only the feedforward, RHC solves once per horizon block and
plays the saturated noise feedback through the block. Shared random
numbers make the comparison paired: same seeds, same initial states,
same noise paths.
"""

import numpy as np

from satmpc import compute_moments, simulate
from satmpc.cli import benchmark_config

cfg = benchmark_config()
lam = compute_moments(cfg.sat, cfg.noise, cfg.cost.N, mode="paper_form")

T, trials, seed = 40, 20, 2026
print(f"T = {T}, trials = {trials}, horizon N = {cfg.cost.N}, seed = {seed}\n")

results = {}
for mode in ("mpc", "rhc"):
    summary, records = simulate(cfg.model, cfg.constraint, cfg.noise, cfg.cost,
                                cfg.sat, lam, mode, T, trials, cfg.sim["x0"], seed)
    results[mode] = summary
    print(f"{mode}: index {summary.successor_index_mean:9.1f}"
          f" +- {summary.successor_index_se:6.1f}"
          f"   max |u| = {summary.max_input_abs:.3f}"
          f"   failures = {len(summary.failures)}")

gap = results["rhc"].successor_index_mean - results["mpc"].successor_index_mean
print(f"\nrhc pays {gap:.1f} more on average for solving 1/{cfg.cost.N} as many programs;")
print("re-solving folds every observed state back in, replanning only feeds")
print("back the saturated noise within a block.")
