"""Command line front door.

Subcommands: moments, solve, simulate, certify, reproduce-paper. Each reads
a JSON run configuration (reproduce-paper carries its own preset), writes
its artifacts atomically into --out, and prints the main result to stdout.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 not certifiable.
"""

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .batch import build_batch
from .errors import ConfigError, NotCertifiableError, NumericalError
from .model import CostSpec, InputConstraint, NoiseModel, SystemModel, validate
from .moments import (Saturator, compute_moments, lambda_paper_form,
                      piecewise_linear, scaled_sigmoid, standard_saturation,
                      standard_sigmoid)
from .qp import assemble, solve
from .sim import FixedX0, UniformBoxX0, simulate, successor_state_index
from .stability import (certificate_for, empirical_variance_check,
                        mpc_drift_constants, rhc_drift_constants)

SCHEMA_VERSION = 1
REPRODUCE_SEED = 20260818
PAPER_TARGETS = {"mpc": 3985.0, "rhc": 4327.0}

_TOP_KEYS = ("system", "constraint", "noise", "saturator", "cost", "sim", "moments")
_MOMENT_MODES = ("paper_form", "quadrature", "monte_carlo")


# ---------------------------------------------------------------- config

def _check_keys(section, d, allowed):
    if not isinstance(d, dict):
        raise ConfigError(f"{section} must be a JSON object")
    unknown = sorted(set(d) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown keys in {section}: {', '.join(unknown)}")


def _need(section, d, key):
    if key not in d:
        raise ConfigError(f"{section} is missing required key {key!r}")
    return d[key]


def _int(section, d, key, default=None):
    if key not in d:
        if default is None:
            raise ConfigError(f"{section} is missing required key {key!r}")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{section}.{key} must be an integer")
    return v


class RunConfig:
    """Parsed run configuration; sections not present are None."""

    def __init__(self, model=None, constraint=None, noise=None, sat=None,
                 cost=None, sim=None, moments=None):
        self.model = model
        self.constraint = constraint
        self.noise = noise
        self.sat = sat
        self.cost = cost
        self.sim = sim
        self.moments = moments or {"mode": "quadrature", "tol": 1e-10,
                                   "mc_samples": 100_000}

    def require(self, *names):
        missing = [n for n in names if getattr(self, n) is None]
        if missing:
            raise ConfigError("config is missing required section(s): "
                              + ", ".join(missing))


def _parse_saturator(sec):
    _check_keys("saturator", sec, ("kind", "params"))
    kind = _need("saturator", sec, "kind")
    params = sec.get("params", {})
    if kind == "standard_sigmoid":
        _check_keys("saturator.params", params, ())
        return standard_sigmoid()
    if kind == "standard_saturation":
        _check_keys("saturator.params", params, ())
        return standard_saturation()
    if kind == "scaled_sigmoid":
        _check_keys("saturator.params", params, ("M", "alpha"))
        return scaled_sigmoid(_need("saturator.params", params, "M"),
                              _need("saturator.params", params, "alpha"))
    if kind == "piecewise_linear":
        _check_keys("saturator.params", params, ("breakpoints",))
        return piecewise_linear(_need("saturator.params", params, "breakpoints"))
    raise ConfigError(f"unknown saturator kind {kind!r}")


def _parse_x0(sec):
    _check_keys("sim.x0", sec, ("fixed", "uniform_box"))
    if ("fixed" in sec) == ("uniform_box" in sec):
        raise ConfigError("sim.x0 must have exactly one of 'fixed' or 'uniform_box'")
    if "fixed" in sec:
        return FixedX0(sec["fixed"])
    box = sec["uniform_box"]
    _check_keys("sim.x0.uniform_box", box, ("lo", "hi"))
    return UniformBoxX0(_need("sim.x0.uniform_box", box, "lo"),
                        _need("sim.x0.uniform_box", box, "hi"))


def parse_config(raw):
    """Build a RunConfig from a decoded JSON object, rejecting unknown keys."""
    _check_keys("config", raw, _TOP_KEYS)
    kw = {}
    if "system" in raw:
        sec = raw["system"]
        _check_keys("system", sec, ("A", "B", "F", "r"))
        kw["model"] = SystemModel(_need("system", sec, "A"), _need("system", sec, "B"),
                                  sec.get("F"), sec.get("r"))
    if "constraint" in raw:
        sec = raw["constraint"]
        _check_keys("constraint", sec, ("u_max", "phi_max"))
        kw["constraint"] = InputConstraint(_need("constraint", sec, "u_max"),
                                           _need("constraint", sec, "phi_max"))
    if "noise" in raw:
        sec = raw["noise"]
        _check_keys("noise", sec, ("mean", "cov_diag"))
        kw["noise"] = NoiseModel(_need("noise", sec, "mean"),
                                 _need("noise", sec, "cov_diag"))
    if "saturator" in raw:
        kw["sat"] = _parse_saturator(raw["saturator"])
    if "cost" in raw:
        sec = raw["cost"]
        _check_keys("cost", sec, ("Q", "R", "N"))
        kw["cost"] = CostSpec(_need("cost", sec, "Q"), _need("cost", sec, "R"),
                              _int("cost", sec, "N"))
    if "sim" in raw:
        sec = raw["sim"]
        _check_keys("sim", sec, ("mode", "T", "trials", "seed", "x0"))
        mode = sec.get("mode", "mpc")
        if mode not in ("mpc", "rhc"):
            raise ConfigError(f"sim.mode must be 'mpc' or 'rhc', got {mode!r}")
        kw["sim"] = {
            "mode": mode,
            "T": _int("sim", sec, "T"),
            "trials": _int("sim", sec, "trials"),
            "seed": _int("sim", sec, "seed", default=0),
            "x0": _parse_x0(_need("sim", sec, "x0")),
        }
    if "moments" in raw:
        sec = raw["moments"]
        _check_keys("moments", sec, ("mode", "tol", "mc_samples"))
        mode = sec.get("mode", "quadrature")
        if mode not in _MOMENT_MODES:
            raise ConfigError(f"moments.mode must be one of {_MOMENT_MODES}, got {mode!r}")
        tol = float(sec.get("tol", 1e-10))
        kw["moments"] = {"mode": mode, "tol": tol,
                         "mc_samples": _int("moments", sec, "mc_samples", default=100_000)}
    return RunConfig(**kw)


def load_config(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}")
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    return parse_config(raw)


# ---------------------------------------------------------------- output

def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    return obj


def _dump_json(doc):
    return json.dumps(_jsonable(doc), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _atomic_write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _write_json(out_dir, name, doc):
    _atomic_write(Path(out_dir) / name, _dump_json(doc))


def _write_trajectories(path, records, n, m):
    header = ("trial,t,"
              + ",".join(f"x_{i + 1}" for i in range(n)) + ","
              + ",".join(f"u_{j + 1}" for j in range(m)) + ",stage_cost")
    lines = [header]
    for rec in records:
        T = rec.inputs.shape[0]
        for t in range(T + 1):
            cells = [str(rec.trial), str(t)]
            cells += [repr(float(v)) for v in rec.states[t]]
            if t < T:
                cells += [repr(float(v)) for v in rec.inputs[t]]
                cells.append(repr(float(rec.stage_costs[t])))
            else:
                # the final state row has no input or stage cost
                cells += [""] * (m + 1)
            lines.append(",".join(cells))
    _atomic_write(path, "\n".join(lines) + "\n")


def _print_warnings(report):
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)


# ---------------------------------------------------------------- helpers

def _moments_for(cfg, seed):
    cfg.require("sat", "noise", "cost")
    m = cfg.moments
    return compute_moments(cfg.sat, cfg.noise, cfg.cost.N, m["mode"],
                           tol=m["tol"], mc_samples=m["mc_samples"], seed=seed)


def _run_seed(cfg, args):
    if getattr(args, "seed", None) is not None:
        return args.seed
    if cfg.sim is not None:
        return cfg.sim["seed"]
    return 0


def _moments_doc(lam):
    # lambda1/lambda2 are the diagonals of the full stacked matrices
    errors = {"lambda1": None, "lambda2": None}
    if lam.err1 is not None:
        errors["lambda1"] = list(np.tile(np.asarray(lam.err1, dtype=float), lam.N))
    if lam.err2 is not None:
        errors["lambda2"] = list(np.tile(np.asarray(lam.err2, dtype=float), lam.N))
    return {
        "schema_version": SCHEMA_VERSION,
        "mode": lam.mode,
        "dim": lam.dim,
        "lambda1": list(np.tile(np.asarray(lam.diag1, dtype=float), lam.N)),
        "lambda2": list(np.tile(np.asarray(lam.diag2, dtype=float), lam.N)),
        "errors": errors,
    }


def _certificate_doc(cert, mode):
    if mode == "mpc":
        return {
            "schema_version": SCHEMA_VERSION,
            "mode": "mpc",
            "P": cert.P,
            "theta": cert.theta,
            "c1": cert.c1,
            "c2": cert.c2,
            "r": cert.r,
            "lambda": cert.lam,
            "b": cert.b,
            "lambda_min_P": cert.lam_min_P,
            "lambda_max_P": cert.lam_max_P,
        }
    return {
        "schema_version": SCHEMA_VERSION,
        "mode": "rhc",
        "N": cert.N,
        "P_blocks": list(cert.P_blocks),
        "theta": list(cert.theta),
        "c1": list(cert.c1),
        "c2": list(cert.c2),
        "r": list(cert.r),
        "lambda_ell": list(cert.lam_ell),
        "lambda": cert.lam,
        "r_prime": cert.r_prime,
        "lambda_bar": cert.lam_bar,
        "lambda_under": cert.lam_under,
        "lambda_prime": cert.lam_prime,
        "lambda_N": cert.lam_N,
        "r_N": cert.r_N,
        "b": cert.b,
        "b_prime": cert.b_prime,
        "lambda_min_PN": cert.lam_min_PN,
        "lambda_max_PN": cert.lam_max_PN,
    }


def _summary_doc(summary, lam, check):
    return {
        "schema_version": SCHEMA_VERSION,
        "mode": summary.mode,
        "T": summary.T,
        "trials": summary.trials,
        "seed": summary.seed,
        "indices": list(summary.indices),
        "index_mean": summary.index_mean,
        "index_se": summary.index_se,
        "successor_indices": list(summary.successor_indices),
        "successor_index_mean": summary.successor_index_mean,
        "successor_index_se": summary.successor_index_se,
        "mean_sq_norm": list(summary.mean_sq_norm),
        "sq_norm_se": list(summary.sq_norm_se),
        "max_input_abs": summary.max_input_abs,
        "failures": list(summary.failures),
        "moments": {"mode": lam.mode,
                    "lambda1": list(np.tile(np.asarray(lam.diag1, dtype=float), lam.N)),
                    "lambda2": list(np.tile(np.asarray(lam.diag2, dtype=float), lam.N))},
        "certificate_check": {
            "status": check.status,
            "passed": check.passed,
            "max_ratio": check.max_ratio,
            "bounds": list(check.bounds),
        },
    }


def _simulate_once(cfg, mode, T, trials, seed):
    cfg.require("model", "constraint", "noise", "sat", "cost", "sim")
    report = validate(cfg.model, cfg.constraint, cfg.noise, cfg.cost, cfg.sat)
    _print_warnings(report)
    lam = _moments_for(cfg, seed)
    summary, records = simulate(cfg.model, cfg.constraint, cfg.noise, cfg.cost,
                                cfg.sat, lam, mode, T, trials, cfg.sim["x0"], seed)
    cert = certificate_for(cfg.model, cfg.constraint, cfg.noise, lam, mode)
    check = empirical_variance_check(summary, cert)
    return summary, records, lam, check


# ---------------------------------------------------------------- commands

def cmd_moments(args):
    cfg = load_config(args.config)
    lam = _moments_for(cfg, _run_seed(cfg, args))
    doc = _moments_doc(lam)
    _write_json(args.out, "moments.json", doc)
    print(_dump_json(doc), end="")
    return 0


def cmd_solve(args):
    cfg = load_config(args.config)
    cfg.require("model", "constraint", "noise", "sat", "cost")
    try:
        x0 = np.array([float(s) for s in args.x0.split(",")])
    except ValueError:
        raise ConfigError(f"--x0 must be comma-separated numbers, got {args.x0!r}")
    if x0.size != cfg.model.n:
        raise ConfigError(f"--x0 must have {cfg.model.n} entries, got {x0.size}")
    report = validate(cfg.model, cfg.constraint, cfg.noise, cfg.cost, cfg.sat)
    _print_warnings(report)
    lam = _moments_for(cfg, _run_seed(cfg, args))
    batch = build_batch(cfg.model, cfg.cost)
    problem = assemble(batch, x0, cfg.noise, lam, cfg.constraint)
    policy = solve(problem)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "x0": x0,
        "G_bar": policy.G_bar,
        "d_bar": policy.d_bar,
        "objective": policy.objective,
        "kkt_residual": policy.kkt_residual,
        "feasibility_margin": policy.feasibility_margin,
        "constant_term": problem.c,
        "expected_cost": policy.objective + problem.c,
    }
    _write_json(args.out, "solve.json", doc)
    print(_dump_json(doc), end="")
    return 0


def cmd_simulate(args):
    cfg = load_config(args.config)
    cfg.require("sim")
    mode = args.mode or cfg.sim["mode"]
    seed = _run_seed(cfg, args)
    trials = args.trials if args.trials is not None else cfg.sim["trials"]
    T = cfg.sim["T"]
    summary, records, lam, check = _simulate_once(cfg, mode, T, trials, seed)
    _write_trajectories(Path(args.out) / "trajectories.csv", records,
                        cfg.model.n, cfg.model.m)
    doc = _summary_doc(summary, lam, check)
    _write_json(args.out, "summary.json", doc)
    print(_dump_json(doc), end="")
    return 0


def cmd_certify(args):
    cfg = load_config(args.config)
    cfg.require("model", "constraint", "noise")
    mode = args.mode or (cfg.sim["mode"] if cfg.sim is not None else "mpc")
    if not cfg.model.is_schur:
        raise NotCertifiableError(
            f"A has spectral radius {cfg.model.spectral_radius:.6f} >= 1; "
            "no drift certificate exists")
    if mode == "mpc":
        cert = mpc_drift_constants(cfg.model, cfg.constraint, cfg.noise)
    else:
        lam = _moments_for(cfg, _run_seed(cfg, args))
        cert = rhc_drift_constants(cfg.model, cfg.constraint, cfg.noise, lam)
    doc = _certificate_doc(cert, mode)
    _write_json(args.out, "certificate.json", doc)
    print(_dump_json(doc), end="")
    return 0


def benchmark_config():
    """The three-state benchmark setup used by reproduce-paper."""
    raw = {
        "system": {
            "A": [[0.8, 0.1, 0.01], [0.3, 0.3, 0.06], [0.09, 0.02, 0.5]],
            "B": [[1.0], [2.0], [0.5]],
            "F": [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            "r": [0.0, 0.0, 0.0],
        },
        "constraint": {"u_max": 10.0, "phi_max": 5.0},
        "noise": {"mean": [0.0, 0.0, 0.0], "cov_diag": [4.0, 4.0, 4.0]},
        "saturator": {"kind": "standard_sigmoid"},
        "cost": {
            "Q": [[3.0, 0.0, 0.0], [0.0, 3.0, 0.0], [0.0, 0.0, 3.0]],
            "R": [[2.0]],
            "N": 6,
        },
        "sim": {"mode": "mpc", "T": 40, "trials": 50, "seed": REPRODUCE_SEED,
                "x0": {"uniform_box": {"lo": [-50.0, -50.0, -50.0],
                                       "hi": [50.0, 50.0, 50.0]}}},
        "moments": {"mode": "paper_form"},
    }
    return parse_config(raw)


def cmd_reproduce(args):
    cfg = benchmark_config()
    seed = args.seed if args.seed is not None else REPRODUCE_SEED
    trials = args.trials if args.trials is not None else cfg.sim["trials"]
    T = args.T if args.T is not None else cfg.sim["T"]
    results = {}
    # both modes share the seed, so they see identical draws
    for mode in ("mpc", "rhc"):
        summary, records, lam, check = _simulate_once(cfg, mode, T, trials, seed)
        _write_trajectories(Path(args.out) / mode / "trajectories.csv", records,
                            cfg.model.n, cfg.model.m)
        _write_json(Path(args.out) / mode, "summary.json",
                    _summary_doc(summary, lam, check))
        target = PAPER_TARGETS[mode]
        mean = summary.successor_index_mean
        results[mode] = {
            "index_mean": mean,
            "index_se": summary.successor_index_se,
            "target": target,
            "deviation": mean / target - 1.0,
            "within_15pct": bool(abs(mean / target - 1.0) <= 0.15),
            "max_input_abs": summary.max_input_abs,
            "certificate_check": {"status": check.status, "passed": check.passed,
                                  "max_ratio": check.max_ratio},
        }
    doc = {
        "schema_version": SCHEMA_VERSION,
        "seed": seed,
        "trials": trials,
        "T": T,
        "targets": PAPER_TARGETS,
        "results": results,
        "mpc_le_rhc": bool(results["mpc"]["index_mean"] <= results["rhc"]["index_mean"]),
    }
    _write_json(args.out, "reproduction.json", doc)
    print(f"{'mode':<5} {'index':>10} {'target':>8} {'deviation':>10}")
    for mode in ("mpc", "rhc"):
        r = results[mode]
        print(f"{mode:<5} {r['index_mean']:>10.1f} {r['target']:>8.0f} "
              f"{100.0 * r['deviation']:>9.1f}%")
    print(f"mean mpc <= mean rhc: {doc['mpc_le_rhc']}")
    return 0


# ---------------------------------------------------------------- parser

def build_parser():
    parser = argparse.ArgumentParser(
        prog="satmpc",
        description="saturated-feedback stochastic MPC toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", required=True,
                            help="path to a JSON run configuration")
        sp.add_argument("--mode", choices=["mpc", "rhc"],
                        help="controller mode override")
        sp.add_argument("--seed", type=int, help="seed override")
        sp.add_argument("--trials", type=int, help="trial count override")
        sp.add_argument("--out", default=".", help="output directory")

    p = sub.add_parser("moments", help="compute the feedback moment matrices")
    common(p)
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("solve", help="solve the policy program at one state")
    common(p)
    p.add_argument("--x0", required=True,
                   help="initial state as comma-separated numbers")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("simulate", help="closed-loop Monte Carlo")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("certify", help="drift certificate for the closed loop")
    common(p)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("reproduce-paper",
                       help="run the published benchmark in both modes")
    common(p, config=False)
    p.add_argument("--T", type=int, help="trajectory length override")
    p.set_defaults(func=cmd_reproduce)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NotCertifiableError as exc:
        print(f"not certifiable: {exc}", file=sys.stderr)
        return 4
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
