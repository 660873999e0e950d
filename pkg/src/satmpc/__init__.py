"""Stochastic MPC with saturated noise feedback under hard input bounds.

The package builds the finite-horizon policy program for linear systems
driven by unbounded Gaussian noise, where the input is an affine function
of saturated past disturbances. It solves that program as a QP, runs
closed-loop simulations in two receding-horizon variants, and certifies
bounded state variance through Foster-Lyapunov drift constants.
"""

from .batch import BatchMatrices, build_batch, extract_step, horizon_blocks
from .control import (ClosedLoopController, mpc_step, reconstruct_noise,
                      rhc_plan, rhc_step)
from .errors import (ConfigError, NotCertifiableError, NumericalError,
                     SatmpcError)
from .model import (CostSpec, InputConstraint, NoiseModel, SystemModel,
                    ValidationReport, normalize_affine, validate)
from .moments import (MomentMatrices, Saturator, compute_moments,
                      lambda_monte_carlo, lambda_paper_form,
                      lambda_quadrature, piecewise_linear, scaled_sigmoid,
                      standard_saturation, standard_sigmoid)
from .qp import (PolicyParameters, PolicySolver, QpProblem, SolveSettings,
                 assemble, evaluate_expected_cost, solve)
from .sim import (FixedX0, SimulationSummary, TrajectoryRecord, UniformBoxX0,
                  performance_index, simulate, successor_state_index)
from .specfun import (SpecFunResult, erf, erfc, tricomi_u, tricomi_u_result,
                      upper_incomplete_gamma)
from .stability import (CheckReport, DriftCertificate, RhcCertificate,
                        certificate_for, empirical_variance_check,
                        mpc_drift_constants, rhc_drift_constants,
                        solve_discrete_lyapunov)

__version__ = "0.1.0"

__all__ = [
    "BatchMatrices", "build_batch", "extract_step", "horizon_blocks",
    "ClosedLoopController", "mpc_step", "reconstruct_noise", "rhc_plan", "rhc_step",
    "ConfigError", "NotCertifiableError", "NumericalError", "SatmpcError",
    "CostSpec", "InputConstraint", "NoiseModel", "SystemModel",
    "ValidationReport", "normalize_affine", "validate",
    "MomentMatrices", "Saturator", "compute_moments", "lambda_monte_carlo",
    "lambda_paper_form", "lambda_quadrature", "piecewise_linear",
    "scaled_sigmoid", "standard_saturation", "standard_sigmoid",
    "PolicyParameters", "PolicySolver", "QpProblem", "SolveSettings",
    "assemble", "evaluate_expected_cost", "solve",
    "FixedX0", "SimulationSummary", "TrajectoryRecord", "UniformBoxX0",
    "performance_index", "simulate", "successor_state_index",
    "SpecFunResult", "erf", "erfc", "tricomi_u", "tricomi_u_result",
    "upper_incomplete_gamma",
    "CheckReport", "DriftCertificate", "RhcCertificate", "certificate_for",
    "empirical_variance_check", "mpc_drift_constants", "rhc_drift_constants",
    "solve_discrete_lyapunov",
    "__version__",
]
