"""Distribution-level optimal control of a stochastic SIR epidemic model.

The toolkit steers the probability density of a planar susceptible/infected
diffusion by solving a density-transport-constrained optimization problem:
a conservative positivity-preserving forward solver, a backward costate
solver, exact pointwise minimization of the control Hamiltonian, and an
adaptive proximal outer iteration, cross-validated by a Monte-Carlo path
simulator.
"""

from .cost import CostSpec, control_cost, evaluate_J, evaluate_J_parts
from .dynamics import ModelParams, control_bounds, diffusion_sq, drift, sir3_rhs
from .fp_solver import CflError, SolverError, chang_cooper_weights, solve_forward, step_strang
from .adjoint_solver import advective_term, solve_adjoint, solve_adjoint_fields
from .grid import (AdjointField, ControlTrajectory, DensityField, GridSpec,
                   make_initial_density, quadrature)
from .hamiltonian import HamiltonianCoeffs, eval_H, extract_coeffs, minimize_H_eps
from .mc_oracle import (EnsembleSpec, em_ensemble, histogram_density, l1_distance,
                        make_gaussian_sampler, rk4_sir3)
from .scenario import (PRESET_NAMES, ConfigError, ScenarioConfig, load_config,
                       preset, save_config)
from .sqh import SqhParams, SqhResult, SqhStalledError, SqhTrace, run_sqh, tau_norm

__version__ = "0.1.0"

__all__ = [
    "AdjointField", "CflError", "ConfigError", "ControlTrajectory", "CostSpec",
    "DensityField", "EnsembleSpec", "GridSpec", "HamiltonianCoeffs", "ModelParams",
    "PRESET_NAMES", "ScenarioConfig", "SolverError", "SqhParams", "SqhResult",
    "SqhStalledError", "SqhTrace", "advective_term", "chang_cooper_weights",
    "control_bounds", "control_cost", "diffusion_sq", "drift", "em_ensemble",
    "eval_H", "evaluate_J", "evaluate_J_parts", "extract_coeffs",
    "histogram_density", "l1_distance", "load_config", "make_gaussian_sampler",
    "make_initial_density", "minimize_H_eps", "preset", "quadrature", "rk4_sir3",
    "run_sqh", "save_config", "sir3_rhs", "solve_adjoint", "solve_adjoint_fields",
    "solve_forward", "step_strang", "tau_norm",
]
