"""Phase-field two-phase flow solver with pointwise-tracking optimal control.

A 2D coupled Cahn-Hilliard / Navier-Stokes toolkit on a MAC-staggered
rectangular grid: semi-implicit forward solver, its exact linearization,
the transposed backward (dual) sweep with mollified pointwise observation
sources, and a box-constrained projected-gradient optimizer, all backed by
fast cosine/sine spectral solves.
"""

from .grid import FaceVectorField, Grid2D, ObservationPoint, ScalarField, make_grid
from .materials import (MaterialModel, PotentialModel, potential_eval,
                        stabilization_constant, validate_assumptions)
from .forward import (ControlField, Models, State, StateTrajectory, energy, mass,
                      simulate, step)
from .linearized import LinTrajectory, solve_linearized
from .adjoint import (AdjointTrajectory, MollifiedSource, build_mollified_source,
                      cost_gradient, solve_adjoint)
from .objective import (AdmissibleBox, CostBreakdown, CostSpec, CostWeights,
                        ball_average, eval_cost, observe, project_box,
                        stationarity_residual)
from .optimizer import OptimOptions, OptimReport, optimize
from .problem import ControlProblem
from .verify import (duality_gap, fd_directional_derivative, run_invariant_suite,
                     stability_ratio, taylor_remainder_test)
from .config import RunConfig, parse_config

__version__ = "0.1.0"

__all__ = [
    "AdjointTrajectory", "AdmissibleBox", "ControlField", "ControlProblem",
    "CostBreakdown", "CostSpec", "CostWeights", "FaceVectorField", "Grid2D",
    "LinTrajectory", "MaterialModel", "Models", "MollifiedSource",
    "ObservationPoint", "OptimOptions", "OptimReport", "PotentialModel",
    "RunConfig", "ScalarField", "State", "StateTrajectory", "ball_average",
    "build_mollified_source", "cost_gradient", "duality_gap", "energy",
    "eval_cost", "fd_directional_derivative", "make_grid", "mass", "observe",
    "optimize", "parse_config", "potential_eval", "project_box",
    "run_invariant_suite", "simulate", "solve_adjoint", "solve_linearized",
    "stabilization_constant", "stationarity_residual", "step",
    "taylor_remainder_test", "validate_assumptions",
]
