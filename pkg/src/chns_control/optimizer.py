"""Projected-gradient minimization of the reduced tracking cost over the box.

Each iteration runs one forward solve, one backward (dual) solve, assembles
the gradient g = xi + U, and takes the projected step

    U(alpha) = Proj_box(U - alpha * g),

backtracking along the projection arc until the Armijo condition

    j(U(alpha)) <= j(U) - (c1 / alpha) * ||U - U(alpha)||^2

holds.  The natural-residual ||U - Proj(U - g)|| is the computable
fixed-point form of the box variational inequality and drives termination.
An optional Barzilai-Borwein proposal seeds the line search; it never
bypasses the Armijo acceptance test.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .adjoint import cost_gradient, solve_adjoint
from .exceptions import CflViolationError, FieldNanError, SolverConvergenceError
from .forward import ControlField, Models, simulate
from .grid import FaceVectorField, ScalarField
from .objective import AdmissibleBox, CostBreakdown, CostSpec, eval_cost, project_box, \
    stationarity_residual

logger = logging.getLogger(__name__)

STEP_FIXED = "fixed"
STEP_ARMIJO = "armijo"
STEP_BB = "barzilai-borwein-with-armijo-safeguard"


@dataclass(frozen=True)
class OptimOptions:
    max_iters: int = 60
    armijo_c1: float = 1e-4
    backtrack: float = 0.5
    initial_step: float = 1.0
    tolerance: float = 1e-3
    step_mode: str = STEP_BB
    min_step: float = 1e-12
    max_backtracks: int = 40

    def __post_init__(self):
        if not 0.0 < self.armijo_c1 <= 0.5:
            raise ValueError(f"armijo c1 must lie in (0, 1/2], got {self.armijo_c1}")
        if not 0.0 < self.backtrack < 1.0:
            raise ValueError(f"backtrack factor must lie in (0,1), got {self.backtrack}")
        if self.initial_step <= 0 or self.tolerance <= 0 or self.max_iters < 0:
            raise ValueError("initial_step, tolerance must be positive; max_iters >= 0")
        if self.step_mode not in (STEP_FIXED, STEP_ARMIJO, STEP_BB):
            raise ValueError(f"unknown step mode {self.step_mode!r}")


@dataclass
class IterationRecord:
    iteration: int
    cost: CostBreakdown
    step: float
    stationarity: float
    grad_norm: float


@dataclass
class OptimReport:
    iterations: list = field(default_factory=list)
    final_control: ControlField = None
    termination: str = ""
    runtime: float = 0.0

    @property
    def costs(self):
        return [r.cost.total for r in self.iterations]

    @property
    def final_stationarity(self) -> float:
        return self.iterations[-1].stationarity if self.iterations else np.nan


def optimize(phi0: ScalarField, u0: FaceVectorField, spec: CostSpec,
             box: AdmissibleBox, U_init: ControlField, models: Models,
             opts: OptimOptions = None) -> OptimReport:
    """Minimize J(S(U), U) over the box from U_init (projected in if needed).

    Terminates on the stationarity tolerance (relative to 1 + ||U||), on
    max_iters, or on line-search step collapse.  Solver failures abort with
    the partial report and the failure recorded in ``termination``.
    """
    opts = opts or OptimOptions()
    t0 = time.perf_counter()
    report = OptimReport()

    U = project_box(U_init, box)
    T = U.n_steps * U.dt

    def forward_cost(control):
        traj = simulate(phi0, u0, control, T, models)
        return traj, eval_cost(traj, control, spec)

    try:
        traj, cost = forward_cost(U)
        alpha_next = opts.initial_step
        prev_U = prev_g = None

        for it in range(opts.max_iters + 1):
            adj = solve_adjoint(traj, spec, models)
            g = cost_gradient(U, adj)
            res = stationarity_residual(U, g, box)
            gnorm = g.norm_l2q()

            if it > 0 and opts.step_mode == STEP_BB and prev_U is not None:
                dU = U - prev_U
                dg = g - prev_g
                num = U.dt * U.grid.cell_area * float(np.sum(dU.data * dU.data))
                den = U.dt * U.grid.cell_area * float(np.sum(dU.data * dg.data))
                if den > 1e-300:
                    alpha_next = min(max(num / den, 1e-6), 1e6)

            # step stays 0.0 unless a projected step is accepted below
            report.iterations.append(IterationRecord(it, cost, 0.0, res, gnorm))

            if res <= opts.tolerance * (1.0 + U.norm_l2q()):
                report.termination = "stationarity tolerance reached"
                break
            if it == opts.max_iters:
                report.termination = "max iterations reached"
                break

            prev_U, prev_g = U, g

            alpha = alpha_next
            accepted = False
            for _ in range(opts.max_backtracks):
                U_try = project_box(U + (-alpha) * g, box)
                traj_try, cost_try = forward_cost(U_try)
                move = (U - U_try).norm_l2q()
                if opts.step_mode == STEP_FIXED:
                    accepted = True
                elif cost_try.total <= cost.total - (opts.armijo_c1 / alpha) * move**2:
                    accepted = True
                if accepted:
                    U, traj, cost = U_try, traj_try, cost_try
                    report.iterations[-1].step = alpha
                    break
                alpha *= opts.backtrack
                if alpha < opts.min_step:
                    break
            if not accepted:
                report.termination = "line-search step collapsed"
                break
            if opts.step_mode == STEP_ARMIJO:
                alpha_next = min(alpha / opts.backtrack, opts.initial_step)
            elif opts.step_mode == STEP_FIXED:
                alpha_next = opts.initial_step
    except (CflViolationError, SolverConvergenceError, FieldNanError) as exc:
        report.termination = f"solver failure: {exc}"
        logger.error("optimization aborted: %s", exc)

    report.final_control = U
    report.runtime = time.perf_counter() - t0
    return report
