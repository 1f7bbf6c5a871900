"""Backward-in-time dual sweep with mollified pointwise observation sources.

The pointwise misfits enter the dual phase equation as sources

    R^n = sum_i  (1/A_i) chi_i (phibar_ball,i(t_n) - target_i(t_n)),

where chi_i is the indicator of the cells whose centers lie in the ball
B(x_i, eps) and A_i is the covered cell area: the normalized-indicator
replacement of a Dirac at x_i, sharing the ball-averaged observation with
the cost.  In terminal-tracking mode the same construction at t = T
supplies the terminal datum of xi (it is zero in running-only mode); the
dual velocity always starts from v(T) = ubar(T) - u_d(T).

Each backward step is the transpose of the linearized forward step, so the
duality identity

    <xi, h>_{L2(Q)} = sum_i int misfit_i psi_h(obs_i) dt
                      + int (ubar - u_d) . w_h + terminal terms

holds to roundoff for every direction h (with ball-averaged observations
on the right), and xi + U is the exact gradient of the discrete cost.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .forward import ControlField, Models, StateTrajectory, project_velocity
from .grid import Grid2D
from .linearized import build_step_context, step_vjp
from .objective import CostSpec, CostWeights, MODE_J2, ball_average, validate_mollification
from . import operators as ops


@dataclass
class MollifiedSource:
    """Normalized-indicator misfit sources R^0..R^{N-1} and the terminal field."""

    epsilon: float
    R: list
    xiT: np.ndarray

    def total_misfit(self, grid: Grid2D, n: int) -> float:
        """Cell-weighted integral of R^n (equals the summed ball misfits exactly)."""
        return float(np.sum(self.R[n]) * grid.cell_area)


def build_mollified_source(base: StateTrajectory, cost: CostSpec, epsilon: float = None,
                           mode: str = None) -> MollifiedSource:
    """Assemble R^n and the terminal source from ball-averaged misfits.

    Requires eps >= 1.5*max(hx,hy) and pairwise-disjoint balls strictly
    inside the domain.
    """
    grid = base.grid
    eps = cost.resolve_epsilon(grid) if epsilon is None else float(epsilon)
    mode = cost.mode if mode is None else mode
    validate_mollification(grid, cost.points, eps)

    masks = [ops.ball_indicator(grid, p.x, p.y, eps) for p in cost.points]
    areas = [int(np.count_nonzero(m)) * grid.cell_area for m in masks]

    R = []
    for n in range(base.n_steps):
        rn = np.zeros(grid.shape)
        for i, p in enumerate(cost.points):
            mis = ball_average(grid, base.phi[n], p, eps) - cost.targets[i, n]
            rn[masks[i]] += mis / areas[i]
        R.append(rn)

    xiT = np.zeros(grid.shape)
    if mode == MODE_J2:
        N = base.n_steps
        for i, p in enumerate(cost.points):
            mis = ball_average(grid, base.phi[N], p, eps) - cost.targets[i, N]
            xiT[masks[i]] += mis / areas[i]
    return MollifiedSource(eps, R, xiT)


@dataclass
class AdjointTrajectory:
    """Dual solution (xi, v, q); xi[N] and v[N] are the assembled terminal data."""

    grid: Grid2D
    dt: float
    xi: list = field(default_factory=list)
    vx: list = field(default_factory=list)
    vy: list = field(default_factory=list)
    q: list = field(default_factory=list)
    control_weight: float = 1.0

    @property
    def n_steps(self) -> int:
        return len(self.xi) - 1

    def pair_control(self, h: ControlField) -> float:
        """<xi, h> in L2(Q) with the step-rectangle quadrature."""
        acc = 0.0
        for n in range(h.n_steps):
            acc += np.sum(self.xi[n] * h.data[n])
        return float(self.dt * self.grid.cell_area * acc)


def solve_adjoint(base: StateTrajectory, cost: CostSpec, models: Models,
                  epsilon: float = None, mode: str = None,
                  source: MollifiedSource = None) -> AdjointTrajectory:
    """Backward sweep n = N..1 of the transposed linearized scheme.

    xi[n] for n < N is the dual variable paired with the control on step n
    (so that xi + U is the cost gradient); v[n] is the projected dual
    velocity, divergence-free like its forward counterparts.
    """
    grid, dt, N = base.grid, base.dt, base.n_steps
    mode = cost.mode if mode is None else mode
    cost.validate_against(grid, N)
    if source is None:
        source = build_mollified_source(base, cost, epsilon, mode)
    w = cost.weights
    area = grid.cell_area

    adj = AdjointTrajectory(grid, dt, control_weight=w.control_energy)
    adj.xi = [None] * (N + 1)
    adj.vx = [None] * (N + 1)
    adj.vy = [None] * (N + 1)
    adj.q = [None] * (N + 1)

    udx, udy = cost.u_d_at(grid, N)
    vT_x = w.velocity_terminal * (base.ux[N] - udx)
    vT_y = w.velocity_terminal * (base.uy[N] - udy)
    adj.xi[N] = w.tracking_terminal * source.xiT if mode == MODE_J2 else np.zeros(grid.shape)
    adj.vx[N], adj.vy[N] = vT_x.copy(), vT_y.copy()
    adj.q[N] = np.zeros(grid.shape)

    lphi = area * adj.xi[N]
    lux = area * vT_x
    luy = area * vT_y

    for n in range(N - 1, -1, -1):
        ctx = build_step_context(base, n, models)
        lphi, lux, luy, lU, _ = step_vjp(ctx, lphi, lux, luy)
        adj.xi[n] = lU / (dt * area)

        lphi += dt * area * w.tracking_running * source.R[n]
        udx, udy = cost.u_d_at(grid, n)
        lux += dt * area * w.velocity_running * (base.ux[n] - udx)
        luy += dt * area * w.velocity_running * (base.uy[n] - udy)

        # store the divergence-free representative (the next transposed step
        # starts with the same projection, so propagation is unchanged)
        px, py, q = project_velocity(grid, lux, luy, 1.0)
        lux, luy = px, py
        adj.vx[n] = px / area
        adj.vy[n] = py / area
        adj.q[n] = q / area
    return adj


def cost_gradient(control: ControlField, adj: AdjointTrajectory) -> ControlField:
    """L2(Q)-representative of the reduced-cost derivative: g^n = xi^n + U^n."""
    if adj.n_steps != control.n_steps:
        raise ValueError("adjoint and control step counts differ")
    data = np.stack([adj.xi[n] for n in range(control.n_steps)])
    return ControlField(control.grid, control.dt,
                        data + adj.control_weight * control.data)
