"""Forward linearization around a stored trajectory.

Each step here is the exact Gateaux derivative of the corresponding
nonlinear forward step, with all coefficients frozen from the base
trajectory at the matching time level.  That choice makes the Taylor
remainder of the solution map genuinely second order in the perturbation
size (the linear term cancels to roundoff) instead of being limited by
discretization differences.

The momentum coupling force is accordingly the derivative of the discrete
face-averaged capillary force: avg(dmu) grad(phi+) + avg(mu+) grad(psi+).
Continuously this equals the pair (-lap phi) grad psi + (-lap psi) grad phi
plus an exact gradient that the pressure projection removes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import SolverConvergenceError
from .forward import (Models, StateTrajectory, ControlField, ch_implicit_solve,
                      project_velocity, _mobility_faces, PICARD_SWEEPS, PICARD_TOL)
from .grid import FaceVectorField, Grid2D, ScalarField
from .materials import potential_eval
from . import operators as ops
from .solvers import solve_helmholtz_noslip, solve_modified_biharmonic


@dataclass
class StepContext:
    """Frozen coefficients of one forward step n -> n+1."""

    grid: Grid2D
    dt: float
    S: float
    m_bar: float
    gamma: float
    phi_n: np.ndarray
    ux_n: np.ndarray
    uy_n: np.ndarray
    fpp_n: np.ndarray
    avgx_phi_n: np.ndarray
    avgy_phi_n: np.ndarray
    dx_phi_np1: np.ndarray
    dy_phi_np1: np.ndarray
    avgx_mu_np1: np.ndarray
    avgy_mu_np1: np.ndarray
    ecc: np.ndarray
    ecorn: np.ndarray
    etap: np.ndarray
    dxx_b: np.ndarray
    dyy_b: np.ndarray
    dxy_b: np.ndarray
    ucc: np.ndarray
    vcc: np.ndarray
    uxc: np.ndarray
    uyc: np.ndarray
    dmx: np.ndarray = None
    dmy: np.ndarray = None
    mp_n: np.ndarray = None
    gmux: np.ndarray = None
    gmuy: np.ndarray = None
    max_sweeps: int = PICARD_SWEEPS


def build_step_context(base: StateTrajectory, n: int, models: Models,
                       max_sweeps: int = PICARD_SWEEPS) -> StepContext:
    grid = base.grid
    mat, pot, S = models.material, models.potential, models.stabilization
    phi_n = base.phi[n]
    ux_n, uy_n = base.ux[n], base.uy[n]
    phi_np1, mu_np1 = base.phi[n + 1], base.mu[n + 1]
    ecc = np.asarray(mat.viscosity(phi_n), dtype=float) - mat.eta_bar
    ctx = StepContext(
        grid=grid, dt=base.dt, S=S, m_bar=mat.m_bar, gamma=base.dt * mat.eta_bar,
        phi_n=phi_n, ux_n=ux_n, uy_n=uy_n,
        fpp_n=potential_eval(pot, phi_n, 2),
        avgx_phi_n=ops.avg_x(phi_n), avgy_phi_n=ops.avg_y(phi_n),
        dx_phi_np1=ops.diff_x(phi_np1, grid.hx), dy_phi_np1=ops.diff_y(phi_np1, grid.hy),
        avgx_mu_np1=ops.avg_x(mu_np1), avgy_mu_np1=ops.avg_y(mu_np1),
        ecc=ecc, ecorn=ops.cell_to_corner(ecc),
        etap=np.asarray(mat.viscosity_deriv(phi_n), dtype=float),
        dxx_b=ops.dxx(ux_n, grid.hx), dyy_b=ops.dyy(uy_n, grid.hy),
        dxy_b=0.5 * (ops.dux_dy_corner(ux_n, grid.hy) + ops.duy_dx_corner(uy_n, grid.hx)),
        ucc=ops.face_to_cell_x(ux_n), vcc=ops.face_to_cell_y(uy_n),
        uxc=ops.ux_to_corner(ux_n), uyc=ops.uy_to_corner(uy_n),
        max_sweeps=max_sweeps,
    )
    if not mat.constant_mobility:
        ctx.dmx, ctx.dmy = _mobility_faces(grid, mat, phi_n)
        ctx.mp_n = np.asarray(mat.mobility_deriv(phi_n), dtype=float)
        ctx.gmux, ctx.gmuy = ops.grad(mu_np1, grid)
    return ctx


def _convection_jvp(ctx: StepContext, wx, wy):
    g = ctx.grid
    d_ucc = ops.face_to_cell_x(wx)
    d_vcc = ops.face_to_cell_y(wy)
    d_uxc = ops.ux_to_corner(wx)
    d_uyc = ops.uy_to_corner(wy)
    d_pxy = ctx.uxc * d_uyc + ctx.uyc * d_uxc
    cx = ops.diff_x(2.0 * ctx.ucc * d_ucc, g.hx) + ops.corner_dy_to_xface(d_pxy, g.hy)
    cy = ops.diff_y(2.0 * ctx.vcc * d_vcc, g.hy) + ops.corner_dx_to_yface(d_pxy, g.hx)
    return cx, cy


def _convection_vjp(ctx: StepContext, lcx, lcy):
    g = ctx.grid
    l_ucc = 2.0 * ctx.ucc * ops.diff_x_t(lcx, g.hx)
    l_vcc = 2.0 * ctx.vcc * ops.diff_y_t(lcy, g.hy)
    l_pxy = ops.corner_dy_to_xface_t(lcx, g.hy) + ops.corner_dx_to_yface_t(lcy, g.hx)
    lwx = ops.face_to_cell_x_t(l_ucc) + ops.ux_to_corner_t(ctx.uyc * l_pxy)
    lwy = ops.face_to_cell_y_t(l_vcc) + ops.uy_to_corner_t(ctx.uxc * l_pxy)
    return lwx, lwy


def _viscous_jvp(ctx: StepContext, psi, wx, wy):
    """d/d(u)[div(2(eta-eta_bar)Du)] w + div(2 eta'(phi) psi D u_base)."""
    g = ctx.grid
    dxy_w = 0.5 * (ops.dux_dy_corner(wx, g.hy) + ops.duy_dx_corner(wy, g.hx))
    sxx = 2.0 * ctx.ecc * ops.dxx(wx, g.hx)
    syy = 2.0 * ctx.ecc * ops.dyy(wy, g.hy)
    sxy = 2.0 * ctx.ecorn * dxy_w
    ep = ctx.etap * psi
    ep_corn = ops.cell_to_corner(ep)
    sxx += 2.0 * ep * ctx.dxx_b
    syy += 2.0 * ep * ctx.dyy_b
    sxy += 2.0 * ep_corn * ctx.dxy_b
    fx = ops.diff_x(sxx, g.hx) + ops.corner_dy_to_xface(sxy, g.hy)
    fy = ops.diff_y(syy, g.hy) + ops.corner_dx_to_yface(sxy, g.hx)
    return fx, fy


def _viscous_vjp(ctx: StepContext, lfx, lfy):
    g = ctx.grid
    l_sxx = ops.diff_x_t(lfx, g.hx)
    l_syy = ops.diff_y_t(lfy, g.hy)
    l_sxy = ops.corner_dy_to_xface_t(lfx, g.hy) + ops.corner_dx_to_yface_t(lfy, g.hx)
    lwx = ops.dxx_t(2.0 * ctx.ecc * l_sxx, g.hx) + ops.dux_dy_corner_t(ctx.ecorn * l_sxy, g.hy)
    lwy = ops.dyy_t(2.0 * ctx.ecc * l_syy, g.hy) + ops.duy_dx_corner_t(ctx.ecorn * l_sxy, g.hx)
    l_ep = 2.0 * (ctx.dxx_b * l_sxx + ctx.dyy_b * l_syy) \
        + ops.cell_to_corner_t(2.0 * ctx.dxy_b * l_sxy)
    lpsi = ctx.etap * l_ep
    return lpsi, lwx, lwy


def _ch_rhs_jvp(ctx: StepContext, psi, wx, wy, h):
    """Right-hand side of the linearized implicit CH relation."""
    g, dt = ctx.grid, ctx.dt
    d_adv = ops.div(ctx.ux_n * ops.avg_x(psi) + ctx.avgx_phi_n * wx,
                    ctx.uy_n * ops.avg_y(psi) + ctx.avgy_phi_n * wy, g)
    d_glag = (ctx.fpp_n - ctx.S) * psi
    rhs = psi - dt * d_adv + dt * ctx.m_bar * ops.laplacian(d_glag, g)
    if h is not None:
        rhs = rhs + dt * h
    if ctx.dmx is not None:
        gx, gy = ops.grad(d_glag, g)
        rhs = rhs + dt * ops.div(ctx.dmx * gx, ctx.dmy * gy, g)
        mp_psi = ctx.mp_n * psi
        rhs = rhs + dt * ops.div(ops.avg_x(mp_psi) * ctx.gmux,
                                 ops.avg_y(mp_psi) * ctx.gmuy, g)
    return rhs


def _ch_rhs_vjp(ctx: StepContext, lrhs):
    """Transpose of _ch_rhs_jvp; returns (lpsi, lwx, lwy, lU_scale)."""
    g, dt = ctx.grid, ctx.dt
    lpsi = lrhs.copy()
    l_glag = dt * ctx.m_bar * ops.laplacian(lrhs, g)
    if ctx.dmx is not None:
        gx, gy = ops.grad(lrhs, g)
        l_glag += dt * ops.div(ctx.dmx * gx, ctx.dmy * gy, g)
        l_mp_psi = ops.avg_x_t(ctx.gmux * (-dt) * ops.diff_x(lrhs, g.hx)) \
            + ops.avg_y_t(ctx.gmuy * (-dt) * ops.diff_y(lrhs, g.hy))
        lpsi += ctx.mp_n * l_mp_psi
    lpsi += (ctx.fpp_n - ctx.S) * l_glag
    lflux_x = dt * ops.diff_x(lrhs, g.hx)   # transpose of the -dt*div(...) advection
    lflux_y = dt * ops.diff_y(lrhs, g.hy)
    lpsi += ops.avg_x_t(ctx.ux_n * lflux_x) + ops.avg_y_t(ctx.uy_n * lflux_y)
    lwx = ctx.avgx_phi_n * lflux_x
    lwy = ctx.avgy_phi_n * lflux_y
    return lpsi, lwx, lwy, dt


def ch_implicit_solve_t(ctx: StepContext, rhs,
                        tol: float = PICARD_TOL):
    """Transpose of the implicit CH solve (the operator is symmetric up to
    the mobility correction, which is swept the same way)."""
    g, dt = ctx.grid, ctx.dt
    b = dt * ctx.m_bar * ctx.S
    c = dt * ctx.m_bar
    if ctx.dmx is None:
        return solve_modified_biharmonic(g, 1.0, b, c, rhs)
    z = solve_modified_biharmonic(g, 1.0, b, c, rhs)
    for _ in range(ctx.max_sweeps):
        gx, gy = ops.grad(z, g)
        corr = ops.div(ctx.dmx * gx, ctx.dmy * gy, g)
        corr = -ops.laplacian(corr, g) + ctx.S * corr
        z_new = solve_modified_biharmonic(g, 1.0, b, c, rhs + dt * corr)
        delta = np.max(np.abs(z_new - z))
        z = z_new
        if delta <= tol * (1.0 + np.max(np.abs(z))):
            return z
    raise SolverConvergenceError("transposed mobility sweep did not converge")


def step_jvp(ctx: StepContext, psi, wx, wy, h=None):
    """Directional derivative of one forward step.

    Returns (psi_new, wx_new, wy_new, pstar).
    """
    g, dt = ctx.grid, ctx.dt
    rhs = _ch_rhs_jvp(ctx, psi, wx, wy, h)
    psi_new, _ = ch_implicit_solve(g, dt, ctx.m_bar, ctx.S, rhs,
                                   ctx.dmx, ctx.dmy, init=psi,
                                   max_sweeps=ctx.max_sweeps)
    d_mu = -ops.laplacian(psi_new, g) + ctx.fpp_n * psi + ctx.S * (psi_new - psi)

    cx, cy = _convection_jvp(ctx, wx, wy)
    vx, vy = _viscous_jvp(ctx, psi, wx, wy)
    fcx = ops.avg_x(d_mu) * ctx.dx_phi_np1 + ctx.avgx_mu_np1 * ops.diff_x(psi_new, g.hx)
    fcy = ops.avg_y(d_mu) * ctx.dy_phi_np1 + ctx.avgy_mu_np1 * ops.diff_y(psi_new, g.hy)
    rx = wx + dt * (-cx + vx + fcx)
    ry = wy + dt * (-cy + vy + fcy)
    ops.zero_normal(rx, ry)
    sx, sy = solve_helmholtz_noslip(g, ctx.gamma, rx, ry)
    wx_new, wy_new, pstar = project_velocity(g, sx, sy, dt)
    return psi_new, wx_new, wy_new, pstar


def step_vjp(ctx: StepContext, lphi_next, lux_next, luy_next):
    """Transpose of step_jvp with respect to the unweighted array dot product.

    Maps cotangents of (phi_{n+1}, u_{n+1}) to cotangents of
    (phi_n, u_n, U_n); also returns the adjoint projection multiplier.
    """
    g, dt = ctx.grid, ctx.dt
    lux = lux_next.copy()
    luy = luy_next.copy()
    ops.zero_normal(lux, luy)

    # projection and viscous solves are self-transpose
    lsx, lsy, q_adj = project_velocity(g, lux, luy, dt)
    lrx, lry = solve_helmholtz_noslip(g, ctx.gamma, lsx, lsy)
    ops.zero_normal(lrx, lry)

    lwx = lrx.copy()
    lwy = lry.copy()
    cwx, cwy = _convection_vjp(ctx, -dt * lrx, -dt * lry)
    lwx += cwx
    lwy += cwy
    lpsi_v, vwx, vwy = _viscous_vjp(ctx, dt * lrx, dt * lry)
    lwx += vwx
    lwy += vwy

    # capillary force transpose
    lfcx = dt * lrx
    lfcy = dt * lry
    l_dmu = ops.avg_x_t(ctx.dx_phi_np1 * lfcx) + ops.avg_y_t(ctx.dy_phi_np1 * lfcy)
    lpsi_new = ops.diff_x_t(ctx.avgx_mu_np1 * lfcx, g.hx) \
        + ops.diff_y_t(ctx.avgy_mu_np1 * lfcy, g.hy)

    # d_mu = -lap psi_new + fpp psi + S (psi_new - psi)
    lpsi_new += -ops.laplacian(l_dmu, g) + ctx.S * l_dmu
    lpsi = lpsi_v + (ctx.fpp_n - ctx.S) * l_dmu

    # implicit CH solve and its right-hand side
    lpsi_new += lphi_next
    lrhs = ch_implicit_solve_t(ctx, lpsi_new)
    p, ax, ay, u_scale = _ch_rhs_vjp(ctx, lrhs)
    lpsi += p
    lwx += ax
    lwy += ay
    lU = u_scale * lrhs
    ops.zero_normal(lwx, lwy)
    return lpsi, lwx, lwy, lU, q_adj


@dataclass
class LinTrajectory:
    """Solution (psi, w, p*) of the linearized sweep, stored full stride."""

    grid: Grid2D
    dt: float
    psi: list = field(default_factory=list)
    wx: list = field(default_factory=list)
    wy: list = field(default_factory=list)
    pstar: list = field(default_factory=list)

    @property
    def n_steps(self) -> int:
        return len(self.psi) - 1

    def norm_l2q(self) -> float:
        """Space-time L2 norm over phi and velocity slots (rectangle rule)."""
        area = self.grid.cell_area
        tot = 0.0
        for n in range(self.n_steps):
            tot += np.sum(self.psi[n] ** 2) + np.sum(self.wx[n] ** 2) + np.sum(self.wy[n] ** 2)
        return float(np.sqrt(self.dt * area * tot))


def solve_linearized(base: StateTrajectory, h: ControlField,
                     psi0: ScalarField = None, w0: FaceVectorField = None,
                     models: Models = None,
                     max_sweeps: int = PICARD_SWEEPS) -> LinTrajectory:
    """Sweep the linearization of the forward scheme along a base trajectory.

    ``h`` drives the phase equation; (psi0, w0) default to zero, which is
    the configuration whose output is the derivative of the solution map
    with respect to the control.
    """
    if models is None:
        raise ValueError("models must be supplied (the same bundle used for the base run)")
    grid = base.grid
    if h is not None and (h.n_steps != base.n_steps or abs(h.dt - base.dt) > 1e-14):
        raise ValueError("control perturbation grid/dt does not match the base trajectory")

    psi = np.zeros(grid.shape) if psi0 is None else psi0.values.copy()
    wx = np.zeros((grid.nx + 1, grid.ny)) if w0 is None else w0.x.copy()
    wy = np.zeros((grid.nx, grid.ny + 1)) if w0 is None else w0.y.copy()
    lin = LinTrajectory(grid, base.dt)
    lin.psi.append(psi.copy())
    lin.wx.append(wx.copy())
    lin.wy.append(wy.copy())
    lin.pstar.append(np.zeros(grid.shape))

    for n in range(base.n_steps):
        ctx = build_step_context(base, n, models, max_sweeps)
        hn = h.data[n] if h is not None else None
        psi, wx, wy, ps = step_jvp(ctx, psi, wx, wy, hn)
        lin.psi.append(psi.copy())
        lin.wx.append(wx.copy())
        lin.wy.append(wy.copy())
        lin.pstar.append(ps.copy())
    return lin
