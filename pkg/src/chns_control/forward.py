"""Semi-implicit time integration of the coupled phase-field / flow system.

One step advances (phi, u, pi) by:

  (i)  stabilized semi-implicit Cahn-Hilliard update
          (phi+ - phi)/dt + div(u phi) = div(m grad mu+) + U
          mu+ = -lap phi+ + F'(phi) + S (phi+ - phi)
       with conservative face-flux advection (explicit) and the mobility
       constant in the implicit operator (lagged Picard sweeps when m is
       not constant);

  (ii) momentum predictor with explicit convection and capillary force
       mu+ grad(phi+) (face averaged), viscous split eta_bar implicit /
       (eta(phi) - eta_bar) explicit;

  (iii) pressure projection onto the discretely divergence-free space.

The discrete mass identity  sum(phi+) = sum(phi) + dt*sum(U)  holds to
roundoff because every flux term telescopes, and with u = 0, U = 0 and
S >= max|F''|/2 the discrete energy is non-increasing step by step.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .exceptions import CflViolationError, FieldNanError, SolverConvergenceError
from .grid import FaceVectorField, Grid2D, ScalarField
from .materials import MaterialModel, PotentialModel, potential_eval, stabilization_constant
from . import operators as ops
from .solvers import solve_helmholtz_noslip, solve_modified_biharmonic, solve_poisson_neumann

logger = logging.getLogger(__name__)

PICARD_SWEEPS = 5
PICARD_TOL = 1e-10


@dataclass(frozen=True)
class Models:
    """Material laws, potential, and the stabilization constant S of the scheme."""

    material: MaterialModel
    potential: PotentialModel
    stabilization: float

    @classmethod
    def default(cls, material: MaterialModel = None, potential: PotentialModel = None,
                stabilization: float = None, s_range=(-1.2, 1.2)) -> "Models":
        material = material if material is not None else MaterialModel.constant()
        potential = potential if potential is not None else PotentialModel.double_well()
        if stabilization is None:
            stabilization = stabilization_constant(potential, s_range)
        return cls(material, potential, stabilization)


@dataclass
class State:
    """Snapshot (phi, u, pi) at time t; pi is the mean-zero projection pressure."""

    phi: ScalarField
    u: FaceVectorField
    pi: ScalarField
    t: float


@dataclass
class ControlField:
    """Step-piecewise-constant source: data[n] acts on [t_n, t_{n+1})."""

    grid: Grid2D
    dt: float
    data: np.ndarray  # (n_steps, nx, ny)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.ndim != 3 or self.data.shape[1:] != self.grid.shape:
            raise ValueError(f"control data shape {self.data.shape} does not match grid")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("control field contains non-finite values")

    @classmethod
    def zeros(cls, grid: Grid2D, dt: float, n_steps: int) -> "ControlField":
        return cls(grid, dt, np.zeros((n_steps, grid.nx, grid.ny)))

    @classmethod
    def constant(cls, grid: Grid2D, dt: float, n_steps: int, value: float) -> "ControlField":
        return cls(grid, dt, np.full((n_steps, grid.nx, grid.ny), float(value)))

    @property
    def n_steps(self) -> int:
        return self.data.shape[0]

    def copy(self) -> "ControlField":
        return ControlField(self.grid, self.dt, self.data.copy())

    def __add__(self, other):
        return ControlField(self.grid, self.dt, self.data + other.data)

    def __sub__(self, other):
        return ControlField(self.grid, self.dt, self.data - other.data)

    def __mul__(self, a):
        return ControlField(self.grid, self.dt, self.data * float(a))

    __rmul__ = __mul__

    def norm_l2q(self) -> float:
        """Space-time L2 norm with the step-rectangle time quadrature."""
        return float(np.sqrt(self.dt * self.grid.cell_area * np.sum(self.data**2)))


@dataclass
class StateTrajectory:
    """Full-stride history of one run: t_0 .. t_N plus derived chemical potential."""

    grid: Grid2D
    dt: float
    phi: list = field(default_factory=list)   # N+1 arrays (nx, ny)
    ux: list = field(default_factory=list)    # N+1 arrays (nx+1, ny)
    uy: list = field(default_factory=list)    # N+1 arrays (nx, ny+1)
    pi: list = field(default_factory=list)    # N+1 arrays (nx, ny)
    mu: list = field(default_factory=list)    # N+1 arrays (nx, ny)
    clamp_events: int = 0
    max_divergence: float = 0.0

    @property
    def n_steps(self) -> int:
        return len(self.phi) - 1

    @property
    def T(self) -> float:
        return self.n_steps * self.dt

    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n_steps + 1)

    def state(self, n: int) -> State:
        return State(
            ScalarField(self.grid, self.phi[n]),
            FaceVectorField(self.grid, self.ux[n].copy(), self.uy[n].copy()),
            ScalarField(self.grid, self.pi[n]),
            n * self.dt,
        )


def mass(grid: Grid2D, phi: np.ndarray) -> float:
    """Cell-weighted integral of phi."""
    return float(np.sum(phi) * grid.cell_area)


def energy(grid: Grid2D, phi: np.ndarray, ux: np.ndarray, uy: np.ndarray,
           potential: PotentialModel) -> float:
    """Ginzburg-Landau + kinetic energy by the midpoint (cell/face) rule."""
    gx, gy = ops.grad(phi, grid)
    grad_part = 0.5 * (np.sum(gx**2) + np.sum(gy**2))
    bulk = np.sum(potential_eval(potential, phi, 0))
    kinetic = 0.5 * (np.sum(ux**2) + np.sum(uy**2))
    return float(grid.cell_area * (grad_part + bulk + kinetic))


def cfl_number(grid: Grid2D, ux, uy, dt: float) -> float:
    return dt * max(np.max(np.abs(ux)) / grid.hx, np.max(np.abs(uy)) / grid.hy)


# ---------------------------------------------------------------------------
# step ingredients (shared with the linearized and adjoint sweeps)
# ---------------------------------------------------------------------------

def advect(grid: Grid2D, phi, ux, uy):
    """Conservative face-flux form of u . grad(phi) for divergence-free u."""
    return ops.div(ux * ops.avg_x(phi), uy * ops.avg_y(phi), grid)


def convection(grid: Grid2D, ux, uy):
    """Conservative MAC discretization of (u . grad) u."""
    ucc = ops.face_to_cell_x(ux)
    vcc = ops.face_to_cell_y(uy)
    uxc = ops.ux_to_corner(ux)
    uyc = ops.uy_to_corner(uy)
    pxy = uxc * uyc
    cx = ops.diff_x(ucc * ucc, grid.hx) + ops.corner_dy_to_xface(pxy, grid.hy)
    cy = ops.diff_y(vcc * vcc, grid.hy) + ops.corner_dx_to_yface(pxy, grid.hx)
    return cx, cy


def viscous_force(grid: Grid2D, ecc, ecorn, ux, uy):
    """div(2 e D(u)) for a cell coefficient e (given also corner-averaged)."""
    dxy = 0.5 * (ops.dux_dy_corner(ux, grid.hy) + ops.duy_dx_corner(uy, grid.hx))
    sxx = 2.0 * ecc * ops.dxx(ux, grid.hx)
    syy = 2.0 * ecc * ops.dyy(uy, grid.hy)
    sxy = 2.0 * ecorn * dxy
    fx = ops.diff_x(sxx, grid.hx) + ops.corner_dy_to_xface(sxy, grid.hy)
    fy = ops.diff_y(syy, grid.hy) + ops.corner_dx_to_yface(sxy, grid.hx)
    return fx, fy


def capillary_force(grid: Grid2D, mu, phi):
    """Face-averaged potential form mu grad(phi)."""
    fx = ops.avg_x(mu) * ops.diff_x(phi, grid.hx)
    fy = ops.avg_y(mu) * ops.diff_y(phi, grid.hy)
    return fx, fy


def project_velocity(grid: Grid2D, ux, uy, dt: float, warn: bool = False):
    """Pressure projection: returns (ux, uy, pi) with div u = 0 to roundoff."""
    d = ops.div(ux, uy, grid)
    pi = solve_poisson_neumann(grid, -d / dt, warn=warn)
    gx, gy = ops.grad(pi, grid)
    return ux - dt * gx, uy - dt * gy, pi


def _mobility_faces(grid: Grid2D, material: MaterialModel, phi):
    """m(phi) - m_bar on interior faces (zero on boundary faces: no-flux)."""
    mc = np.asarray(material.mobility(phi), dtype=float)
    dmx = ops.avg_x(mc)
    dmy = ops.avg_y(mc)
    dmx[1:-1, :] -= material.m_bar
    dmy[:, 1:-1] -= material.m_bar
    return dmx, dmy


def ch_implicit_solve(grid: Grid2D, dt: float, m_bar: float, S: float, rhs,
                      dmx=None, dmy=None, init=None,
                      max_sweeps: int = PICARD_SWEEPS, tol: float = PICARD_TOL):
    """Solve  q + dt*div(m_face grad(lap q - S q)) ... = rhs  for the CH update.

    In operator form:  [I + dt*m_bar*(lap^2 + S*(-lap))] q
                       - dt*div(dm grad(-lap q + S q)) = rhs.
    Constant mobility (dm = None) is a single spectral solve; otherwise the
    dm part is lagged and swept (Picard), which converges when the mobility
    variation is small against m_bar.
    """
    b = dt * m_bar * S
    c = dt * m_bar
    if dmx is None:
        return solve_modified_biharmonic(grid, 1.0, b, c, rhs), 1
    q = rhs.copy() if init is None else init.copy()
    for sweep in range(1, max_sweeps + 1):
        w = -ops.laplacian(q, grid) + S * q
        gx, gy = ops.grad(w, grid)
        corr = ops.div(dmx * gx, dmy * gy, grid)
        q_new = solve_modified_biharmonic(grid, 1.0, b, c, rhs + dt * corr)
        delta = np.max(np.abs(q_new - q))
        q = q_new
        if delta <= tol * (1.0 + np.max(np.abs(q))):
            return q, sweep
    raise SolverConvergenceError(
        f"mobility Picard sweep did not reach {tol:g} in {max_sweeps} sweeps "
        f"(last increment {delta:.3e}); raise max_sweeps or reduce the "
        f"mobility variation"
    )


def step(grid: Grid2D, phi, ux, uy, U, dt: float, models: Models,
         max_sweeps: int = PICARD_SWEEPS):
    """One forward step on raw arrays.

    Returns (phi_new, ux_new, uy_new, pi_new, mu_new, clamp_count).
    Raises CflViolationError / SolverConvergenceError / FieldNanError.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    cfl = cfl_number(grid, ux, uy, dt)
    if cfl > 1.0:
        raise CflViolationError(f"CFL number {cfl:.3f} > 1 (dt too large for |u|)")

    mat, pot, S = models.material, models.potential, models.stabilization
    clamps = pot.clamp_count(phi)
    fp = potential_eval(pot, phi, 1)

    # (i) Cahn-Hilliard block
    adv = advect(grid, phi, ux, uy)
    g_lag = fp - S * phi
    rhs_phi = phi - dt * adv + dt * U + dt * mat.m_bar * ops.laplacian(g_lag, grid)
    if mat.constant_mobility:
        dmx = dmy = None
    else:
        dmx, dmy = _mobility_faces(grid, mat, phi)
        gx, gy = ops.grad(g_lag, grid)
        rhs_phi = rhs_phi + dt * ops.div(dmx * gx, dmy * gy, grid)
    phi_new, _ = ch_implicit_solve(grid, dt, mat.m_bar, S, rhs_phi,
                                   dmx, dmy, init=phi, max_sweeps=max_sweeps)
    mu_new = -ops.laplacian(phi_new, grid) + fp + S * (phi_new - phi)

    # (ii) momentum predictor
    cx, cy = convection(grid, ux, uy)
    ecc = np.asarray(mat.viscosity(phi), dtype=float) - mat.eta_bar
    ecorn = ops.cell_to_corner(ecc)
    vx, vy = viscous_force(grid, ecc, ecorn, ux, uy)
    fcx, fcy = capillary_force(grid, mu_new, phi_new)
    rx = ux + dt * (-cx + vx + fcx)
    ry = uy + dt * (-cy + vy + fcy)
    ops.zero_normal(rx, ry)
    sx, sy = solve_helmholtz_noslip(grid, dt * mat.eta_bar, rx, ry)

    # (iii) projection
    ux_new, uy_new, pi_new = project_velocity(grid, sx, sy, dt)

    if not (np.all(np.isfinite(phi_new)) and np.all(np.isfinite(ux_new))
            and np.all(np.isfinite(uy_new))):
        raise FieldNanError("non-finite values after step")
    return phi_new, ux_new, uy_new, pi_new, mu_new, clamps


def simulate(phi0: ScalarField, u0: FaceVectorField, control: ControlField,
             T: float, models: Models, max_sweeps: int = PICARD_SWEEPS,
             div_tol: float = 1e-8) -> StateTrajectory:
    """March the coupled system from t=0 to t=T = n_steps*dt.

    The initial velocity is projected to the discretely divergence-free
    space (logged if it was not already there).  Step errors propagate with
    the failing step index attached.
    """
    grid = phi0.grid
    dt = control.dt
    n_steps = control.n_steps
    if abs(n_steps * dt - T) > 1e-9 * max(1.0, abs(T)):
        raise ValueError(f"T={T} is not n_steps*dt = {n_steps}*{dt}")

    phi = phi0.values.copy()
    ux, uy = u0.x.copy(), u0.y.copy()
    div0 = np.max(np.abs(ops.div(ux, uy, grid)))
    if div0 > div_tol:
        logger.info("projecting initial velocity (|div u0| = %.3e)", div0)
        ux, uy, _ = project_velocity(grid, ux, uy, 1.0)

    mu0 = -ops.laplacian(phi, grid) + potential_eval(models.potential, phi, 1)
    traj = StateTrajectory(grid, dt)
    traj.phi.append(phi.copy())
    traj.ux.append(ux.copy())
    traj.uy.append(uy.copy())
    traj.pi.append(np.zeros(grid.shape))
    traj.mu.append(mu0)
    traj.max_divergence = float(np.max(np.abs(ops.div(ux, uy, grid))))

    for n in range(n_steps):
        try:
            phi, ux, uy, pi, mu, clamps = step(
                grid, phi, ux, uy, control.data[n], dt, models, max_sweeps)
        except (CflViolationError, SolverConvergenceError, FieldNanError) as exc:
            raise type(exc)(f"step {n}: {exc}") from exc
        traj.phi.append(phi.copy())
        traj.ux.append(ux.copy())
        traj.uy.append(uy.copy())
        traj.pi.append(pi.copy())
        traj.mu.append(mu.copy())
        traj.clamp_events += clamps
        dmax = float(np.max(np.abs(ops.div(ux, uy, grid))))
        traj.max_divergence = max(traj.max_divergence, dmax)
        if dmax > div_tol:
            raise SolverConvergenceError(
                f"step {n}: divergence {dmax:.3e} exceeds {div_tol:g} after projection")
    return traj
