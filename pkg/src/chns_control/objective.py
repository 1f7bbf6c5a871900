"""Tracking cost functionals, admissible box, projection, stationarity residual.

Two tracking modes are supported: "running" (J1) integrates the pointwise
phase misfits over time, and "terminal" (J2) adds the same misfits at the
final time.  Observations are taken either as bilinear point values
("point", the literal sensor reading) or as averages over the ball
B(x_i, eps) ("mollified", the default for optimization: the adjoint source
is built from the same ball averages, which makes the computed gradient
exact for the discrete cost).

Time integrals use the left-endpoint rectangle rule on step values, the
quadrature under which the control-energy gradient is exactly U.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .forward import ControlField, StateTrajectory
from .grid import Grid2D, ObservationPoint
from . import operators as ops

MODE_J1 = "J1"
MODE_J2 = "J2"
OBS_POINT = "point"
OBS_MOLLIFIED = "mollified"


@dataclass(frozen=True)
class CostWeights:
    tracking_running: float = 1.0
    tracking_terminal: float = 1.0
    velocity_running: float = 1.0
    velocity_terminal: float = 1.0
    control_energy: float = 1.0


@dataclass
class CostSpec:
    """Observation points, targets, desired velocity, mode, and weights.

    ``targets`` has shape (k, N+1): one value per point per time level.
    ``u_desired`` is None (zero), a constant pair of face arrays, or a list
    of N+1 such pairs.
    """

    points: list
    targets: np.ndarray
    mode: str = MODE_J1
    observation: str = OBS_MOLLIFIED
    epsilon: float = None
    u_desired: object = None
    weights: CostWeights = field(default_factory=CostWeights)

    def __post_init__(self):
        self.targets = np.atleast_2d(np.asarray(self.targets, dtype=float))
        if self.targets.shape[0] != len(self.points):
            raise ValueError(
                f"targets shape {self.targets.shape} does not match {len(self.points)} points")
        if self.mode not in (MODE_J1, MODE_J2):
            raise ValueError(f"mode must be J1 or J2, got {self.mode!r}")
        if self.observation not in (OBS_POINT, OBS_MOLLIFIED):
            raise ValueError(f"observation must be point or mollified, got {self.observation!r}")

    @classmethod
    def constant_targets(cls, points, values, n_steps, **kw):
        values = np.asarray(values, dtype=float)
        targets = np.repeat(values[:, None], n_steps + 1, axis=1)
        return cls(points=list(points), targets=targets, **kw)

    @property
    def n_points(self) -> int:
        return len(self.points)

    def resolve_epsilon(self, grid: Grid2D) -> float:
        return 2.0 * grid.hmax if self.epsilon is None else float(self.epsilon)

    def validate_against(self, grid: Grid2D, n_steps: int) -> None:
        if self.targets.shape[1] != n_steps + 1:
            raise ValueError(
                f"targets define {self.targets.shape[1]} time levels, run has {n_steps + 1}")
        for p in self.points:
            p.validate_against_grid(grid)
        if self.observation == OBS_MOLLIFIED:
            validate_mollification(grid, self.points, self.resolve_epsilon(grid))

    def u_d_at(self, grid: Grid2D, n: int):
        if self.u_desired is None:
            return np.zeros((grid.nx + 1, grid.ny)), np.zeros((grid.nx, grid.ny + 1))
        if isinstance(self.u_desired, (list, tuple)) and isinstance(self.u_desired[0], np.ndarray):
            return self.u_desired  # constant pair
        return self.u_desired[n]


def validate_mollification(grid: Grid2D, points, epsilon: float) -> None:
    """Reject radii below 1.5*h, overlapping balls, and balls leaving the domain."""
    if epsilon < 1.5 * grid.hmax:
        raise ValueError(f"mollification radius {epsilon:.4g} < 1.5*max(hx,hy) "
                         f"= {1.5 * grid.hmax:.4g}")
    for p in points:
        d = min(p.x, grid.Lx - p.x, p.y, grid.Ly - p.y)
        if d <= epsilon:
            raise ValueError(
                f"ball of radius {epsilon:.4g} around ({p.x}, {p.y}) touches the boundary")
    k = len(points)
    for i in range(k):
        for j in range(i + 1, k):
            d = np.hypot(points[i].x - points[j].x, points[i].y - points[j].y)
            if d < 2 * epsilon:
                raise ValueError(
                    f"mollification balls around points {i} and {j} overlap "
                    f"(distance {d:.4g} < 2*eps = {2 * epsilon:.4g})")


def ball_average(grid: Grid2D, values: np.ndarray, point: ObservationPoint,
                 epsilon: float) -> float:
    mask = ops.ball_indicator(grid, point.x, point.y, epsilon)
    count = int(np.count_nonzero(mask))
    if count == 0:
        raise ValueError(f"no cell centers inside the ball around ({point.x}, {point.y})")
    return float(values[mask].sum() / count)


def observe(grid: Grid2D, values: np.ndarray, point: ObservationPoint,
            observation: str, epsilon: float) -> float:
    if observation == OBS_MOLLIFIED:
        return ball_average(grid, values, point, epsilon)
    return ops.interp_bilinear(values, grid, point.x, point.y)


@dataclass
class CostBreakdown:
    tracking_running: float
    tracking_terminal: float
    velocity_running: float
    velocity_terminal: float
    control_energy: float

    @property
    def total(self) -> float:
        return (self.tracking_running + self.tracking_terminal + self.velocity_running
                + self.velocity_terminal + self.control_energy)


def eval_cost(traj: StateTrajectory, control: ControlField, spec: CostSpec) -> CostBreakdown:
    """Evaluate the tracking cost on a finished trajectory.

    Running sums use levels 0..N-1; terminal terms use level N.  The
    terminal tracking term is included only in J2 mode; the terminal
    velocity term is always present.
    """
    grid, dt, N = traj.grid, traj.dt, traj.n_steps
    if control is not None and (abs(control.dt - dt) > 1e-14 or control.n_steps != N):
        raise ValueError("control and trajectory disagree on dt or step count")
    spec.validate_against(grid, N)
    eps = spec.resolve_epsilon(grid)
    area = grid.cell_area
    w = spec.weights

    tr = 0.0
    for n in range(N):
        for i, p in enumerate(spec.points):
            mis = observe(grid, traj.phi[n], p, spec.observation, eps) - spec.targets[i, n]
            tr += 0.5 * mis * mis
    tr *= w.tracking_running * dt

    tt = 0.0
    if spec.mode == MODE_J2:
        for i, p in enumerate(spec.points):
            mis = observe(grid, traj.phi[N], p, spec.observation, eps) - spec.targets[i, N]
            tt += 0.5 * mis * mis
        tt *= w.tracking_terminal

    vr = 0.0
    for n in range(N):
        udx, udy = spec.u_d_at(grid, n)
        vr += 0.5 * (np.sum((traj.ux[n] - udx) ** 2) + np.sum((traj.uy[n] - udy) ** 2))
    vr *= w.velocity_running * dt * area

    udx, udy = spec.u_d_at(grid, N)
    vt = w.velocity_terminal * 0.5 * area * (
        np.sum((traj.ux[N] - udx) ** 2) + np.sum((traj.uy[N] - udy) ** 2))

    ce = 0.0
    if control is not None:
        ce = w.control_energy * 0.5 * dt * area * float(np.sum(control.data**2))

    return CostBreakdown(float(tr), float(tt), float(vr), float(vt), float(ce))


@dataclass
class AdmissibleBox:
    """Pointwise bounds U1 <= U <= U2 (scalars or arrays broadcastable to the control)."""

    lower: object = -np.inf
    upper: object = np.inf

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if np.any(lo > hi):
            raise ValueError("box requires U1 <= U2 everywhere")

    def clip(self, data: np.ndarray) -> np.ndarray:
        return np.clip(data, self.lower, self.upper)


def project_box(control: ControlField, box: AdmissibleBox) -> ControlField:
    """Pointwise clamp onto the box; idempotent."""
    return ControlField(control.grid, control.dt, box.clip(control.data))


def stationarity_residual(control: ControlField, grad: ControlField,
                          box: AdmissibleBox) -> float:
    """|| U - Proj(U - g) ||_{L2(Q)}: zero exactly at box-stationary points."""
    proj = box.clip(control.data - grad.data)
    diff = control.data - proj
    return float(np.sqrt(control.dt * control.grid.cell_area * np.sum(diff**2)))


def observation_rows(traj: StateTrajectory, spec: CostSpec):
    """Rows (step, t, point_index, observed, target, misfit) for all levels."""
    grid, dt = traj.grid, traj.dt
    eps = spec.resolve_epsilon(grid)
    rows = []
    for n in range(traj.n_steps + 1):
        for i, p in enumerate(spec.points):
            obs = observe(grid, traj.phi[n], p, spec.observation, eps)
            tgt = spec.targets[i, n]
            rows.append((n, n * dt, i, obs, tgt, obs - tgt))
    return rows
