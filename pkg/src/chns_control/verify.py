"""Independent oracles: derivative checks, duality gaps, stability ratios.

The finite-difference oracle touches only the forward solver and the cost
(never the dual sweep); the duality right-hand side touches only the
linearized solver and the cost's linear forms.  Gradient and transposition
claims are therefore always checked against routes that do not share code
with the quantity under test.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .adjoint import solve_adjoint
from .exceptions import CflViolationError, FieldNanError, SolverConvergenceError
from .forward import ControlField, FaceVectorField, ScalarField, energy, mass, simulate
from .linearized import solve_linearized
from .materials import LOGARITHMIC
from .objective import ball_average, eval_cost, observe
from .problem import ControlProblem
from . import operators as ops


# ---------------------------------------------------------------------------
# finite-difference directional derivative (forward + cost only)
# ---------------------------------------------------------------------------

@dataclass
class FdDerivativeTable:
    betas: list
    quotients: list
    extrapolated: float


def fd_directional_derivative(problem: ControlProblem, U: ControlField,
                              h: ControlField, betas) -> FdDerivativeTable:
    """Central difference quotients (j(U+bh) - j(U-bh)) / 2b per beta.

    The returned extrapolation removes the O(beta^2) truncation using the
    two smallest betas.
    """
    betas = sorted(float(b) for b in betas)
    if len(betas) < 3 or betas[0] <= 0:
        raise ValueError("need >= 3 positive decreasing betas")
    quotients = []
    for b in betas:
        jp = problem.reduced_cost(U + b * h).total
        jm = problem.reduced_cost(U + (-b) * h).total
        quotients.append((jp - jm) / (2 * b))
    b1, b2 = betas[1], betas[0]          # two smallest
    d1, d2 = quotients[1], quotients[0]
    extrap = (b1**2 * d2 - b2**2 * d1) / (b1**2 - b2**2)
    return FdDerivativeTable(betas, quotients, float(extrap))


# ---------------------------------------------------------------------------
# Taylor remainder of the solution map (forward + linearized)
# ---------------------------------------------------------------------------

@dataclass
class TaylorRemainderTable:
    betas: list
    remainders: list
    slope: float


def trajectory_l2q_distance(a, b, lin=None, scale=1.0):
    """L2(Q) distance over the phi and velocity slots; optionally subtracts
    scale * the linearized solution."""
    grid = a.grid
    acc = 0.0
    for n in range(a.n_steps + 1):
        dphi = a.phi[n] - b.phi[n]
        dux = a.ux[n] - b.ux[n]
        duy = a.uy[n] - b.uy[n]
        if lin is not None:
            dphi = dphi - scale * lin.psi[n]
            dux = dux - scale * lin.wx[n]
            duy = duy - scale * lin.wy[n]
        acc += np.sum(dphi**2) + np.sum(dux**2) + np.sum(duy**2)
    return float(np.sqrt(a.dt * grid.cell_area * acc))


def taylor_remainder_test(problem: ControlProblem, U: ControlField,
                          h: ControlField, betas) -> TaylorRemainderTable:
    """R(beta) = || S(U + beta h) - S(U) - beta psi_h ||_{L2(Q)} and its slope."""
    betas = sorted((float(b) for b in betas), reverse=True)
    base = problem.solve_forward(U)
    lin = solve_linearized(base, h, models=problem.models)
    remainders = []
    for b in betas:
        pert = problem.solve_forward(U + b * h)
        remainders.append(trajectory_l2q_distance(pert, base, lin, b))
    slope = float(np.polyfit(np.log(betas), np.log(np.maximum(remainders, 1e-300)), 1)[0])
    return TaylorRemainderTable(betas, remainders, slope)


# ---------------------------------------------------------------------------
# transposition / duality gap (adjoint lhs vs linearized rhs)
# ---------------------------------------------------------------------------

@dataclass
class DualityRow:
    h_id: int
    lhs: float
    rhs: float          # ball-averaged observations (the mollified pairing)
    rhs_point: float    # bilinear point observations (the sensor-literal form)

    @property
    def gap(self) -> float:
        return self.lhs - self.rhs

    @property
    def rel_gap(self) -> float:
        return abs(self.gap) / max(abs(self.rhs), 1e-300)

    @property
    def gap_point(self) -> float:
        return self.lhs - self.rhs_point


def cost_linear_form(problem: ControlProblem, base, lin, observation: str) -> float:
    """Derivative of the tracking cost along a linearized solution.

    ``observation`` selects ball-averaged or bilinear point evaluation for
    both the misfit weights and the linearized readings.
    """
    grid, dt, N = problem.grid, problem.dt, problem.n_steps
    spec = problem.cost
    eps = spec.resolve_epsilon(grid)
    w = spec.weights
    val = 0.0
    for n in range(N):
        for i, p in enumerate(spec.points):
            mis = observe(grid, base.phi[n], p, observation, eps) - spec.targets[i, n]
            val += w.tracking_running * dt * mis * observe(grid, lin.psi[n], p,
                                                           observation, eps)
        udx, udy = spec.u_d_at(grid, n)
        val += w.velocity_running * dt * grid.cell_area * (
            np.sum((base.ux[n] - udx) * lin.wx[n]) + np.sum((base.uy[n] - udy) * lin.wy[n]))
    if spec.mode == "J2":
        for i, p in enumerate(spec.points):
            mis = observe(grid, base.phi[N], p, observation, eps) - spec.targets[i, N]
            val += w.tracking_terminal * mis * observe(grid, lin.psi[N], p,
                                                       observation, eps)
    udx, udy = spec.u_d_at(grid, N)
    val += w.velocity_terminal * grid.cell_area * (
        np.sum((base.ux[N] - udx) * lin.wx[N]) + np.sum((base.uy[N] - udy) * lin.wy[N]))
    return float(val)


def duality_gap(problem: ControlProblem, U: ControlField = None,
                epsilon: float = None, n_directions: int = 5,
                seed: int = 100, threads: int = 1) -> list:
    """Per-direction transposition identity check.

    lhs = <xi, h> from the dual sweep; rhs from one linearized solve paired
    with the cost's linear form (ball-averaged and point variants).  With
    threads > 1 the independent directions run on a pool; assembly order is
    fixed, so the result does not depend on the thread count.
    """
    if n_directions < 3:
        raise ValueError("need at least 3 random directions")
    U = problem.zero_control() if U is None else U
    base = problem.solve_forward(U)
    adj = solve_adjoint(base, problem.cost, problem.models, epsilon=epsilon)
    directions = [problem.smooth_direction(seed=seed + k) for k in range(n_directions)]

    def one(k):
        lin = solve_linearized(base, directions[k], models=problem.models)
        return DualityRow(
            h_id=k,
            lhs=adj.pair_control(directions[k]),
            rhs=cost_linear_form(problem, base, lin, "mollified"),
            rhs_point=cost_linear_form(problem, base, lin, "point"),
        )

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, range(n_directions)))
    return [one(k) for k in range(n_directions)]


# ---------------------------------------------------------------------------
# continuous dependence / stability ratios
# ---------------------------------------------------------------------------

@dataclass
class StabilityRow:
    magnitude: float
    ratio_phi_sup: float
    ratio_phi_h2: float
    ratio_u_sup: float
    skipped: bool = False


def stability_ratio(problem: ControlProblem, magnitudes, U: ControlField = None,
                    direction: ControlField = None, seed: int = 200) -> list:
    """Perturbation-response ratios for paired runs differing only in control.

    For each magnitude a: sup_t ||phi_a - phi||, the space-time H2-type
    norm, and sup_t ||u_a - u||, each divided by ||a h||_{L2(Q)}.
    """
    if len(list(magnitudes)) < 3:
        raise ValueError("need >= 3 perturbation magnitudes")
    U = problem.zero_control() if U is None else U
    h = problem.smooth_direction(seed=seed) if direction is None else direction
    grid = problem.grid
    area = grid.cell_area
    base = problem.solve_forward(U)
    rows = []
    for a in magnitudes:
        dU = float(a) * h
        if dU.norm_l2q() == 0.0:
            rows.append(StabilityRow(float(a), 0.0, 0.0, 0.0, skipped=True))
            continue
        pert = problem.solve_forward(U + dU)
        sup_phi = 0.0
        sup_u = 0.0
        h2_acc = 0.0
        for n in range(base.n_steps + 1):
            dphi = pert.phi[n] - base.phi[n]
            gx, gy = ops.grad(dphi, grid)
            lap = ops.laplacian(dphi, grid)
            sup_phi = max(sup_phi, np.sqrt(area * np.sum(dphi**2)))
            h2_acc += np.sum(dphi**2) + np.sum(gx**2) + np.sum(gy**2) + np.sum(lap**2)
            du = np.sqrt(area * (np.sum((pert.ux[n] - base.ux[n]) ** 2)
                                 + np.sum((pert.uy[n] - base.uy[n]) ** 2)))
            sup_u = max(sup_u, du)
        h2_norm = np.sqrt(base.dt * area * h2_acc)
        nrm = dU.norm_l2q()
        rows.append(StabilityRow(float(a), sup_phi / nrm, h2_norm / nrm, sup_u / nrm))
    return rows


# ---------------------------------------------------------------------------
# invariant suite over a configured run
# ---------------------------------------------------------------------------

@dataclass
class CheckResult:
    name: str
    metric: str
    value: float
    tolerance: float
    passed: bool
    runtime: float = 0.0
    note: str = ""


@dataclass
class VerificationReport:
    checks: list = field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, *args, **kw):
        self.checks.append(CheckResult(*args, **kw))


def run_invariant_suite(problem: ControlProblem, control: ControlField = None) -> VerificationReport:
    """Mass balance, energy decay, incompressibility, and (for the singular
    potential) separation-with-zero-clamps on the configured run.

    Failures are recorded, never raised; the report carries pass/fail per
    check for the caller's exit signal.
    """
    report = VerificationReport()
    control = problem.zero_control() if control is None else control
    grid, models = problem.grid, problem.models
    area = grid.cell_area

    t0 = time.perf_counter()
    try:
        traj = problem.solve_forward(control)
    except (CflViolationError, SolverConvergenceError, FieldNanError) as exc:
        report.add("forward-run", "completed", 0.0, 1.0, False,
                   time.perf_counter() - t0, f"step error: {exc}")
        return report
    dt_run = time.perf_counter() - t0
    report.add("forward-run", "completed", 1.0, 1.0, True, dt_run)

    m0 = mass(grid, traj.phi[0])
    injected = traj.dt * float(np.sum(control.data)) * area
    gap = abs(mass(grid, traj.phi[-1]) - m0 - injected)
    tol = 1e-10 * (1 + abs(m0))
    report.add("mass-balance", "|dmass - integral(U)|", gap, tol, bool(gap <= tol),
               note="conservative flux form of the phase update")

    report.add("incompressibility", "max |div u|", traj.max_divergence, 1e-8,
               bool(traj.max_divergence <= 1e-8),
               note="projection onto the discrete divergence-free space")

    # decoupled energy decay from the same initial phase field
    t0 = time.perf_counter()
    try:
        dec = simulate(problem.phi0, FaceVectorField.zeros(grid),
                       ControlField.zeros(grid, problem.dt, problem.n_steps),
                       problem.T, models)
        energies = [energy(grid, dec.phi[n], dec.ux[n], dec.uy[n], models.potential)
                    for n in range(dec.n_steps + 1)]
        worst = float(np.max(np.diff(energies))) if dec.n_steps > 0 else 0.0
        report.add("energy-decay", "max energy increment", worst, 1e-10,
                   bool(worst <= 1e-10), time.perf_counter() - t0,
                   note="stabilized semi-implicit update without transport or source")
    except (CflViolationError, SolverConvergenceError, FieldNanError) as exc:
        report.add("energy-decay", "max energy increment", np.inf, 1e-10, False,
                   time.perf_counter() - t0, f"step error: {exc}")

    if models.potential.kind == LOGARITHMIC:
        max_abs = max(float(np.max(np.abs(p))) for p in traj.phi)
        report.add("separation", "max |phi|", max_abs, 1.0 - 1e-3,
                   bool(max_abs <= 1.0 - 1e-3),
                   note="phase stays strictly inside the singular range")
        report.add("clamp-events", "count", float(traj.clamp_events), 0.0,
                   bool(traj.clamp_events == 0),
                   note="singular-potential evaluations never hit the clamp")
    return report
