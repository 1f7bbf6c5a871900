"""Acceptance criteria, one test per criterion, each printing a pass/fail line.

Run with:  pytest tests/test_acceptance.py -v -s
"""

import csv
from pathlib import Path

import numpy as np
import pytest

from chns_control.adjoint import cost_gradient, solve_adjoint
from chns_control.cli import run_command
from chns_control.config import parse_config
from chns_control.forward import ControlField, Models, energy, mass, simulate
from chns_control.grid import FaceVectorField, ObservationPoint, ScalarField, make_grid
from chns_control.objective import CostSpec
from chns_control.optimizer import optimize
from chns_control.problem import ControlProblem
from chns_control.verify import (duality_gap, fd_directional_derivative,
                                 stability_ratio, taylor_remainder_test)

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

# regression values recorded at the first green run of this suite
TRACKING_RATIO_RECORDED = 0.2289
SPINODAL_PEAK_RECORDED = 0.97560


def report(index, name, passed, detail):
    tag = "PASS" if passed else "FAIL"
    print(f"[{tag}] criterion {index}: {name} -- {detail}")
    assert passed, f"criterion {index} ({name}): {detail}"


def smooth_scalar(grid, seed, amplitude, modes=3):
    rng = np.random.default_rng(seed)
    X, Y = grid.cell_centers()
    f = np.zeros(grid.shape)
    for k in range(modes + 1):
        for l in range(modes + 1):
            if k == l == 0:
                continue
            f += rng.standard_normal() * np.cos(np.pi * k * X / grid.Lx) \
                * np.cos(np.pi * l * Y / grid.Ly)
    return amplitude * f / max(np.max(np.abs(f)), 1e-12)


def vortex(grid, amplitude):
    xc = np.arange(grid.nx + 1) * grid.hx
    yc = np.arange(grid.ny + 1) * grid.hy
    X, Y = np.meshgrid(xc, yc, indexing="ij")
    chi = amplitude * np.sin(np.pi * X / grid.Lx) ** 2 * np.sin(np.pi * Y / grid.Ly) ** 2
    return FaceVectorField(grid, (chi[:, 1:] - chi[:, :-1]) / grid.hy,
                           -(chi[1:, :] - chi[:-1, :]) / grid.hx)


def tracking_problem(nx, n_steps=100, mode="J1"):
    """The 16x16/32x32 derivative-check instance (same continuous data)."""
    grid = make_grid(nx, nx, 1.0, 1.0)
    X, Y = grid.cell_centers()
    phi0 = ScalarField(grid, 0.3 * np.cos(np.pi * X) * np.cos(np.pi * Y)
                       + 0.1 * np.cos(2 * np.pi * X))
    pts = [ObservationPoint(0.3, 0.3), ObservationPoint(0.72, 0.7)]
    spec = CostSpec.constant_targets(pts, [0.25, -0.1], n_steps, mode=mode)
    return ControlProblem(grid=grid, dt=1e-3, n_steps=n_steps, models=Models.default(),
                          phi0=phi0, u0=vortex(grid, 0.5), cost=spec)


def test_criterion_1_mass_balance():
    grid = make_grid(32, 32, 1.0, 1.0)
    models = Models.default()
    dt, n = 1e-3, 100
    rng = np.random.default_rng(12)
    data = np.stack([smooth_scalar(grid, 100 + k, 1.0) * rng.standard_normal()
                     for k in range(n)])
    control = ControlField(grid, dt, data)
    phi0 = ScalarField(grid, smooth_scalar(grid, 1, 0.4))
    traj = simulate(phi0, vortex(grid, 0.5), control, n * dt, models)
    m0 = mass(grid, traj.phi[0])
    injected = dt * float(np.sum(control.data)) * grid.cell_area
    gap = abs(mass(grid, traj.phi[-1]) - m0 - injected)
    tol = 1e-10 * (1 + abs(m0))
    report(1, "mass balance", gap <= tol, f"|dmass - integral U| = {gap:.3e} <= {tol:.3e}")


def test_criterion_2_energy_stability():
    grid = make_grid(64, 64, 1.0, 1.0)
    models = Models.default()  # S = 1.66 covers [-1.2, 1.2]
    dt, n = 2e-3, 500
    phi0 = ScalarField(grid, smooth_scalar(grid, 2, 0.6, modes=5))
    traj = simulate(phi0, FaceVectorField.zeros(grid),
                    ControlField.zeros(grid, dt, n), n * dt, models)
    energies = [energy(grid, traj.phi[k], traj.ux[k], traj.uy[k], models.potential)
                for k in range(n + 1)]
    worst = float(np.max(np.diff(energies)))
    in_range = max(float(np.max(np.abs(p))) for p in traj.phi) <= 1.2
    report(2, "energy stability (decoupled)", worst <= 1e-10 and in_range,
           f"max energy increment over {n} steps = {worst:.3e} <= 1e-10")


def test_criterion_3_incompressibility():
    grid = make_grid(64, 64, 2.0, 2.0)
    models = Models.default()
    dt, n = 1e-3, 250
    X, Y = grid.cell_centers()
    phi0 = ScalarField(grid, np.tanh((0.5 - np.hypot(X - 1.0, Y - 1.0)) / 0.1))
    traj = simulate(phi0, vortex(grid, 1.0), ControlField.zeros(grid, dt, n),
                    n * dt, models)
    report(3, "incompressibility", traj.max_divergence <= 1e-8,
           f"max |div u| over the T=0.25 run = {traj.max_divergence:.3e} <= 1e-8")


def test_criterion_4_taylor_remainder():
    prob = tracking_problem(16)
    U = prob.zero_control()
    h = prob.smooth_direction(seed=41)
    table = taylor_remainder_test(prob, U, h, [1e-1, 1e-2, 1e-3])
    ok = 1.7 <= table.slope <= 2.3
    report(4, "Taylor remainder slope", ok,
           f"log-log slope = {table.slope:.3f} in [1.7, 2.3]; "
           f"R(beta) = {['%.3e' % r for r in table.remainders]}")


def test_criterion_5_transposition_duality():
    prob16 = tracking_problem(16)
    rows16 = duality_gap(prob16, n_directions=5, seed=500)
    worst_rel = max(r.rel_gap for r in rows16)

    prob32 = tracking_problem(32)
    rows32 = duality_gap(prob32, n_directions=5, seed=500)
    gap16 = float(np.mean([abs(r.gap_point) for r in rows16]))
    gap32 = float(np.mean([abs(r.gap_point) for r in rows32]))
    ratio = gap32 / gap16
    ok = worst_rel <= 1e-2 and ratio <= 0.7
    report(5, "transposition identity", ok,
           f"max rel gap (ball-averaged) = {worst_rel:.3e} <= 1e-2; "
           f"point-observation gap ratio under (h, eps) refinement = {ratio:.3f} <= 0.7")


@pytest.mark.parametrize("mode", ["J1", "J2"])
def test_criterion_6_gradient_correctness(mode):
    prob = tracking_problem(16, mode=mode)
    U = prob.zero_control()
    base = prob.solve_forward(U)
    adj = solve_adjoint(base, prob.cost, prob.models)
    g = cost_gradient(U, adj)
    worst = 0.0
    for k in range(5):
        h = prob.smooth_direction(seed=600 + k)
        table = fd_directional_derivative(prob, U, h, [1e-1, 1e-2, 1e-3])
        pairing = prob.dt * prob.grid.cell_area * float(np.sum(g.data * h.data))
        rel = abs(pairing - table.extrapolated) / max(abs(table.extrapolated), 1e-300)
        worst = max(worst, rel)
    report(6, f"gradient correctness ({mode})", worst <= 1e-2,
           f"max |<xi+U,h> - FD| / |FD| over 5 directions = {worst:.3e} <= 1e-2")


def test_criterion_7_optimization_descent():
    cfg = parse_config(CONFIG_DIR / "tracking-small.json")
    problem = cfg.problem()
    baseline = problem.reduced_cost(problem.zero_control())
    rep = optimize(problem.phi0, problem.u0, problem.cost, problem.box,
                   cfg.initial_control(), problem.models, cfg.optimizer_options())
    costs = rep.costs
    monotone = all(costs[i + 1] <= costs[i] for i in range(len(costs) - 1))
    strict = costs[-1] < costs[0]
    res_ok = rep.final_stationarity <= 1e-3 * (1 + rep.final_control.norm_l2q())
    ratio = rep.iterations[-1].cost.tracking_running / baseline.tracking_running
    regression_ok = abs(ratio - TRACKING_RATIO_RECORDED) <= 0.05
    ok = monotone and strict and res_ok and ratio <= 0.5 and regression_ok
    report(7, "optimization descent and stationarity", ok,
           f"{len(costs)} iterates, monotone={monotone}, final stationarity "
           f"{rep.final_stationarity:.3e}, tracking ratio {ratio:.4f} <= 0.5 "
           f"(recorded {TRACKING_RATIO_RECORDED})")


def test_criterion_8_continuous_dependence():
    prob = tracking_problem(16)
    rows = stability_ratio(prob, [1e-1, 1e-2, 1e-3], seed=800)
    spreads = {}
    for attr in ("ratio_phi_sup", "ratio_phi_h2", "ratio_u_sup"):
        vals = [getattr(r, attr) for r in rows]
        spreads[attr] = max(vals) / max(min(vals), 1e-300)
    worst = max(spreads.values())
    report(8, "continuous dependence", worst <= 10.0,
           f"ratio spread across magnitudes {{1e-1,1e-2,1e-3}}: "
           + ", ".join(f"{k}={v:.3f}" for k, v in spreads.items()) + " (<= 10)")


def test_criterion_9_separation_property():
    cfg = parse_config(CONFIG_DIR / "spinodal-log.json")
    models = cfg.models()
    traj = simulate(cfg.initial_phi(), cfg.initial_u(), cfg.initial_control(),
                    cfg.T, models)
    peak = max(float(np.max(np.abs(p))) for p in traj.phi)
    ok = traj.clamp_events == 0 and peak <= 1 - 1e-3 \
        and abs(peak - SPINODAL_PEAK_RECORDED) <= 1e-3
    report(9, "separation property", ok,
           f"clamp events = {traj.clamp_events} (need 0), max|phi| = {peak:.6f} "
           f"<= 0.999 (recorded {SPINODAL_PEAK_RECORDED})")


def test_criterion_10_determinism(tmp_path):
    cfg_path = str(CONFIG_DIR / "forward-smoke.json")
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert run_command(["simulate", "--config", cfg_path, "--out", str(out1)]) == 0
    assert run_command(["simulate", "--config", cfg_path, "--out", str(out2)]) == 0
    names = sorted(p.name for p in out1.iterdir())
    identical = all((out1 / n).read_bytes() == (out2 / n).read_bytes() for n in names)
    report(10, "bitwise determinism", identical and len(names) > 3,
           f"{len(names)} output files byte-identical across two runs")
