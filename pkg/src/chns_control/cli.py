"""Command-line entry point: simulate / optimize / gradcheck / verify / info.

Exit codes: 0 success, 1 a numerical check failed, 2 usage or config error.
The environment variable CHNS_THREADS (default 1) lets independent
verification directions run on a thread pool; results are assembled in a
fixed order, so outputs do not depend on the thread count.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .adjoint import cost_gradient, solve_adjoint
from .config import RunConfig, parse_config
from .exceptions import ConfigError, FieldFormatError
from .fieldio import (export_control, export_trajectory, write_cost_csv, write_csv,
                      write_duality_csv, write_observations_csv, write_optim_csv,
                      write_verify_csv)
from .objective import eval_cost, project_box
from .optimizer import optimize
from .verify import duality_gap, fd_directional_derivative, run_invariant_suite

logger = logging.getLogger(__name__)

GRADCHECK_TOL = 1e-2


def _threads() -> int:
    raw = os.environ.get("CHNS_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        logger.warning("CHNS_THREADS=%r is not an integer; using 1", raw)
        return 1
    return max(n, 1)


def _outdir(cfg: RunConfig, args) -> Path:
    out = Path(args.out) if args.out else Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(cfg: RunConfig, args) -> int:
    out = _outdir(cfg, args)
    cfg.echo(out)
    models = cfg.models()
    control = cfg.initial_control()
    traj = None
    from .forward import simulate as run
    traj = run(cfg.initial_phi(), cfg.initial_u(), control, cfg.T, models)
    export_trajectory(out, traj, models)
    cost = cfg.cost()
    if cost is not None:
        write_observations_csv(out / "observations.csv", traj, cost)
        write_cost_csv(out / "cost.csv", eval_cost(traj, control, cost))
    print(f"simulated {traj.n_steps} steps to t = {traj.T:g}; "
          f"outputs in {out}")
    return 0


def cmd_optimize(cfg: RunConfig, args) -> int:
    out = _outdir(cfg, args)
    cfg.echo(out)
    problem = cfg.problem()
    if problem.box is None:
        raise ConfigError("optimize needs a 'box' section in the config")
    report = optimize(problem.phi0, problem.u0, problem.cost, problem.box,
                      cfg.initial_control(), problem.models,
                      cfg.optimizer_options())
    write_optim_csv(out / "optim.csv", report)
    if report.final_control is not None:
        export_control(out, report.final_control)
        traj = problem.solve_forward(report.final_control)
        write_observations_csv(out / "observations.csv", traj, problem.cost)
        write_cost_csv(out / "cost.csv",
                       eval_cost(traj, report.final_control, problem.cost))
    print(f"optimization: {report.termination} after "
          f"{len(report.iterations)} iterates; final cost "
          f"{report.costs[-1]:.6g}, stationarity {report.final_stationarity:.3e}")
    return 1 if report.termination.startswith("solver failure") else 0


def cmd_gradcheck(cfg: RunConfig, args) -> int:
    out = _outdir(cfg, args)
    cfg.echo(out)
    problem = cfg.problem()
    U = problem.zero_control()
    if problem.box is not None:
        U = project_box(U, problem.box)

    rows = duality_gap(problem, U, n_directions=args.directions,
                       seed=cfg.seed + 100, threads=_threads())
    write_duality_csv(out / "duality.csv", rows)

    base = problem.solve_forward(U)
    adj = solve_adjoint(base, problem.cost, problem.models)
    g = cost_gradient(U, adj)
    if args.export_fields:
        from .fieldio import export_adjoint, export_linearized
        from .linearized import solve_linearized
        export_adjoint(out / "adj", adj)
        export_linearized(out / "lin",
                          solve_linearized(base, problem.smooth_direction(seed=cfg.seed + 100),
                                           models=problem.models))
    betas = (1e-1, 1e-2, 1e-3)
    fd_rows = []
    grad_rows = []
    worst_grad = 0.0
    for k in range(args.directions):
        h = problem.smooth_direction(seed=cfg.seed + 100 + k)
        table = fd_directional_derivative(problem, U, h, betas)
        pairing = problem.dt * problem.grid.cell_area * float(np.sum(g.data * h.data))
        rel = abs(pairing - table.extrapolated) / max(abs(table.extrapolated), 1e-300)
        worst_grad = max(worst_grad, rel)
        grad_rows.append((str(k), pairing, table.extrapolated, rel))
        for b, q in zip(table.betas, table.quotients):
            fd_rows.append((str(k), b, q))
    write_csv(out / "fd.csv", ["h_id", "beta", "quotient"], fd_rows)
    write_csv(out / "gradcheck.csv", ["h_id", "pairing", "fd_extrapolated", "rel_err"],
              grad_rows)

    worst_gap = max(r.rel_gap for r in rows)
    ok = worst_gap <= GRADCHECK_TOL and worst_grad <= GRADCHECK_TOL
    print(f"gradcheck: max duality rel gap {worst_gap:.3e}, "
          f"max gradient rel err {worst_grad:.3e} "
          f"({'ok' if ok else 'FAIL'} at {GRADCHECK_TOL:g})")
    return 0 if ok else 1


def cmd_verify(cfg: RunConfig, args) -> int:
    out = _outdir(cfg, args)
    cfg.echo(out)
    problem = cfg.problem_for_verify()
    report = run_invariant_suite(problem, cfg.initial_control())
    write_verify_csv(out / "verify.csv", report)
    for c in report.checks:
        print(f"[{'pass' if c.passed else 'FAIL'}] {c.name}: {c.metric} = "
              f"{c.value:.6g} (tolerance {c.tolerance:g})")
    return 0 if report.all_passed else 1


def cmd_info(cfg: RunConfig, args) -> int:
    g = cfg.grid
    m = cfg.resolved["models"]
    print(f"grid: {g.nx} x {g.ny} on [0,{g.Lx}] x [0,{g.Ly}] "
          f"(hx={g.hx:.6g}, hy={g.hy:.6g})")
    print(f"time: T={cfg.T:g}, dt={cfg.dt:g}, steps={cfg.n_steps}")
    print(f"potential: {m['potential']['kind']}, stabilization S={m['stabilization']:.6g}")
    cost = cfg.resolved.get("cost")
    if cost:
        print(f"cost: mode {cost['mode']}, {len(cost['points'])} observation points, "
              f"observation {cost['observation']} (eps={cost['epsilon']:.6g})")
    if "box" in cfg.resolved:
        print(f"box: [{cfg.resolved['box']['U1']}, {cfg.resolved['box']['U2']}]")
    print(f"output directory: {cfg.output_dir}; seed {cfg.seed}")
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "optimize": cmd_optimize,
    "gradcheck": cmd_gradcheck,
    "verify": cmd_verify,
    "info": cmd_info,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chns",
        description="Phase-field two-phase flow solver with pointwise-tracking "
                    "optimal control")
    sub = parser.add_subparsers(dest="command")
    for name, help_text in [
        ("simulate", "run the forward solver and export the trajectory"),
        ("optimize", "projected-gradient control optimization"),
        ("gradcheck", "finite-difference and transposition checks"),
        ("verify", "invariant suite on the configured run"),
        ("info", "print the resolved configuration summary"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="JSON run configuration")
        if name != "info":
            p.add_argument("--out", default=None, help="output directory "
                           "(default: output.directory from the config)")
        if name == "gradcheck":
            p.add_argument("--directions", type=int, default=5,
                           help="number of random directions (default 5)")
            p.add_argument("--export-fields", action="store_true",
                           help="also export dual and linearized snapshots "
                                "under adj/ and lin/")
    return parser


def run_command(argv) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        cfg = parse_config(args.config)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, FieldFormatError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
