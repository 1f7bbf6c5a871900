"""Binary field snapshots (CHNSF1 / CHNSV1) and CSV writers.

Scalar file layout (magic CHNSF1):
    6 magic bytes, u32 nx, u32 ny (little endian), f64 Lx, f64 Ly,
    then nx*ny f64 cell values row-major with y as the outer index
    (i.e. the value at (i, j) sits at offset j*nx + i).

Face files (magic CHNSV1) hold two such blocks back to back with the grid
dimensions in each header: first the x component ((nx+1)*ny values), then
the y component (nx*(ny+1) values), both y-outer.

All CSV floats are printed with 17 significant digits so that written
values round-trip losslessly.
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .exceptions import FieldFormatError
from .grid import FaceVectorField, Grid2D, ScalarField

MAGIC_SCALAR = b"CHNSF1"
MAGIC_FACE = b"CHNSV1"
_HEADER = struct.Struct("<IIdd")


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def _pack_block(magic: bytes, grid: Grid2D, values: np.ndarray) -> bytes:
    payload = np.asarray(values, dtype="<f8").flatten(order="F").tobytes()
    return magic + _HEADER.pack(grid.nx, grid.ny, grid.Lx, grid.Ly) + payload


def _read_block(buf: bytes, offset: int, magic: bytes, shape_of):
    if len(buf) < offset + 6:
        raise FieldFormatError(f"truncated header at byte {len(buf)} (expected magic at {offset})")
    got = buf[offset:offset + 6]
    if got != magic:
        raise FieldFormatError(f"bad magic {got!r} at byte {offset}, expected {magic!r}")
    offset += 6
    if len(buf) < offset + _HEADER.size:
        raise FieldFormatError(f"truncated header at byte {len(buf)}")
    nx, ny, Lx, Ly = _HEADER.unpack_from(buf, offset)
    offset += _HEADER.size
    shape = shape_of(nx, ny)
    count = shape[0] * shape[1]
    end = offset + 8 * count
    if len(buf) < end:
        raise FieldFormatError(
            f"truncated payload: file ends at byte {len(buf)}, expected {end}")
    vals = np.frombuffer(buf, dtype="<f8", count=count, offset=offset)
    arr = vals.reshape(shape, order="F").copy()
    return (nx, ny, Lx, Ly), arr, end


def write_scalar_field(path, field: ScalarField) -> None:
    Path(path).write_bytes(_pack_block(MAGIC_SCALAR, field.grid, field.values))


def read_scalar_field(path, grid: Grid2D = None) -> ScalarField:
    buf = Path(path).read_bytes()
    (nx, ny, Lx, Ly), arr, end = _read_block(buf, 0, MAGIC_SCALAR, lambda a, b: (a, b))
    if end != len(buf):
        raise FieldFormatError(f"{end} bytes expected, file has {len(buf)}")
    g = Grid2D(nx, ny, Lx, Ly)
    if grid is not None and g != grid:
        raise FieldFormatError(
            f"field grid {nx}x{ny} [{Lx}x{Ly}] does not match expected "
            f"{grid.nx}x{grid.ny} [{grid.Lx}x{grid.Ly}]")
    return ScalarField(g, arr)


def write_face_field(path, field: FaceVectorField) -> None:
    grid = field.grid
    data = _pack_block(MAGIC_FACE, grid, field.x) + _pack_block(MAGIC_FACE, grid, field.y)
    Path(path).write_bytes(data)


def read_face_field(path, grid: Grid2D = None) -> FaceVectorField:
    buf = Path(path).read_bytes()
    (nx, ny, Lx, Ly), fx, off = _read_block(buf, 0, MAGIC_FACE, lambda a, b: (a + 1, b))
    hdr2, fy, end = _read_block(buf, off, MAGIC_FACE, lambda a, b: (a, b + 1))
    if hdr2 != (nx, ny, Lx, Ly):
        raise FieldFormatError("face-field component headers disagree")
    if end != len(buf):
        raise FieldFormatError(f"{end} bytes expected, file has {len(buf)}")
    g = Grid2D(nx, ny, Lx, Ly)
    if grid is not None and g != grid:
        raise FieldFormatError(
            f"field grid {nx}x{ny} does not match expected {grid.nx}x{grid.ny}")
    return FaceVectorField(g, fx, fy, noslip=False)


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        for row in rows:
            w.writerow([c if isinstance(c, str) else _fmt(c) for c in row])


def write_series_csv(path, traj, models) -> None:
    from .forward import energy, mass
    from . import operators as ops
    grid = traj.grid
    rows = []
    for n in range(traj.n_steps + 1):
        rows.append((
            str(n), n * traj.dt,
            mass(grid, traj.phi[n]),
            energy(grid, traj.phi[n], traj.ux[n], traj.uy[n], models.potential),
            np.max(np.abs(ops.div(traj.ux[n], traj.uy[n], grid))),
            np.min(traj.phi[n]), np.max(traj.phi[n]),
        ))
    write_csv(path, ["step", "t", "mass", "energy", "max_div_u", "min_phi", "max_phi"], rows)


def export_trajectory(outdir, traj, models, prefix="") -> None:
    """Per-snapshot binary fields plus the series diagnostics."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    for n in range(traj.n_steps + 1):
        write_scalar_field(out / f"{prefix}phi_{n:06d}.chnsf",
                           ScalarField(traj.grid, traj.phi[n]))
        write_face_field(out / f"{prefix}u_{n:06d}.chnsv",
                         FaceVectorField(traj.grid, traj.ux[n].copy(),
                                         traj.uy[n].copy(), noslip=False))
        write_scalar_field(out / f"{prefix}pi_{n:06d}.chnsf",
                           ScalarField(traj.grid, traj.pi[n]))
    write_series_csv(out / f"{prefix}series.csv", traj, models)


def export_control(outdir, control, prefix="control") -> None:
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    for n in range(control.n_steps):
        write_scalar_field(out / f"{prefix}_{n:06d}.chnsf",
                           ScalarField(control.grid, control.data[n]))


def export_linearized(outdir, lin) -> None:
    """Snapshots of the linearized solution, mirroring the run-directory layout."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    for n in range(lin.n_steps + 1):
        write_scalar_field(out / f"psi_{n:06d}.chnsf", ScalarField(lin.grid, lin.psi[n]))
        write_face_field(out / f"w_{n:06d}.chnsv",
                         FaceVectorField(lin.grid, lin.wx[n].copy(), lin.wy[n].copy(),
                                         noslip=False))
        write_scalar_field(out / f"pstar_{n:06d}.chnsf",
                           ScalarField(lin.grid, lin.pstar[n]))


def export_adjoint(outdir, adj) -> None:
    """Snapshots of the dual solution, mirroring the run-directory layout."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    for n in range(adj.n_steps + 1):
        write_scalar_field(out / f"xi_{n:06d}.chnsf", ScalarField(adj.grid, adj.xi[n]))
        write_face_field(out / f"v_{n:06d}.chnsv",
                         FaceVectorField(adj.grid, adj.vx[n].copy(), adj.vy[n].copy(),
                                         noslip=False))
        write_scalar_field(out / f"q_{n:06d}.chnsf", ScalarField(adj.grid, adj.q[n]))


def write_observations_csv(path, traj, spec) -> None:
    from .objective import observation_rows
    rows = [(str(r[0]), r[1], str(r[2]), r[3], r[4], r[5])
            for r in observation_rows(traj, spec)]
    write_csv(path, ["step", "t", "point_index", "observed", "target", "misfit"], rows)


def write_cost_csv(path, breakdown) -> None:
    write_csv(path, ["tracking_running", "tracking_terminal", "velocity_running",
                     "velocity_terminal", "control_energy", "total"],
              [(breakdown.tracking_running, breakdown.tracking_terminal,
                breakdown.velocity_running, breakdown.velocity_terminal,
                breakdown.control_energy, breakdown.total)])


def write_optim_csv(path, report) -> None:
    rows = []
    for r in report.iterations:
        c = r.cost
        rows.append((str(r.iteration), c.total, c.tracking_running, c.tracking_terminal,
                     c.velocity_running, c.velocity_terminal, c.control_energy,
                     r.step, r.stationarity, r.grad_norm))
    write_csv(path, ["iter", "cost_total", "tracking_running", "tracking_terminal",
                     "velocity_running", "velocity_terminal", "control_energy",
                     "step", "stationarity", "grad_norm"], rows)


def write_duality_csv(path, rows) -> None:
    write_csv(path, ["h_id", "lhs", "rhs", "gap", "rel_gap"],
              [(str(r.h_id), r.lhs, r.rhs, r.gap, r.rel_gap) for r in rows])


def write_verify_csv(path, report) -> None:
    write_csv(path, ["check", "metric", "value", "tolerance", "pass"],
              [(c.name, c.metric, c.value, c.tolerance, str(bool(c.passed)).lower())
               for c in report.checks])
