"""Finite-difference operators on the MAC grid, with explicit transposes.

Every operator here acts on raw ndarrays (scalars shaped (nx, ny), x-face
arrays (nx+1, ny), y-face arrays (nx, ny+1)) and comes with a hand-written
transpose with respect to the unweighted array dot product.  Because the
cell and face volumes are uniform (hx*hy everywhere), these transposes are
also the adjoints in the discrete L2 inner products, which is what makes
the backward-in-time solvers exact duals of the forward ones.

Boundary conventions:
  - scalars: zero-flux ghosts (mirror reflection),
  - face normal components: identically zero on the boundary,
  - face tangential components: anti-reflection ghosts (no-slip wall).

Transposes of operators whose outputs structurally vanish on boundary
faces zero the corresponding cotangent entries first, i.e. they are the
adjoints restricted to the subspace of admissible fields.
"""

from __future__ import annotations

import numpy as np

from .grid import Grid2D


# ---------------------------------------------------------------------------
# cell <-> face averaging and differencing
# ---------------------------------------------------------------------------

def avg_x(c):
    """Cell field -> x-face field, two-point average; boundary faces 0."""
    nx, ny = c.shape
    out = np.zeros((nx + 1, ny))
    out[1:-1, :] = 0.5 * (c[1:, :] + c[:-1, :])
    return out


def avg_x_t(fx):
    out = 0.5 * (fx[1:-1, :]).copy()
    res = np.zeros((fx.shape[0] - 1, fx.shape[1]))
    res[:-1, :] += out
    res[1:, :] += out
    return res


def avg_y(c):
    nx, ny = c.shape
    out = np.zeros((nx, ny + 1))
    out[:, 1:-1] = 0.5 * (c[:, 1:] + c[:, :-1])
    return out


def avg_y_t(fy):
    out = 0.5 * (fy[:, 1:-1]).copy()
    res = np.zeros((fy.shape[0], fy.shape[1] - 1))
    res[:, :-1] += out
    res[:, 1:] += out
    return res


def diff_x(c, hx):
    """Cell field -> x-face field, (c[i] - c[i-1])/hx; boundary faces 0 (zero flux)."""
    nx, ny = c.shape
    out = np.zeros((nx + 1, ny))
    out[1:-1, :] = (c[1:, :] - c[:-1, :]) / hx
    return out


def diff_x_t(fx, hx):
    g = fx[1:-1, :]
    res = np.zeros((fx.shape[0] - 1, fx.shape[1]))
    res[1:, :] += g / hx
    res[:-1, :] -= g / hx
    return res


def diff_y(c, hy):
    nx, ny = c.shape
    out = np.zeros((nx, ny + 1))
    out[:, 1:-1] = (c[:, 1:] - c[:, :-1]) / hy
    return out


def diff_y_t(fy, hy):
    g = fy[:, 1:-1]
    res = np.zeros((fy.shape[0], fy.shape[1] - 1))
    res[:, 1:] += g / hy
    res[:, :-1] -= g / hy
    return res


def grad(c, grid: Grid2D):
    """Cell scalar -> face vector (zero normal flux on the boundary)."""
    return diff_x(c, grid.hx), diff_y(c, grid.hy)


def div(fx, fy, grid: Grid2D):
    """Face vector -> cell scalar divergence."""
    return (fx[1:, :] - fx[:-1, :]) / grid.hx + (fy[:, 1:] - fy[:, :-1]) / grid.hy


def div_t(c, grid: Grid2D):
    """Transpose of div restricted to zero-normal-boundary face fields (= -grad)."""
    gx, gy = grad(c, grid)
    return -gx, -gy


def laplacian(c, grid: Grid2D):
    """Neumann 5-point Laplacian in exact flux form: div(grad(c)).

    Self-transpose, and sums to zero against the uniform cell measure.
    """
    gx, gy = grad(c, grid)
    return div(gx, gy, grid)


def zero_normal(fx, fy):
    """Project a face pair onto the zero-normal-boundary subspace, in place."""
    fx[0, :] = 0.0
    fx[-1, :] = 0.0
    fy[:, 0] = 0.0
    fy[:, -1] = 0.0
    return fx, fy


# ---------------------------------------------------------------------------
# corner interpolants (for cross stresses and momentum fluxes)
# ---------------------------------------------------------------------------

def cell_to_corner(c):
    """Cell field -> corner field (nx+1, ny+1), 4-point average with mirror ghosts."""
    p = np.pad(c, 1, mode="edge")
    return 0.25 * (p[:-1, :-1] + p[1:, :-1] + p[:-1, 1:] + p[1:, 1:])


def cell_to_corner_t(w):
    nx1, ny1 = w.shape
    p = np.zeros((nx1 + 1, ny1 + 1))
    q = 0.25 * w
    p[:-1, :-1] += q
    p[1:, :-1] += q
    p[:-1, 1:] += q
    p[1:, 1:] += q
    core = p[1:-1, 1:-1].copy()
    core[0, :] += p[0, 1:-1]
    core[-1, :] += p[-1, 1:-1]
    core[:, 0] += p[1:-1, 0]
    core[:, -1] += p[1:-1, -1]
    core[0, 0] += p[0, 0]
    core[0, -1] += p[0, -1]
    core[-1, 0] += p[-1, 0]
    core[-1, -1] += p[-1, -1]
    return core


def ux_to_corner(ux):
    """x-velocity -> corners, y-average; wall rows are exactly 0 (anti-reflection)."""
    nx1, ny = ux.shape
    out = np.zeros((nx1, ny + 1))
    out[:, 1:-1] = 0.5 * (ux[:, 1:] + ux[:, :-1])
    return out


def ux_to_corner_t(w):
    res = np.zeros((w.shape[0], w.shape[1] - 1))
    g = 0.5 * w[:, 1:-1]
    res[:, 1:] += g
    res[:, :-1] += g
    return res


def uy_to_corner(uy):
    """y-velocity -> corners, x-average; wall columns are exactly 0."""
    nx, ny1 = uy.shape
    out = np.zeros((nx + 1, ny1))
    out[1:-1, :] = 0.5 * (uy[1:, :] + uy[:-1, :])
    return out


def uy_to_corner_t(w):
    res = np.zeros((w.shape[0] - 1, w.shape[1]))
    g = 0.5 * w[1:-1, :]
    res[1:, :] += g
    res[:-1, :] += g
    return res


def dux_dy_corner(ux, hy):
    """d(ux)/dy at corners with anti-reflection wall ghosts (ghost = -interior)."""
    nx1, ny = ux.shape
    out = np.zeros((nx1, ny + 1))
    out[:, 1:-1] = (ux[:, 1:] - ux[:, :-1]) / hy
    out[:, 0] = 2.0 * ux[:, 0] / hy
    out[:, -1] = -2.0 * ux[:, -1] / hy
    return out


def dux_dy_corner_t(w, hy):
    res = np.zeros((w.shape[0], w.shape[1] - 1))
    g = w[:, 1:-1] / hy
    res[:, 1:] += g
    res[:, :-1] -= g
    res[:, 0] += 2.0 * w[:, 0] / hy
    res[:, -1] -= 2.0 * w[:, -1] / hy
    return res


def duy_dx_corner(uy, hx):
    """d(uy)/dx at corners with anti-reflection wall ghosts."""
    nx, ny1 = uy.shape
    out = np.zeros((nx + 1, ny1))
    out[1:-1, :] = (uy[1:, :] - uy[:-1, :]) / hx
    out[0, :] = 2.0 * uy[0, :] / hx
    out[-1, :] = -2.0 * uy[-1, :] / hx
    return out


def duy_dx_corner_t(w, hx):
    res = np.zeros((w.shape[0] - 1, w.shape[1]))
    g = w[1:-1, :] / hx
    res[1:, :] += g
    res[:-1, :] -= g
    res[0, :] += 2.0 * w[0, :] / hx
    res[-1, :] -= 2.0 * w[-1, :] / hx
    return res


def corner_dy_to_xface(q, hy):
    """Corner field -> x-face field, y-difference; boundary normal rows zeroed."""
    out = (q[:, 1:] - q[:, :-1]) / hy
    out[0, :] = 0.0
    out[-1, :] = 0.0
    return out


def corner_dy_to_xface_t(fx, hy):
    g = fx.copy()
    g[0, :] = 0.0
    g[-1, :] = 0.0
    q = np.zeros((fx.shape[0], fx.shape[1] + 1))
    q[:, 1:] += g / hy
    q[:, :-1] -= g / hy
    return q


def corner_dx_to_yface(q, hx):
    """Corner field -> y-face field, x-difference; boundary normal columns zeroed."""
    out = (q[1:, :] - q[:-1, :]) / hx
    out[:, 0] = 0.0
    out[:, -1] = 0.0
    return out


def corner_dx_to_yface_t(fy, hx):
    g = fy.copy()
    g[:, 0] = 0.0
    g[:, -1] = 0.0
    q = np.zeros((fy.shape[0] + 1, fy.shape[1]))
    q[1:, :] += g / hx
    q[:-1, :] -= g / hx
    return q


def face_to_cell_x(ux):
    """x-face field -> cell field, two-point average."""
    return 0.5 * (ux[1:, :] + ux[:-1, :])


def face_to_cell_x_t(c):
    res = np.zeros((c.shape[0] + 1, c.shape[1]))
    res[1:, :] += 0.5 * c
    res[:-1, :] += 0.5 * c
    res[0, :] = 0.0
    res[-1, :] = 0.0
    return res


def face_to_cell_y(uy):
    return 0.5 * (uy[:, 1:] + uy[:, :-1])


def face_to_cell_y_t(c):
    res = np.zeros((c.shape[0], c.shape[1] + 1))
    res[:, 1:] += 0.5 * c
    res[:, :-1] += 0.5 * c
    res[:, 0] = 0.0
    res[:, -1] = 0.0
    return res


# ---------------------------------------------------------------------------
# strain components at their natural locations
# ---------------------------------------------------------------------------

def dxx(ux, hx):
    """d(ux)/dx at cell centers (uses boundary faces, which are 0 for no-slip)."""
    return (ux[1:, :] - ux[:-1, :]) / hx


def dxx_t(c, hx):
    nx, ny = c.shape
    res = np.zeros((nx + 1, ny))
    res[1:, :] += c / hx
    res[:-1, :] -= c / hx
    res[0, :] = 0.0
    res[-1, :] = 0.0
    return res


def dyy(uy, hy):
    return (uy[:, 1:] - uy[:, :-1]) / hy


def dyy_t(c, hy):
    nx, ny = c.shape
    res = np.zeros((nx, ny + 1))
    res[:, 1:] += c / hy
    res[:, :-1] -= c / hy
    res[:, 0] = 0.0
    res[:, -1] = 0.0
    return res


# ---------------------------------------------------------------------------
# point evaluation
# ---------------------------------------------------------------------------

def interp_bilinear(f: np.ndarray, grid: Grid2D, x: float, y: float) -> float:
    """Bilinear interpolation from the 4 surrounding cell centers.

    Exact for affine fields.  Points outside the convex hull of cell
    centers are rejected.
    """
    sx = x / grid.hx - 0.5
    sy = y / grid.hy - 0.5
    if not (0.0 <= sx <= grid.nx - 1 and 0.0 <= sy <= grid.ny - 1):
        raise ValueError(
            f"point ({x}, {y}) lies outside the cell-center interpolation stencil"
        )
    i0 = min(int(np.floor(sx)), grid.nx - 2)
    j0 = min(int(np.floor(sy)), grid.ny - 2)
    ax = sx - i0
    ay = sy - j0
    return float(
        (1 - ax) * (1 - ay) * f[i0, j0]
        + ax * (1 - ay) * f[i0 + 1, j0]
        + (1 - ax) * ay * f[i0, j0 + 1]
        + ax * ay * f[i0 + 1, j0 + 1]
    )


def ball_indicator(grid: Grid2D, x: float, y: float, radius: float) -> np.ndarray:
    """Boolean mask of cells whose centers lie in the open ball B((x,y), radius)."""
    X, Y = grid.cell_centers()
    return (X - x) ** 2 + (Y - y) ** 2 < radius**2
