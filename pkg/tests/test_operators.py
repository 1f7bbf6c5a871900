"""Stencil operators: conservation, adjointness, transposes, symmetry."""

import numpy as np
import pytest

from chns_control import operators as ops
from chns_control.grid import Grid2D, make_grid


GRID = make_grid(7, 5, 1.3, 0.9)
RNG = np.random.default_rng(7)


def random_faces(grid, zero_normal=True):
    fx = RNG.standard_normal((grid.nx + 1, grid.ny))
    fy = RNG.standard_normal((grid.nx, grid.ny + 1))
    if zero_normal:
        ops.zero_normal(fx, fy)
    return fx, fy


def test_make_grid_spacings():
    g = make_grid(4, 4, 1.0, 1.0)
    assert g.hx == 0.25 and g.hy == 0.25
    g = make_grid(3, 8, 1.0, 2.0)
    assert np.isclose(g.hx, 1.0 / 3.0) and g.hy == 0.25


def test_make_grid_rejects_bad_input():
    with pytest.raises(ValueError):
        make_grid(2, 4, 1, 1)
    with pytest.raises(ValueError):
        make_grid(4, 4, -1.0, 1.0)
    with pytest.raises(ValueError):
        make_grid(4, 4, 1.0, 0.0)


def test_laplacian_of_constant_is_zero():
    f = np.full(GRID.shape, 3.7)
    assert np.max(np.abs(ops.laplacian(f, GRID))) == 0.0


def test_laplacian_cosine_eigenfield():
    # cos(pi x / Lx) sampled at centers is an exact eigenfield of the stencil
    X, _ = GRID.cell_centers()
    f = np.cos(np.pi * X / GRID.Lx)
    lam = (2.0 / GRID.hx**2) * (1.0 - np.cos(np.pi / GRID.nx))
    assert np.allclose(ops.laplacian(f, GRID), -lam * f, atol=1e-12)


def test_laplacian_flux_sum_zero():
    for _ in range(5):
        f = RNG.standard_normal(GRID.shape)
        total = np.sum(ops.laplacian(f, GRID)) * GRID.cell_area
        assert abs(total) <= 1e-12 * np.linalg.norm(f)


def test_grad_div_negative_adjoint():
    for _ in range(5):
        f = RNG.standard_normal(GRID.shape)
        fx, fy = random_faces(GRID)
        gx, gy = ops.grad(f, GRID)
        lhs = np.sum(gx * fx) + np.sum(gy * fy)
        rhs = -np.sum(f * ops.div(fx, fy, GRID))
        assert abs(lhs - rhs) <= 1e-12 * (1 + abs(lhs))


def test_grad_of_constant_and_div_of_zero():
    f = np.full(GRID.shape, 2.2)
    gx, gy = ops.grad(f, GRID)
    assert np.max(np.abs(gx)) == 0 and np.max(np.abs(gy)) == 0
    assert np.max(np.abs(ops.div(*random_faces(GRID, False), GRID))) > 0  # sanity
    assert np.max(np.abs(ops.div(np.zeros_like(gx), np.zeros_like(gy), GRID))) == 0


CELL_OPS = [
    (lambda c: ops.avg_x(c), lambda w: ops.avg_x_t(w), "avg_x"),
    (lambda c: ops.avg_y(c), lambda w: ops.avg_y_t(w), "avg_y"),
    (lambda c: ops.diff_x(c, GRID.hx), lambda w: ops.diff_x_t(w, GRID.hx), "diff_x"),
    (lambda c: ops.diff_y(c, GRID.hy), lambda w: ops.diff_y_t(w, GRID.hy), "diff_y"),
    (lambda c: ops.cell_to_corner(c), lambda w: ops.cell_to_corner_t(w), "cell_to_corner"),
]


@pytest.mark.parametrize("fwd,bwd,name", CELL_OPS, ids=[t[2] for t in CELL_OPS])
def test_cell_op_transposes(fwd, bwd, name):
    for _ in range(5):
        c = RNG.standard_normal(GRID.shape)
        out = fwd(c)
        w = RNG.standard_normal(out.shape)
        lhs = np.sum(out * w)
        rhs = np.sum(c * bwd(w))
        assert abs(lhs - rhs) <= 1e-12 * (1 + abs(lhs)), name


FACE_OPS = [
    ("ux", lambda a: ops.ux_to_corner(a), lambda w: ops.ux_to_corner_t(w)),
    ("uy", lambda a: ops.uy_to_corner(a), lambda w: ops.uy_to_corner_t(w)),
    ("ux", lambda a: ops.dux_dy_corner(a, GRID.hy), lambda w: ops.dux_dy_corner_t(w, GRID.hy)),
    ("uy", lambda a: ops.duy_dx_corner(a, GRID.hx), lambda w: ops.duy_dx_corner_t(w, GRID.hx)),
    ("ux", lambda a: ops.dxx(a, GRID.hx), lambda w: ops.dxx_t(w, GRID.hx)),
    ("uy", lambda a: ops.dyy(a, GRID.hy), lambda w: ops.dyy_t(w, GRID.hy)),
    ("ux", lambda a: ops.face_to_cell_x(a), lambda w: ops.face_to_cell_x_t(w)),
    ("uy", lambda a: ops.face_to_cell_y(a), lambda w: ops.face_to_cell_y_t(w)),
]


@pytest.mark.parametrize("which,fwd,bwd", FACE_OPS)
def test_face_op_transposes(which, fwd, bwd):
    for _ in range(5):
        fx, fy = random_faces(GRID)
        a = fx if which == "ux" else fy
        out = fwd(a)
        w = RNG.standard_normal(out.shape)
        lhs = np.sum(out * w)
        rhs = np.sum(a * bwd(w))
        assert abs(lhs - rhs) <= 1e-12 * (1 + abs(lhs))


def test_corner_difference_transposes():
    q = RNG.standard_normal((GRID.nx + 1, GRID.ny + 1))
    fx = RNG.standard_normal((GRID.nx + 1, GRID.ny))
    ops.zero_normal(fx, np.zeros((GRID.nx, GRID.ny + 1)))
    lhs = np.sum(ops.corner_dy_to_xface(q, GRID.hy) * fx)
    rhs = np.sum(q * ops.corner_dy_to_xface_t(fx, GRID.hy))
    assert abs(lhs - rhs) <= 1e-12 * (1 + abs(lhs))

    fy = RNG.standard_normal((GRID.nx, GRID.ny + 1))
    ops.zero_normal(np.zeros((GRID.nx + 1, GRID.ny)), fy)
    lhs = np.sum(ops.corner_dx_to_yface(q, GRID.hx) * fy)
    rhs = np.sum(q * ops.corner_dx_to_yface_t(fy, GRID.hx))
    assert abs(lhs - rhs) <= 1e-12 * (1 + abs(lhs))


def test_interp_bilinear_constant_and_nodal():
    g = make_grid(8, 8, 1.0, 1.0)
    f = np.full(g.shape, 4.2)
    assert ops.interp_bilinear(f, g, 0.41, 0.77) == pytest.approx(4.2)
    X, Y = g.cell_centers()
    f = RNG.standard_normal(g.shape)
    assert ops.interp_bilinear(f, g, X[3, 5], Y[3, 5]) == pytest.approx(f[3, 5])


def test_interp_bilinear_exact_on_affine():
    g = make_grid(10, 10, 1.0, 1.0)
    X, Y = g.cell_centers()
    f = 2.0 * X + 3.0 * Y
    assert ops.interp_bilinear(f, g, 0.37, 0.61) == pytest.approx(2 * 0.37 + 3 * 0.61, abs=1e-14)


def test_interp_bilinear_rejects_outside_stencil():
    g = make_grid(8, 8, 1.0, 1.0)
    f = np.zeros(g.shape)
    with pytest.raises(ValueError):
        ops.interp_bilinear(f, g, 0.01, 0.5)


def test_xy_reflection_symmetry():
    # operators commute with the x<->y transpose on a square grid
    g = make_grid(6, 6, 1.0, 1.0)
    f = RNG.standard_normal(g.shape)
    assert np.allclose(ops.laplacian(f.T, g).T, ops.laplacian(f, g), atol=1e-13)
    gx, gy = ops.grad(f, g)
    gxt, gyt = ops.grad(f.T, g)
    assert np.allclose(gxt.T, gy) and np.allclose(gyt.T, gx)
