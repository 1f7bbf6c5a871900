"""Forward solver: mass identity, energy decay, incompressibility, convergence."""

import numpy as np
import pytest

from chns_control import operators as ops
from chns_control.exceptions import CflViolationError
from chns_control.forward import (ControlField, Models, cfl_number, energy, mass,
                                  simulate, step)
from chns_control.grid import FaceVectorField, ScalarField, make_grid
from chns_control.materials import MaterialModel, PotentialModel

RNG = np.random.default_rng(5)


def smooth_field(grid, rng, amplitude=0.3, modes=3):
    X, Y = grid.cell_centers()
    f = np.zeros(grid.shape)
    for k in range(1, modes + 1):
        for l in range(modes + 1):
            a = rng.standard_normal()
            f += a * np.cos(np.pi * k * X / grid.Lx) * np.cos(np.pi * l * Y / grid.Ly)
    f *= amplitude / max(np.max(np.abs(f)), 1e-12)
    return f


def vortex_velocity(grid, amplitude=1.0):
    """Divergence-free no-slip velocity from a corner streamfunction."""
    xc = np.arange(grid.nx + 1) * grid.hx
    yc = np.arange(grid.ny + 1) * grid.hy
    X, Y = np.meshgrid(xc, yc, indexing="ij")
    chi = amplitude * np.sin(np.pi * X / grid.Lx) ** 2 * np.sin(np.pi * Y / grid.Ly) ** 2
    ux = (chi[:, 1:] - chi[:, :-1]) / grid.hy
    uy = -(chi[1:, :] - chi[:-1, :]) / grid.hx
    return ux, uy


def test_constant_state_is_fixed_point():
    grid = make_grid(12, 12, 1.0, 1.0)
    models = Models.default()
    phi = np.full(grid.shape, 0.3)
    ux = np.zeros((grid.nx + 1, grid.ny))
    uy = np.zeros((grid.nx, grid.ny + 1))
    U = np.zeros(grid.shape)
    p, nx_, ny_, pi, mu, _ = step(grid, phi, ux, uy, U, 1e-2, models)
    assert np.allclose(p, phi, atol=1e-13)
    assert np.max(np.abs(nx_)) <= 1e-13 and np.max(np.abs(ny_)) <= 1e-13


def test_mass_identity_unit_source():
    grid = make_grid(10, 10, 1.0, 1.0)
    models = Models.default()
    dt = 1e-3
    control = ControlField.constant(grid, dt, 5, 1.0)
    phi0 = ScalarField(grid, smooth_field(grid, RNG))
    traj = simulate(phi0, FaceVectorField.zeros(grid), control, 5 * dt, models)
    for n in range(1, 6):
        expected = mass(grid, traj.phi[0]) + n * dt * 1.0
        assert mass(grid, traj.phi[n]) == pytest.approx(expected, abs=1e-12)


def test_mass_identity_random_control():
    grid = make_grid(16, 12, 1.0, 1.5)
    models = Models.default()
    dt = 1e-3
    n = 20
    control = ControlField(grid, dt, RNG.standard_normal((n, grid.nx, grid.ny)))
    phi0 = ScalarField(grid, smooth_field(grid, RNG))
    ux, uy = vortex_velocity(grid, 0.5)
    traj = simulate(phi0, FaceVectorField(grid, ux, uy), control, n * dt, models)
    injected = dt * np.sum(control.data) * grid.cell_area
    gap = mass(grid, traj.phi[-1]) - mass(grid, traj.phi[0]) - injected
    assert abs(gap) <= 1e-10 * (1 + abs(mass(grid, traj.phi[0])))


def test_energy_decay_decoupled_ch():
    grid = make_grid(24, 24, 1.0, 1.0)
    models = Models.default()  # S = 1.66 >= max|F''|/2 on [-1.2, 1.2]
    dt = 5e-3
    control = ControlField.zeros(grid, dt, 100)
    phi0 = ScalarField(grid, smooth_field(grid, np.random.default_rng(1), 0.7))
    traj = simulate(phi0, FaceVectorField.zeros(grid), control, 100 * dt, models)
    energies = [energy(grid, traj.phi[n], traj.ux[n], traj.uy[n], models.potential)
                for n in range(traj.n_steps + 1)]
    diffs = np.diff(energies)
    assert np.all(diffs <= 1e-10)
    assert energies[-1] < energies[0]  # actually relaxes


def test_divergence_free_coupled_run():
    grid = make_grid(16, 16, 1.0, 1.0)
    models = Models.default()
    dt = 1e-3
    control = ControlField.zeros(grid, dt, 50)
    X, Y = grid.cell_centers()
    phi0 = ScalarField(grid, np.tanh((0.15 - np.hypot(X - 0.5, Y - 0.5)) / 0.08))
    ux, uy = vortex_velocity(grid, 1.0)
    traj = simulate(phi0, FaceVectorField(grid, ux, uy), control, 50 * dt, models)
    assert traj.max_divergence <= 1e-8
    assert np.max(np.abs(ops.div(traj.ux[-1], traj.uy[-1], grid))) <= 1e-12


def test_energy_example_values():
    grid = make_grid(8, 8, 2.0, 1.0)
    pot = PotentialModel.double_well()
    zx = np.zeros((grid.nx + 1, grid.ny))
    zy = np.zeros((grid.nx, grid.ny + 1))
    assert energy(grid, np.zeros(grid.shape), zx, zy, pot) == pytest.approx(0.25 * 2.0)
    assert energy(grid, np.ones(grid.shape), zx, zy, pot) == pytest.approx(0.0)
    assert mass(grid, np.full(grid.shape, 0.7)) == pytest.approx(0.7 * 2.0)


def test_cfl_violation_raises():
    grid = make_grid(8, 8, 1.0, 1.0)
    models = Models.default()
    ux = np.zeros((grid.nx + 1, grid.ny))
    ux[4, :] = 200.0
    uy = np.zeros((grid.nx, grid.ny + 1))
    assert cfl_number(grid, ux, uy, 1e-2) > 1
    with pytest.raises(CflViolationError):
        step(grid, np.zeros(grid.shape), ux, uy, np.zeros(grid.shape), 1e-2, models)


def test_zero_steps_trajectory():
    grid = make_grid(8, 8, 1.0, 1.0)
    control = ControlField.zeros(grid, 1e-3, 0)
    phi0 = ScalarField.full(grid, 0.1)
    traj = simulate(phi0, FaceVectorField.zeros(grid), control, 0.0, Models.default())
    assert traj.n_steps == 0
    assert np.array_equal(traj.phi[0], phi0.values)


def test_initial_velocity_projected():
    grid = make_grid(8, 8, 1.0, 1.0)
    fx = RNG.standard_normal((grid.nx + 1, grid.ny))
    fy = RNG.standard_normal((grid.nx, grid.ny + 1))
    u0 = FaceVectorField(grid, fx, fy)  # not divergence free
    control = ControlField.zeros(grid, 1e-4, 3)
    traj = simulate(ScalarField.full(grid, 0.0), u0, control, 3e-4, Models.default())
    assert np.max(np.abs(ops.div(traj.ux[0], traj.uy[0], grid))) <= 1e-10


def test_temporal_self_convergence_first_order():
    # domain of size 2 keeps the phase dynamics on an observable time scale
    grid = make_grid(16, 16, 2.0, 2.0)
    models = Models.default()
    X, Y = grid.cell_centers()
    phi0 = ScalarField(grid, 0.4 * np.cos(np.pi * X / 2) * np.cos(np.pi * Y / 2))
    ux, uy = vortex_velocity(grid, 1.0)
    u0 = FaceVectorField(grid, ux, uy)
    T = 0.04

    def end_state(dt):
        n = round(T / dt)
        control = ControlField.zeros(grid, dt, n)
        traj = simulate(phi0, u0, control, T, models)
        return traj.phi[-1], traj.ux[-1]

    s1, s2, s3 = end_state(4e-3), end_state(2e-3), end_state(1e-3)
    e1 = np.hypot(np.linalg.norm(s1[0] - s2[0]), np.linalg.norm(s1[1] - s2[1]))
    e2 = np.hypot(np.linalg.norm(s2[0] - s3[0]), np.linalg.norm(s2[1] - s3[1]))
    slope = np.log2(e1 / e2)
    assert 0.8 <= slope <= 1.3, slope


def test_variable_mobility_and_viscosity_run():
    grid = make_grid(12, 12, 1.0, 1.0)
    mat = MaterialModel.from_polynomials([1.0, 0.005], [1.0, 0.05])
    models = Models.default(material=mat)
    dt = 1e-3
    control = ControlField.zeros(grid, dt, 10)
    phi0 = ScalarField(grid, smooth_field(grid, RNG, 0.5))
    traj = simulate(phi0, FaceVectorField.zeros(grid), control, 10 * dt, models)
    gap = mass(grid, traj.phi[-1]) - mass(grid, traj.phi[0])
    assert abs(gap) <= 1e-10
    assert traj.max_divergence <= 1e-8
