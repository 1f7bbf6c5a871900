"""Forward solve of the coupled phase-field / flow system.

A circular drop of one phase sits in a background vortex on [0,2]^2.  The
run demonstrates the three structural guarantees of the scheme:

  * exact mass balance (the phase update is in conservative flux form),
  * discrete incompressibility after every projection step,
  * monotone energy decay once the kinetic energy has been dissipated.

Figures land in demos/output/.
"""

import pathlib

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from chns_control import (ControlField, FaceVectorField, Models, ScalarField,
                          energy, make_grid, mass, simulate)

OUT = pathlib.Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

grid = make_grid(64, 64, 2.0, 2.0)
models = Models.default()

# drop of radius 0.5 with a tanh interface profile
X, Y = grid.cell_centers()
phi0 = ScalarField(grid, np.tanh((0.5 - np.hypot(X - 1.0, Y - 1.0)) / 0.1))

# divergence-free vortex from a corner streamfunction (no-slip compatible)
xc = np.arange(grid.nx + 1) * grid.hx
yc = np.arange(grid.ny + 1) * grid.hy
Xc, Yc = np.meshgrid(xc, yc, indexing="ij")
chi = 2.0 * np.sin(np.pi * Xc / 2) ** 2 * np.sin(np.pi * Yc / 2) ** 2
u0 = FaceVectorField(grid, (chi[:, 1:] - chi[:, :-1]) / grid.hy,
                     -(chi[1:, :] - chi[:-1, :]) / grid.hx)

dt, n_steps = 1e-3, 400
traj = simulate(phi0, u0, ControlField.zeros(grid, dt, n_steps), n_steps * dt, models)

times = traj.times()
masses = [mass(grid, p) for p in traj.phi]
energies = [energy(grid, traj.phi[n], traj.ux[n], traj.uy[n], models.potential)
            for n in range(n_steps + 1)]

print(f"mass drift      : {max(masses) - min(masses):.3e}  (flux-form exact)")
print(f"max |div u|     : {traj.max_divergence:.3e}")
print(f"energy          : {energies[0]:.4f} -> {energies[-1]:.4f}")

fig, axes = plt.subplots(1, 3, figsize=(13, 4))
for ax, n in zip(axes, (0, n_steps // 2, n_steps)):
    im = ax.imshow(traj.phi[n].T, origin="lower", extent=[0, 2, 0, 2],
                   vmin=-1, vmax=1, cmap="RdBu_r")
    ax.set_title(f"phase field at t = {n * dt:.2f}")
fig.colorbar(im, ax=axes, shrink=0.8, label="phi")
fig.savefig(OUT / "forward_drop_in_vortex.png", dpi=130)

fig, (a1, a2) = plt.subplots(1, 2, figsize=(10, 3.5), constrained_layout=True)
a1.plot(times, energies)
a1.set_xlabel("t"), a1.set_ylabel("total energy")
a1.set_title("energy history")
a2.semilogy(times, np.abs(np.asarray(masses) - masses[0]) + 1e-20)
a2.set_xlabel("t"), a2.set_ylabel("|mass(t) - mass(0)|")
a2.set_title("mass conservation (roundoff)")
fig.savefig(OUT / "forward_diagnostics.png", dpi=130)
print(f"figures written to {OUT}")
