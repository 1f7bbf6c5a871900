"""Spinodal decomposition under the logarithmic (singular) potential.

A small random perturbation of the mixed state phi = 0 is unstable for a
deep enough quench (theta_c > 2 theta) and separates into domains near the
binodal compositions.  The point of the demo is the separation property:
although the potential blows up at phi = +-1, the solution stays strictly
inside (-1, 1) on its own -- the safety clamp of the evaluator is never
hit, which the run verifies by counting clamp events.
"""

import pathlib

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from chns_control import parse_config, simulate

OUT = pathlib.Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)
CONFIG = pathlib.Path(__file__).parent.parent / "configs" / "spinodal-log.json"

cfg = parse_config(CONFIG)
models = cfg.models()
print(f"potential: logarithmic, clamp margin delta_min = "
      f"{models.potential.delta_min:g}")
print(f"stabilization S = {models.stabilization:.2f}")

traj = simulate(cfg.initial_phi(), cfg.initial_u(), cfg.initial_control(),
                cfg.T, models)

amp = np.array([np.max(np.abs(p)) for p in traj.phi])
print(f"max|phi| grows {amp[0]:.3f} -> {amp[-1]:.3f} "
      f"(separation bound 1 - 1e-3 = 0.999)")
print(f"clamp events during the whole run: {traj.clamp_events} (expected 0)")

fig, axes = plt.subplots(1, 3, figsize=(13, 4))
for ax, n in zip(axes, (0, traj.n_steps // 2, traj.n_steps)):
    im = ax.imshow(traj.phi[n].T, origin="lower", extent=[0, 4, 0, 4],
                   vmin=-1, vmax=1, cmap="RdBu_r")
    ax.set_title(f"t = {n * traj.dt:.2f}")
fig.colorbar(im, ax=axes, shrink=0.8, label="phi")
fig.savefig(OUT / "spinodal_fields.png", dpi=130)

fig, ax = plt.subplots(figsize=(6, 3.5), constrained_layout=True)
ax.plot(traj.times(), amp, label="max |phi|")
ax.axhline(0.999, color="k", ls="--", lw=1, label="separation bound")
ax.set_xlabel("t"), ax.set_ylabel("max |phi|"), ax.legend()
ax.set_title("strict separation from the singular values")
fig.savefig(OUT / "spinodal_separation.png", dpi=130)
print(f"figures written to {OUT}")
