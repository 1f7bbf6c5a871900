"""Bundle of everything that defines one control problem instance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .forward import ControlField, Models, StateTrajectory, simulate
from .grid import FaceVectorField, Grid2D, ScalarField
from .objective import AdmissibleBox, CostBreakdown, CostSpec, eval_cost


@dataclass
class ControlProblem:
    """Grid, horizon, models, initial data, cost, and (optionally) the box."""

    grid: Grid2D
    dt: float
    n_steps: int
    models: Models
    phi0: ScalarField
    u0: FaceVectorField
    cost: CostSpec
    box: AdmissibleBox = None

    def __post_init__(self):
        if self.cost is not None:
            self.cost.validate_against(self.grid, self.n_steps)

    @property
    def T(self) -> float:
        return self.n_steps * self.dt

    def zero_control(self) -> ControlField:
        return ControlField.zeros(self.grid, self.dt, self.n_steps)

    def solve_forward(self, control: ControlField) -> StateTrajectory:
        return simulate(self.phi0, self.u0, control, self.T, self.models)

    def reduced_cost(self, control: ControlField) -> CostBreakdown:
        return eval_cost(self.solve_forward(control), control, self.cost)

    def smooth_direction(self, seed: int, amplitude: float = 1.0,
                         modes: int = 2) -> ControlField:
        """Reproducible low-frequency space-time direction for derivative checks."""
        rng = np.random.default_rng(seed)
        X, Y = self.grid.cell_centers()
        data = np.zeros((self.n_steps, self.grid.nx, self.grid.ny))
        t = np.arange(self.n_steps) * self.dt
        for k in range(modes + 1):
            for l in range(modes + 1):
                spatial = np.cos(np.pi * k * X / self.grid.Lx) \
                    * np.cos(np.pi * l * Y / self.grid.Ly)
                a, b, om = rng.standard_normal(3)
                envelope = a + b * np.cos(np.pi * om * t / max(self.T, 1e-12))
                data += envelope[:, None, None] * spatial[None, :, :]
        peak = max(np.max(np.abs(data)), 1e-12)
        return ControlField(self.grid, self.dt, amplitude * data / peak)
