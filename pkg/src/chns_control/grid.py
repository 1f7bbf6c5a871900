"""Rectangular MAC grid and the discrete fields that live on it.

Grid layout (nx cells in x, ny cells in y, domain [0, Lx] x [0, Ly]):

  scalars   values[i, j]  at cell centers   ((i+0.5)*hx, (j+0.5)*hy)   shape (nx, ny)
  x-faces   ux[i, j]      at vertical faces (i*hx, (j+0.5)*hy)         shape (nx+1, ny)
  y-faces   uy[i, j]      at horizontal faces ((i+0.5)*hx, j*hy)       shape (nx, ny+1)

The first array index is always x.  Velocity components normal to the
boundary sit exactly on the wall (ux[0,:], ux[nx,:], uy[:,0], uy[:,ny]) and
are held at zero for no-slip fields; tangential wall values are represented
by anti-reflection ghosts inside the operators, never stored.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Grid2D:
    """Uniform rectangular grid of nx-by-ny cells on [0, Lx] x [0, Ly]."""

    nx: int
    ny: int
    Lx: float
    Ly: float

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise ValueError(f"grid needs nx, ny >= 3, got ({self.nx}, {self.ny})")
        if not (self.Lx > 0 and self.Ly > 0):
            raise ValueError(f"domain lengths must be positive, got ({self.Lx}, {self.Ly})")

    @property
    def hx(self) -> float:
        return self.Lx / self.nx

    @property
    def hy(self) -> float:
        return self.Ly / self.ny

    @property
    def hmax(self) -> float:
        return max(self.hx, self.hy)

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Meshgrid arrays (X, Y) of cell-center coordinates, shape (nx, ny)."""
        x = (np.arange(self.nx) + 0.5) * self.hx
        y = (np.arange(self.ny) + 0.5) * self.hy
        return np.meshgrid(x, y, indexing="ij")


def make_grid(nx: int, ny: int, Lx: float, Ly: float) -> Grid2D:
    """Validated Grid2D constructor; rejects nx, ny < 3 and nonpositive lengths."""
    return Grid2D(int(nx), int(ny), float(Lx), float(Ly))


@dataclass
class ScalarField:
    """Cell-centered scalar field: values[i, j] with i the x index."""

    grid: Grid2D
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError(
                f"scalar field shape {self.values.shape} != grid shape {self.grid.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("scalar field contains non-finite values")

    @classmethod
    def zeros(cls, grid: Grid2D) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def full(cls, grid: Grid2D, value: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(value)))

    @classmethod
    def from_function(cls, grid: Grid2D, f) -> "ScalarField":
        X, Y = grid.cell_centers()
        return cls(grid, f(X, Y))

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())


@dataclass
class FaceVectorField:
    """MAC velocity: x component on vertical faces, y component on horizontal ones.

    With ``noslip=True`` (the default) the normal components on the four
    boundaries are forced to zero on construction.
    """

    grid: Grid2D
    x: np.ndarray = None
    y: np.ndarray = None
    noslip: bool = field(default=True)

    def __post_init__(self):
        nx, ny = self.grid.nx, self.grid.ny
        if self.x is None:
            self.x = np.zeros((nx + 1, ny))
        if self.y is None:
            self.y = np.zeros((nx, ny + 1))
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.x.shape != (nx + 1, ny) or self.y.shape != (nx, ny + 1):
            raise ValueError(
                f"face field shapes {self.x.shape}, {self.y.shape} do not match "
                f"grid ({nx}x{ny})"
            )
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.y))):
            raise ValueError("face field contains non-finite values")
        if self.noslip:
            self.x[0, :] = 0.0
            self.x[-1, :] = 0.0
            self.y[:, 0] = 0.0
            self.y[:, -1] = 0.0

    @classmethod
    def zeros(cls, grid: Grid2D) -> "FaceVectorField":
        return cls(grid)

    def copy(self) -> "FaceVectorField":
        return FaceVectorField(self.grid, self.x.copy(), self.y.copy(), self.noslip)

    def max_abs(self) -> float:
        return max(np.max(np.abs(self.x)), np.max(np.abs(self.y)))


@dataclass(frozen=True)
class ObservationPoint:
    """Sensor location strictly inside the domain.

    ``validate_against_grid`` enforces the standoff dist(p, boundary)
    > 2*max(hx, hy) so that mollification balls around the point stay
    inside the domain.
    """

    x: float
    y: float

    def validate_against_grid(self, grid: Grid2D) -> None:
        margin = 2.0 * grid.hmax
        d = min(self.x, grid.Lx - self.x, self.y, grid.Ly - self.y)
        if d <= margin:
            raise ValueError(
                f"observation point ({self.x}, {self.y}) is {d:.4g} from the boundary; "
                f"needs > {margin:.4g} (= 2*max(hx,hy))"
            )
