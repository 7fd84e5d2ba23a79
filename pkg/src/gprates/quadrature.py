"""Midpoint tensor grids on the unit cube and the norms computed on them.

Everything downstream measures functions through their values on one of these
grids, so the grid object carries its own weights and all norms take plain
value arrays. Weights sum to one (Lebesgue measure of the cube).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "QuadratureGrid",
    "default_grid",
    "integrate",
    "l1_norm",
    "l2_norm_sq",
    "sup_norm",
    "l1_distance",
]

# cells per axis giving ~comparable resolution at the default dimensions
_DEFAULT_CELLS = {1: 512, 2: 64}


@dataclass(frozen=True)
class QuadratureGrid:
    """Points (m, d) in [0,1]^d with positive weights (m,) summing to one."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        w = np.asarray(self.weights, dtype=float).ravel()
        if pts.ndim != 2 or pts.shape[0] != w.shape[0]:
            raise ValueError(
                f"points {pts.shape} and weights {w.shape} do not align"
            )
        if np.any(w <= 0):
            raise ValueError("quadrature weights must be positive")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @classmethod
    def midpoint(cls, cells_per_axis: int, d: int = 1) -> "QuadratureGrid":
        """Tensor midpoint rule with ``cells_per_axis`` cells along each axis."""
        if cells_per_axis < 1:
            raise ValueError("need at least one cell per axis")
        if d < 1:
            raise ValueError("dimension must be >= 1")
        x = (np.arange(cells_per_axis) + 0.5) / cells_per_axis
        if d == 1:
            pts = x[:, None]
        else:
            mesh = np.meshgrid(*([x] * d), indexing="ij")
            pts = np.stack([m.ravel() for m in mesh], axis=1)
        w = np.full(pts.shape[0], 1.0 / pts.shape[0])
        return cls(pts, w)


def default_grid(d: int = 1) -> QuadratureGrid:
    """Midpoint grid at the resolution used throughout the experiments."""
    try:
        cells = _DEFAULT_CELLS[d]
    except KeyError:
        # keep total size near 4k for higher d, same budget as d=2
        cells = max(4, int(round(4096 ** (1.0 / d))))
    return QuadratureGrid.midpoint(cells, d)


def _values(values: np.ndarray, grid: QuadratureGrid) -> np.ndarray:
    v = np.asarray(values, dtype=float).ravel()
    if v.shape[0] != grid.size:
        raise ValueError(f"got {v.shape[0]} values for a grid of size {grid.size}")
    return v


def integrate(values: np.ndarray, grid: QuadratureGrid) -> float:
    return float(grid.weights @ _values(values, grid))


def l1_norm(
    values: np.ndarray, grid: QuadratureGrid, density: np.ndarray | None = None
) -> float:
    """L1 norm over the cube, optionally weighted by a density's grid values."""
    v = np.abs(_values(values, grid))
    if density is not None:
        v = v * _values(density, grid)
    return float(grid.weights @ v)


def l2_norm_sq(values: np.ndarray, grid: QuadratureGrid) -> float:
    v = _values(values, grid)
    return float(grid.weights @ (v * v))


def sup_norm(values: np.ndarray, grid: QuadratureGrid) -> float:
    return float(np.max(np.abs(_values(values, grid))))


def l1_distance(
    f_values: np.ndarray,
    g_values: np.ndarray,
    grid: QuadratureGrid,
    density: np.ndarray | None = None,
) -> float:
    """L1(q) distance between two functions given by their grid values."""
    f = _values(f_values, grid)
    g = _values(g_values, grid)
    return l1_norm(f - g, grid, density=density)
