"""Exact conjugate GP posterior and the L1(q) contraction functional.

With a centered GP prior with covariance c_a and Gaussian noise of unit
variance (the observation model used throughout), the posterior is Gaussian
with closed-form moments; keeping it exact removes sampler error from the
rate measurements.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .kernels import SEKernel, as_points, jittered_cholesky
from .quadrature import QuadratureGrid, default_grid, l1_distance
from .synth import Dataset

__all__ = [
    "PosteriorModel",
    "ContractionEstimate",
    "fit",
    "l1q_distance",
    "contraction_mass",
]


@dataclass(frozen=True)
class PosteriorModel:
    """Fitted conjugate state: kernel, data, and the factored (K + v I)."""

    kernel: SEKernel
    X: np.ndarray
    Y: np.ndarray
    noise_var: float
    chol: np.ndarray
    weights: np.ndarray  # (K + v I)^{-1} Y

    def mean(self, points: np.ndarray) -> np.ndarray:
        ks = self.kernel(as_points(points, self.kernel.d), self.X)
        return ks @ self.weights

    def moments(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean vector and covariance matrix on the points."""
        pts = as_points(points, self.kernel.d)
        ks = self.kernel(pts, self.X)
        mean = ks @ self.weights
        v = solve_triangular(self.chol, ks.T, lower=True)
        cov = self.kernel(pts, pts) - v.T @ v
        cov = (cov + cov.T) / 2.0
        return mean, cov

    def sample_paths(
        self,
        points: np.ndarray,
        n_paths: int,
        rng: np.random.Generator | int,
    ) -> np.ndarray:
        """(n_paths, m) posterior draws on the points; deterministic in rng."""
        if n_paths < 1:
            raise ValueError(f"need n_paths >= 1, got {n_paths}")
        rng = np.random.default_rng(rng)
        mean, cov = self.moments(points)
        factor, _ = jittered_cholesky(cov)
        z = rng.standard_normal((n_paths, mean.shape[0]))
        return mean[None, :] + z @ factor.T


def fit(kernel: SEKernel, data: Dataset, noise_var: float = 1.0) -> PosteriorModel:
    """Factor K + noise_var I once; noise_var < 1 is a test hook."""
    if not noise_var > 0:
        raise ValueError(f"noise variance must be positive, got {noise_var}")
    if data.d != kernel.d:
        raise ValueError(f"data dimension {data.d} != kernel dimension {kernel.d}")
    K = kernel(data.X, data.X)
    chol, _ = jittered_cholesky(K + noise_var * np.eye(data.n))
    weights = cho_solve((chol, True), data.Y)
    return PosteriorModel(
        kernel=kernel,
        X=data.X,
        Y=data.Y,
        noise_var=float(noise_var),
        chol=chol,
        weights=weights,
    )


def l1q_distance(
    f_values: np.ndarray,
    f0_values: np.ndarray,
    grid: QuadratureGrid,
    density: np.ndarray | None = None,
) -> float:
    """Integrated |f - f0| against the covariate density (uniform default)."""
    return l1_distance(f_values, f0_values, grid, density=density)


@dataclass(frozen=True)
class ContractionEstimate:
    """Posterior mass outside the M*eps ball, estimated from S draws."""

    m: float
    eps: float
    fraction: float
    n_draws: int

    @property
    def mc_se(self) -> float:
        return math.sqrt(self.fraction * (1.0 - self.fraction) / self.n_draws)


def contraction_mass(
    model: PosteriorModel,
    f0,
    m: float,
    eps: float,
    n_draws: int,
    rng: np.random.Generator | int,
    grid: QuadratureGrid | None = None,
    density: np.ndarray | None = None,
) -> ContractionEstimate:
    """Fraction of posterior draws with L1(q) distance to f0 above m * eps."""
    if n_draws < 1:
        raise ValueError(f"need n_draws >= 1, got {n_draws}")
    if grid is None:
        grid = default_grid(model.kernel.d)
    paths = model.sample_paths(grid.points, n_draws, rng)
    f0_vals = np.asarray(f0(grid.points), dtype=float).ravel()
    dists = np.array(
        [l1q_distance(p, f0_vals, grid, density=density) for p in paths]
    )
    fraction = float(np.mean(dists > m * eps))
    return ContractionEstimate(m=m, eps=eps, fraction=fraction, n_draws=n_draws)
