"""Rescaled squared-exponential kernels and their finite RKHS expansions.

The kernel family is c_a(x, y) = exp(-a^2 ||x - y||^2) on R^d, indexed by an
inverse bandwidth a > 0. Its spectral measure is the N(0, 2 a^2 I_d) law, so
tail masses reduce to chi-square survival probabilities. RKHS members are kept
as finite expansions over the kernel at fixed centers, which makes their
native norm exact (a Gram quadratic form) instead of another quadrature.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2

from .quadrature import QuadratureGrid, default_grid, l2_norm_sq

__all__ = [
    "SEKernel",
    "SpectralDensity",
    "RkhsElement",
    "GramFactor",
    "FactorizationError",
    "as_points",
    "gram",
    "jittered_cholesky",
    "random_expansion",
    "L2BoundCheck",
    "l2_bound_check",
]


class FactorizationError(RuntimeError):
    """Cholesky kept failing after jitter escalation."""


def as_points(x: np.ndarray, d: int) -> np.ndarray:
    """Coerce scalars / 1-d arrays to an (m, d) point array in R^d."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        # a flat array is a batch of scalar points when d=1, one point otherwise
        arr = arr[:, None] if d == 1 else arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != d:
        raise ValueError(f"expected points in R^{d}, got array of shape {np.shape(x)}")
    return arr


@dataclass(frozen=True)
class SEKernel:
    """c_a(x, y) = exp(-a^2 ||x - y||^2) on R^d."""

    a: float
    d: int = 1

    def __post_init__(self) -> None:
        if not self.a > 0:
            raise ValueError(f"inverse bandwidth must be positive, got a={self.a}")
        if self.d < 1:
            raise ValueError(f"dimension must be >= 1, got d={self.d}")

    def __call__(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Pairwise kernel matrix, shape (len(x), len(y))."""
        xp = as_points(x, self.d)
        yp = as_points(y, self.d)
        sq = (
            np.sum(xp * xp, axis=1)[:, None]
            + np.sum(yp * yp, axis=1)[None, :]
            - 2.0 * (xp @ yp.T)
        )
        np.maximum(sq, 0.0, out=sq)
        return np.exp(-(self.a**2) * sq)

    @property
    def spectral_density(self) -> "SpectralDensity":
        return SpectralDensity(self.a, self.d)


@dataclass(frozen=True)
class SpectralDensity:
    """Spectral density of SEKernel: the N(0, 2 a^2 I_d) density, mass one.

    Convention: hat f(lam) = (2 pi)^{-d} int e^{i <lam, t>} f(t) dt, under
    which c_a(x, y) = int e^{-i <lam, x - y>} omega_a(lam) dlam.
    """

    a: float
    d: int = 1

    def __post_init__(self) -> None:
        if not self.a > 0:
            raise ValueError(f"inverse bandwidth must be positive, got a={self.a}")
        if self.d < 1:
            raise ValueError(f"dimension must be >= 1, got d={self.d}")

    def __call__(self, lam: np.ndarray) -> np.ndarray:
        pts = as_points(lam, self.d)
        norm_sq = np.sum(pts * pts, axis=1)
        scale = (2.0 * self.a * math.sqrt(math.pi)) ** (-self.d)
        return scale * np.exp(-norm_sq / (4.0 * self.a**2))

    def tail_mass(self, radius: float) -> float:
        """Mass outside the centered ball of the given radius."""
        if radius < 0:
            raise ValueError("radius must be nonnegative")
        # ||N(0, 2 a^2 I)||^2 / (2 a^2) is chi-square with d degrees of freedom
        return float(chi2.sf(radius**2 / (2.0 * self.a**2), df=self.d))


def jittered_cholesky(
    mat: np.ndarray, jitter: float = 1e-10, decades: int = 3
) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of a symmetric PSD matrix, with jitter escalation.

    Tries the matrix as given, then adds ``jitter`` to the diagonal and
    escalates by factors of ten up to ``decades`` times before giving up with
    a FactorizationError carrying an eigenvalue-range estimate.
    """
    mat = np.asarray(mat, dtype=float)
    eps_used = 0.0
    try:
        return np.linalg.cholesky(mat), eps_used
    except np.linalg.LinAlgError:
        pass
    eye = np.eye(mat.shape[0])
    eps = jitter
    for _ in range(decades + 1):
        try:
            return np.linalg.cholesky(mat + eps * eye), eps
        except np.linalg.LinAlgError:
            eps *= 10.0
    try:
        eigs = np.linalg.eigvalsh((mat + mat.T) / 2.0)
        detail = f"eigenvalue range [{eigs.min():.3e}, {eigs.max():.3e}]"
    except np.linalg.LinAlgError:
        detail = "eigenvalue estimate unavailable"
    raise FactorizationError(
        f"cholesky failed with diagonal jitter up to {eps / 10.0:.1e}; {detail}"
    )


@dataclass(frozen=True)
class GramFactor:
    """Gram matrix on a point set together with its jittered Cholesky factor."""

    matrix: np.ndarray
    chol: np.ndarray
    jitter: float


def gram(kernel: SEKernel, points: np.ndarray, jitter: float = 1e-10) -> GramFactor:
    pts = as_points(points, kernel.d)
    mat = kernel(pts, pts)
    chol, used = jittered_cholesky(mat, jitter=jitter)
    return GramFactor(matrix=mat, chol=chol, jitter=used)


def _merge_duplicate_centers(
    centers: np.ndarray, weights: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    # duplicate centers make the Gram form singular; fold their weights together
    uniq, inverse = np.unique(centers, axis=0, return_inverse=True)
    if uniq.shape[0] == centers.shape[0]:
        return centers, weights
    merged = np.zeros(uniq.shape[0])
    np.add.at(merged, inverse, weights)
    return uniq, merged


@dataclass(frozen=True)
class RkhsElement:
    """Finite expansion h = sum_j w_j c_a(., t_j) with its exact native norm."""

    kernel: SEKernel
    centers: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        centers = as_points(self.centers, self.kernel.d)
        weights = np.asarray(self.weights, dtype=float).ravel()
        if centers.shape[0] != weights.shape[0]:
            raise ValueError(
                f"{centers.shape[0]} centers but {weights.shape[0]} weights"
            )
        if centers.shape[0] == 0:
            raise ValueError("expansion needs at least one center")
        centers, weights = _merge_duplicate_centers(centers, weights)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "weights", weights)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        pts = as_points(x, self.kernel.d)
        return self.kernel(pts, self.centers) @ self.weights

    def norm_sq(self) -> float:
        g = self.kernel(self.centers, self.centers)
        # clip the tiny negative round-off a near-singular Gram form can produce
        return max(float(self.weights @ g @ self.weights), 0.0)

    def norm(self) -> float:
        return math.sqrt(self.norm_sq())


def random_expansion(
    kernel: SEKernel,
    n_centers: int,
    rng: np.random.Generator | int,
    norm: float = 1.0,
) -> RkhsElement:
    """Random expansion with centers in [0,1]^d, rescaled to the given norm."""
    if n_centers < 1:
        raise ValueError("need at least one center")
    if not norm > 0:
        raise ValueError("target norm must be positive")
    rng = np.random.default_rng(rng)
    for _ in range(16):
        centers = rng.random((n_centers, kernel.d))
        weights = rng.standard_normal(n_centers)
        h = RkhsElement(kernel, centers, weights)
        current = h.norm()
        if current > 1e-9:
            return RkhsElement(kernel, h.centers, h.weights * (norm / current))
    raise FactorizationError("could not draw an expansion with nonzero norm")


@dataclass(frozen=True)
class L2BoundCheck:
    """Squared L2 mass on the cube against its RKHS-norm budget."""

    lhs: float
    rhs: float
    norm_sq: float
    ok: bool


def l2_bound_check(
    h: RkhsElement,
    grid: QuadratureGrid | None = None,
    norm_budget: float | None = None,
) -> L2BoundCheck:
    """Check ||h||_2^2 on [0,1]^d against pi^{d/2} a^{-d} ||h||_H^2.

    The constant comes from bounding |hat h|^2 / omega_a by ||h||_H^2 omega_a
    and integrating; ``norm_budget``, when given, is asserted against the
    exact native norm first so the budgeted form of the bound is meaningful.
    """
    kernel = h.kernel
    if grid is None:
        grid = default_grid(kernel.d)
    if grid.dim != kernel.d:
        raise ValueError(f"grid dimension {grid.dim} != kernel dimension {kernel.d}")
    norm_sq = h.norm_sq()
    if norm_budget is not None:
        if norm_sq > norm_budget**2 * (1.0 + 1e-9):
            raise ValueError(
                f"norm {math.sqrt(norm_sq):.6g} exceeds budget {norm_budget:.6g}"
            )
        norm_sq_for_bound = norm_budget**2
    else:
        norm_sq_for_bound = norm_sq
    lhs = l2_norm_sq(h(grid.points), grid)
    rhs = math.pi ** (kernel.d / 2.0) * norm_sq_for_bound / kernel.a**kernel.d
    return L2BoundCheck(lhs=lhs, rhs=rhs, norm_sq=norm_sq, ok=lhs <= rhs * (1 + 1e-12))
