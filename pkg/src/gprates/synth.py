"""Ground truths with a smoothness dial, covariate densities, and datasets.

Cosine-series truths have per-axis coefficients k^{-(alpha+1/2)} zeta_k with
Rademacher signs zeta, so the declared alpha acts as a Sobolev-type smoothness
dial with exact pointwise evaluation. Everything here is a pure function of
its seed.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .kernels import as_points

__all__ = [
    "TRUTH_KINDS",
    "TrueFunction",
    "CovariateDensity",
    "Dataset",
    "make_truth",
    "sample_design",
    "gen_dataset",
]

TRUTH_KINDS = ("cosine-series", "analytic")


@dataclass(frozen=True)
class TrueFunction:
    """Deterministic truth on [0,1]^d with declared smoothness metadata."""

    kind: str
    d: int
    alpha: float
    coefficients: np.ndarray | None  # (d, K) cosine coefficients, or None
    seed: int | None

    def __call__(self, x: np.ndarray) -> np.ndarray:
        pts = as_points(x, self.d)
        if self.kind == "analytic":
            if self.d == 1:
                return np.sin(2.0 * math.pi * pts[:, 0])
            return np.sin(2.0 * math.pi * pts[:, 0]) + 0.5 * np.cos(
                math.pi * np.prod(pts[:, 1:], axis=1)
            )
        k = np.arange(1, self.coefficients.shape[1] + 1)
        out = np.zeros(pts.shape[0])
        for j in range(self.d):
            out += math.sqrt(2.0) * np.cos(
                math.pi * np.outer(pts[:, j], k)
            ) @ self.coefficients[j]
        return out

    def sup_bound(self) -> float:
        """Cheap upper bound on the sup norm over the cube."""
        if self.kind == "analytic":
            return 1.5
        return math.sqrt(2.0) * float(np.sum(np.abs(self.coefficients)))


def make_truth(
    kind: str,
    alpha: float,
    n_terms: int = 64,
    seed: int | np.random.Generator = 0,
    d: int = 1,
    signs: np.ndarray | None = None,
) -> TrueFunction:
    """Construct a truth; ``signs`` overrides the seeded Rademacher draws.

    Cosine-series: f0(x) = sum over axes j of
    sum_k k^{-(alpha+1/2)} zeta_{j,k} sqrt(2) cos(k pi x_j).
    """
    if kind not in TRUTH_KINDS:
        raise ValueError(f"unknown truth kind {kind!r}, expected one of {TRUTH_KINDS}")
    if not alpha > 0:
        raise ValueError(f"smoothness must be positive, got alpha={alpha}")
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got d={d}")
    if kind == "analytic":
        return TrueFunction(kind=kind, d=d, alpha=alpha, coefficients=None, seed=None)
    if n_terms < 1:
        raise ValueError(f"need at least one series term, got {n_terms}")
    rng = np.random.default_rng(seed)
    if signs is None:
        zeta = rng.choice([-1.0, 1.0], size=(d, n_terms))
    else:
        zeta = np.broadcast_to(np.asarray(signs, dtype=float), (d, n_terms)).copy()
        if not np.all(np.abs(zeta) == 1.0):
            raise ValueError("signs must be +/-1")
    k = np.arange(1, n_terms + 1, dtype=float)
    coef = zeta * k ** (-(alpha + 0.5))
    seed_field = seed if isinstance(seed, (int, np.integer)) else None
    return TrueFunction(
        kind=kind, d=d, alpha=alpha, coefficients=coef, seed=seed_field
    )


@dataclass(frozen=True)
class CovariateDensity:
    """Product density on [0,1]^d, piecewise constant along each axis."""

    edges: np.ndarray
    masses: np.ndarray
    d: int = 1

    def __post_init__(self) -> None:
        edges = np.asarray(self.edges, dtype=float).ravel()
        masses = np.asarray(self.masses, dtype=float).ravel()
        if edges.ndim != 1 or edges.size != masses.size + 1:
            raise ValueError("need k+1 edges for k masses")
        if edges[0] != 0.0 or edges[-1] != 1.0 or np.any(np.diff(edges) <= 0):
            raise ValueError("edges must increase from 0 to 1")
        if np.any(masses <= 0):
            raise ValueError("bin masses must be positive (density bounded below)")
        masses = masses / masses.sum()
        if self.d < 1:
            raise ValueError(f"dimension must be >= 1, got d={self.d}")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "masses", masses)

    @classmethod
    def uniform(cls, d: int = 1) -> "CovariateDensity":
        return cls(edges=np.array([0.0, 1.0]), masses=np.array([1.0]), d=d)

    @property
    def is_uniform(self) -> bool:
        return self.masses.size == 1

    def pdf(self, x: np.ndarray) -> np.ndarray:
        pts = as_points(x, self.d)
        heights = self.masses / np.diff(self.edges)
        # right-closed last bin so pdf(1.0) is defined
        idx = np.clip(
            np.searchsorted(self.edges, pts, side="right") - 1, 0, self.masses.size - 1
        )
        return np.prod(heights[idx], axis=1)

    def sample(self, n: int, rng: np.random.Generator | int) -> np.ndarray:
        if n < 1:
            raise ValueError(f"need n >= 1, got {n}")
        rng = np.random.default_rng(rng)
        u = rng.random((n, self.d))
        cum = np.concatenate([[0.0], np.cumsum(self.masses)])
        cum[-1] = 1.0
        idx = np.clip(
            np.searchsorted(cum, u, side="right") - 1, 0, self.masses.size - 1
        )
        left = self.edges[idx]
        width = np.diff(self.edges)[idx]
        return left + (u - cum[idx]) / self.masses[idx] * width


def sample_design(
    q: CovariateDensity, n: int, seed: int | np.random.Generator
) -> np.ndarray:
    """n i.i.d. draws from q, shape (n, d)."""
    return q.sample(n, seed)


@dataclass(frozen=True)
class Dataset:
    """Design X (n, d), responses Y (n,), and how they were generated."""

    X: np.ndarray
    Y: np.ndarray
    noise_sd: float
    seed: int | None

    def __post_init__(self) -> None:
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        Y = np.asarray(self.Y, dtype=float).ravel()
        if X.shape[0] != Y.shape[0]:
            raise ValueError(f"{X.shape[0]} design rows but {Y.shape[0]} responses")
        if X.shape[0] == 0:
            raise ValueError("dataset cannot be empty")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def n(self) -> int:
        return self.Y.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def to_csv(self, path: str | Path, header_lines: list[str] | None = None) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            for line in header_lines or []:
                fh.write(f"# {line}\n")
            writer = csv.writer(fh)
            writer.writerow([f"x_{j + 1}" for j in range(self.d)] + ["y"])
            for row, y in zip(self.X, self.Y):
                writer.writerow([repr(float(v)) for v in row] + [repr(float(y))])


def gen_dataset(
    f0,
    X: np.ndarray,
    noise_sd: float = 1.0,
    seed: int | np.random.Generator = 0,
) -> Dataset:
    """Y_i = f0(X_i) + noise_sd * z_i with standard normal z, seeded."""
    if noise_sd < 0:
        raise ValueError(f"noise sd must be >= 0, got {noise_sd}")
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(X.shape[0])
    seed_field = seed if isinstance(seed, (int, np.integer)) else None
    return Dataset(X=X, Y=np.asarray(f0(X)).ravel() + noise_sd * z, noise_sd=noise_sd, seed=seed_field)
