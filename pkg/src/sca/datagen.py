"""Seeded synthetic data: i.i.d. Gaussian, stationary AR(1), Gaussian clusters.

All ``sigma`` parameters are standard deviations.  Matrices are N x M with
one point per column.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GAUSSIAN = "gaussian"
AR1 = "ar1"
CLUSTERS = "clusters"


@dataclass(frozen=True)
class SyntheticSpec:
    kind: str = GAUSSIAN
    n_dims: int = 64
    n_points: int = 1000
    sigma: float = 1.0
    rho: float = 0.5
    n_clusters: int = 4
    center_spread: float = 3.0
    within_sigma: float = 0.5
    rng_seed: int = 0

    def __post_init__(self):
        if self.kind not in (GAUSSIAN, AR1, CLUSTERS):
            raise ValueError(f"unknown data kind {self.kind!r}")
        if self.n_dims < 1 or self.n_points < 1:
            raise ValueError("n_dims and n_points must be positive")
        if self.kind != CLUSTERS and not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not -1 < self.rho < 1:
            raise ValueError("AR(1) coefficient must satisfy |rho| < 1")
        if self.kind == CLUSTERS:
            if self.n_clusters < 2:
                raise ValueError("need at least two clusters")
            if self.within_sigma < 0 or self.center_spread <= 0:
                raise ValueError("cluster spreads must be nonnegative")


def gen_gaussian(spec: SyntheticSpec) -> np.ndarray:
    rng = np.random.default_rng(spec.rng_seed)
    return spec.sigma * rng.standard_normal((spec.n_dims, spec.n_points))


def gen_ar1(spec: SyntheticSpec) -> np.ndarray:
    """Columns are independent stationary AR(1) sequences along the N axis."""
    rng = np.random.default_rng(spec.rng_seed)
    innov = spec.sigma * rng.standard_normal((spec.n_dims, spec.n_points))
    x = np.empty_like(innov)
    x[0] = innov[0] / np.sqrt(1.0 - spec.rho**2)
    for i in range(1, spec.n_dims):
        x[i] = spec.rho * x[i - 1] + innov[i]
    return x


def gen_clusters(spec: SyntheticSpec) -> tuple[np.ndarray, np.ndarray]:
    """Points from ``n_clusters`` isotropic blobs with round-robin labels.

    Centers are redrawn (up to 1000 times) until every pair is at least
    ``center_spread`` apart, which matters in very low dimension.
    """
    rng = np.random.default_rng(spec.rng_seed)
    for _ in range(1000):
        centers = spec.center_spread * rng.standard_normal((spec.n_dims, spec.n_clusters))
        gaps = np.linalg.norm(centers[:, :, None] - centers[:, None, :], axis=0)
        if gaps[np.triu_indices(spec.n_clusters, 1)].min() >= spec.center_spread:
            break
    labels = np.arange(spec.n_points) % spec.n_clusters
    noise = spec.within_sigma * rng.standard_normal((spec.n_dims, spec.n_points))
    return centers[:, labels] + noise, labels


def generate(spec: SyntheticSpec):
    """Dispatch on ``spec.kind``; returns ``(X, labels)`` with labels None unless clustered."""
    if spec.kind == GAUSSIAN:
        return gen_gaussian(spec), None
    if spec.kind == AR1:
        return gen_ar1(spec), None
    return gen_clusters(spec)


def gen_authorized_query(x, sigma_z: float, rng) -> np.ndarray:
    """Noisy copy ``x + z`` of a database point."""
    if sigma_z < 0:
        raise ValueError("sigma_z must be nonnegative")
    x = np.asarray(x, dtype=np.float64)
    if sigma_z == 0:
        return x.copy()
    return x + sigma_z * rng.standard_normal(x.shape)


def gen_unauthorized_query(n_dims: int, sigma: float, rng) -> np.ndarray:
    """Fresh Gaussian probe unrelated to the database."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    return sigma * rng.standard_normal(n_dims)
