"""Uniform samplers for the unit sphere and the torus of revolution."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dataset import Dataset
from ..errors import ValidationError


@dataclass(frozen=True)
class TorusSpec:
    """Torus with tube radius ``r`` around a circle of radius ``R``."""

    r: float = 0.8
    R: float = 2.0

    def __post_init__(self):
        if not (0 < self.r < self.R):
            raise ValidationError(f"need 0 < r < R, got r={self.r}, R={self.R}")

    def embed(self, theta, phi) -> np.ndarray:
        theta, phi = np.broadcast_arrays(np.asarray(theta, float), np.asarray(phi, float))
        rho = self.R + self.r * np.cos(theta)
        return np.stack([rho * np.cos(phi), rho * np.sin(phi), self.r * np.sin(theta)], axis=-1)

    def angles(self, points) -> tuple[np.ndarray, np.ndarray]:
        """(theta, phi) of surface points, theta measured from the outer equator."""
        p = np.asarray(points, dtype=np.float64)
        rho = np.hypot(p[..., 0], p[..., 1])
        theta = np.arctan2(p[..., 2], rho - self.R)
        phi = np.arctan2(p[..., 1], p[..., 0])
        return theta, phi

    def residual(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=np.float64)
        return (np.hypot(p[..., 0], p[..., 1]) - self.R) ** 2 + p[..., 2] ** 2 - self.r ** 2

    def check_on_surface(self, points, tol: float = 1e-8) -> None:
        bad = np.abs(self.residual(points)) > tol * max(1.0, self.r ** 2)
        if np.any(bad):
            raise ValidationError("point is not on the torus surface")


def sample_sphere(n: int, seed: int = 0) -> Dataset:
    """Normalized standard Gaussians in R^3."""
    if n < 2:
        raise ValidationError("need at least 2 samples")
    g = np.random.default_rng(seed).standard_normal((n, 3))
    return Dataset(g / np.linalg.norm(g, axis=1, keepdims=True))


def sample_torus_angles(n: int, spec: TorusSpec, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Area-uniform angles: theta by rejection with acceptance (R + r cos) / (R + r)."""
    thetas = np.empty(0)
    while thetas.size < n:
        want = int(1.5 * (n - thetas.size)) + 16
        cand = rng.uniform(0.0, 2 * np.pi, want)
        u = rng.uniform(0.0, 1.0, want)
        ok = cand[u < (spec.R + spec.r * np.cos(cand)) / (spec.R + spec.r)]
        thetas = np.concatenate([thetas, ok])
    theta = thetas[:n]
    phi = rng.uniform(0.0, 2 * np.pi, n)
    return theta, phi


def sample_torus(n: int, spec: TorusSpec | None = None, seed: int = 0) -> Dataset:
    if n < 2:
        raise ValidationError("need at least 2 samples")
    spec = spec or TorusSpec()
    theta, phi = sample_torus_angles(n, spec, np.random.default_rng(seed))
    return Dataset(spec.embed(theta, phi))
