"""Turning propagated states into sample-index estimates of the packet position."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import NeighborhoodError, ValidationError
from .states import FrameCache, LPCAFrame, _points, lpca

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SampleDistribution:
    q: np.ndarray
    argmax_index: int


def to_distribution(state: np.ndarray) -> SampleDistribution:
    """q = |psi|^2 / sum |psi|^2; argmax ties go to the lowest index."""
    psi = np.asarray(state)
    if psi.ndim != 1:
        raise ValidationError("state must be a vector")
    q = psi.real ** 2 + psi.imag ** 2 if np.iscomplexobj(psi) else psi.astype(np.float64) ** 2
    total = q.sum()
    if not (np.isfinite(total) and total > 0):
        raise ValidationError("state is zero or non-finite")
    q = q / total
    return SampleDistribution(q=q, argmax_index=int(np.argmax(q)))


def nearest_sample(points: np.ndarray, target: np.ndarray) -> int:
    d2 = np.sum((points - target) ** 2, axis=1)
    return int(np.argmin(d2))


def mean_position_extrinsic(data, dist: SampleDistribution) -> int:
    """Sample nearest to the q-weighted ambient mean."""
    pts = _points(data)
    return nearest_sample(pts, dist.q @ pts)


def mean_position_lpca(data, dist: SampleDistribution, delta_pca: float,
                       cache: FrameCache | None = None, dim: int | None = None) -> int:
    """Mean taken in the LPCA frame around the most likely sample.

    q is restricted to the frame's ball and renormalized there. A degenerate
    frame falls back to the ambient mean.
    """
    star = dist.argmax_index
    try:
        frame = cache.get(star, delta_pca, dim) if cache is not None else lpca(data, star, delta_pca, dim)
    except NeighborhoodError as exc:
        log.warning("LPCA frame at sample %d unusable (%s); using ambient mean", star, exc)
        return mean_position_extrinsic(data, dist)
    w = dist.q[frame.neighborhood]
    w = w / w.sum()
    mean = w @ frame.coords
    k = int(np.argmin(np.sum((frame.coords - mean) ** 2, axis=1)))
    return int(frame.neighborhood[k])


def max_position(dist: SampleDistribution) -> int:
    return dist.argmax_index


def euclidean_propagation_baseline(data, frame: LPCAFrame, momentum, t: float) -> int:
    """Sample in ``frame`` whose coordinates are nearest the straight-line point p t."""
    if t < 0:
        raise ValidationError("t must be non-negative")
    p = np.asarray(momentum, dtype=np.float64)
    if p.shape != (frame.dim,):
        raise ValidationError(f"momentum must have length {frame.dim}")
    k = int(np.argmin(np.sum((frame.coords - t * p) ** 2, axis=1)))
    return int(frame.neighborhood[k])


def estimate(data, dist: SampleDistribution, estimator: str, delta_pca: float = 1.5,
             cache: FrameCache | None = None, dim: int | None = None) -> int:
    if estimator == "mean":
        return mean_position_extrinsic(data, dist)
    if estimator == "mean-lpca":
        return mean_position_lpca(data, dist, delta_pca, cache, dim)
    if estimator == "max":
        return max_position(dist)
    raise ValidationError(f"unknown estimator {estimator!r}")
