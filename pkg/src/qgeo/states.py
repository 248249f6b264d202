"""Local PCA frames and coherent-state preparation."""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .errors import NeighborhoodError, StatePreparationError, ValidationError

SINGULAR_FLOOR = 1e-12


def _points(data) -> np.ndarray:
    return data.points if isinstance(data, Dataset) else np.asarray(data, dtype=np.float64)


@dataclass(frozen=True, eq=False)
class LPCAFrame:
    """Tangent frame estimated from the ball ``|v - v_center|^2 <= delta``.

    ``coords[k]`` is the frame coordinate of sample ``neighborhood[k]``.
    """

    center_index: int
    neighborhood: np.ndarray
    basis: np.ndarray
    coords: np.ndarray
    singvals: np.ndarray
    delta: float

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def coords_of(self, data, indices) -> np.ndarray:
        """Frame coordinates of arbitrary samples, relative to the center."""
        pts = _points(data)
        return (pts[np.asarray(indices)] - pts[self.center_index]) @ self.basis.T

    def local_index(self, index: int) -> int:
        k = int(np.searchsorted(self.neighborhood, index))
        if k >= self.neighborhood.size or self.neighborhood[k] != index:
            raise KeyError(index)
        return k


def ball(data, center: int, delta: float) -> np.ndarray:
    """Sorted indices with squared distance to the center at most ``delta``."""
    pts = _points(data)
    d2 = np.sum((pts - pts[center]) ** 2, axis=1)
    return np.flatnonzero(d2 <= delta)


def gap_dimension(singvals: np.ndarray) -> int:
    """Index of the largest ratio sigma_j / sigma_{j+1}; exact zeros end the rank."""
    s = np.asarray(singvals, dtype=np.float64)
    if s.size <= 1:
        return 1
    floor = SINGULAR_FLOOR * max(s[0], 1.0)
    rank = int(np.count_nonzero(s > floor))
    if rank < s.size:
        # numerically rank-deficient: the gap to zero dominates every ratio
        return max(rank, 1)
    ratios = s[:-1] / s[1:]
    return int(np.argmax(ratios)) + 1


def lpca(data, center: int, delta_pca: float, dim: int | None = None) -> LPCAFrame:
    """Local PCA around sample ``center``.

    The basis spans the top singular directions of the mean-centered
    neighborhood; coordinates are measured from the center sample itself.
    """
    if not delta_pca > 0:
        raise ValidationError("delta_pca must be positive")
    pts = _points(data)
    idx = ball(pts, center, delta_pca)
    if idx.size < 2:
        raise NeighborhoodError(f"neighborhood of sample {center} has {idx.size} point(s)")
    local = pts[idx]
    centered = local - local.mean(axis=0)
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    if s[0] < SINGULAR_FLOOR:
        raise NeighborhoodError(f"degenerate neighborhood at sample {center}: all singular values vanish")
    k = gap_dimension(s) if dim is None else int(dim)
    if k < 1 or k > vt.shape[0]:
        raise NeighborhoodError(f"requested dimension {k} exceeds available {vt.shape[0]}")
    if idx.size < k + 1:
        raise NeighborhoodError(f"neighborhood of sample {center} has {idx.size} points, need {k + 1}")
    basis = np.ascontiguousarray(vt[:k])
    coords = (local - pts[center]) @ basis.T
    return LPCAFrame(center_index=int(center), neighborhood=idx, basis=basis, coords=coords,
                     singvals=s, delta=float(delta_pca))


def two_scale_frames(data, center: int, delta_pca: float, gamma: float,
                     dim: int | None = None) -> tuple[LPCAFrame, LPCAFrame]:
    """(basis frame from the gamma * delta ball, support frame from the delta ball).

    The support frame reuses the small-ball basis so both describe the same
    tangent plane.
    """
    small = lpca(data, center, gamma * delta_pca, dim)
    pts = _points(data)
    idx = ball(pts, center, delta_pca)
    coords = (pts[idx] - pts[center]) @ small.basis.T
    support = LPCAFrame(center_index=int(center), neighborhood=idx, basis=small.basis,
                        coords=coords, singvals=small.singvals, delta=float(delta_pca))
    return small, support


class FrameCache:
    """Thread-safe memo of LPCA frames keyed by (center, delta, dim)."""

    def __init__(self, data):
        self._data = data
        self._frames: dict = {}
        self._lock = threading.Lock()

    def get(self, center: int, delta: float, dim: int | None = None) -> LPCAFrame:
        key = (int(center), float(delta), dim)
        with self._lock:
            hit = self._frames.get(key)
        if hit is not None:
            return hit
        frame = lpca(self._data, center, delta, dim)
        with self._lock:
            return self._frames.setdefault(key, frame)

    def __len__(self):
        return len(self._frames)


@dataclass(frozen=True, eq=False)
class CoherentState:
    amplitudes: np.ndarray
    base_index: int
    momentum: np.ndarray
    h: float
    kind: str


def wavepacket(offsets: np.ndarray, momenta: np.ndarray, h: float) -> np.ndarray:
    """exp(i x.p / h) exp(-|x|^2 / (2h)) for offsets (K, d) and momenta (d,) or (m, d).

    Columns are normalized to unit 2-norm. Returns (K,) or (K, m).
    """
    x = np.asarray(offsets, dtype=np.float64)
    p = np.asarray(momenta, dtype=np.float64)
    single = p.ndim == 1
    p = np.atleast_2d(p)
    env = np.exp(np.einsum("ij,ij->i", x, x) / (-2.0 * h))
    amp = env[:, None] * np.exp((1j / h) * (x @ p.T))
    amp /= np.linalg.norm(env)
    return amp[:, 0] if single else amp


def neighbor_order(data, base: int) -> np.ndarray:
    """Samples at nonzero distance from ``base``, nearest first, ties to lowest index."""
    pts = _points(data)
    d2 = np.sum((pts - pts[base]) ** 2, axis=1)
    order = np.argsort(d2, kind="stable")
    return order[d2[order] > 0]


def neighbor_momentum(data, base: int, rank: int, order: np.ndarray | None = None) -> np.ndarray:
    """Unit vector from ``base`` toward its ``rank``-th nearest distinct neighbor."""
    if rank < 1:
        raise ValidationError("neighbor rank starts at 1")
    pts = _points(data)
    order = neighbor_order(pts, base) if order is None else order
    if rank > order.size:
        raise StatePreparationError(f"sample {base} has only {order.size} distinct neighbors")
    v = pts[order[rank - 1]] - pts[base]
    return v / np.linalg.norm(v)


def make_state_extrinsic(data, base: int, neighbor_rank: int, h: float) -> CoherentState:
    """Gaussian wavepacket in ambient coordinates aimed at the given neighbor."""
    if not h > 0:
        raise ValidationError("h must be positive")
    pts = _points(data)
    p0 = neighbor_momentum(pts, base, neighbor_rank)
    amp = wavepacket(pts - pts[base], p0, h)
    return CoherentState(amplitudes=amp, base_index=int(base), momentum=p0, h=float(h),
                         kind="extrinsic")


def lpca_amplitudes(n: int, support_frame: LPCAFrame, coord_basis: np.ndarray, data,
                    momenta: np.ndarray, h: float) -> np.ndarray:
    """Dense (N,) or (N, m) amplitudes of LPCA wavepackets on the support ball."""
    pts = _points(data)
    idx = support_frame.neighborhood
    if idx.size < 3:
        raise StatePreparationError(f"state support has {idx.size} points, need at least 3")
    theta = (pts[idx] - pts[support_frame.center_index]) @ coord_basis.T
    local = wavepacket(theta, momenta, h)
    out = np.zeros((n,) + local.shape[1:], dtype=np.complex128)
    out[idx] = local
    return out


def make_state_lpca(data, frame: LPCAFrame, support_frame: LPCAFrame, momentum, h: float) -> CoherentState:
    """Wavepacket in the coordinates of ``frame``, supported on ``support_frame``'s ball."""
    if frame.center_index != support_frame.center_index:
        raise ValidationError("frames must share the same center")
    p0 = np.asarray(momentum, dtype=np.float64)
    if p0.shape != (frame.dim,):
        raise ValidationError(f"momentum must have length {frame.dim}")
    if abs(np.linalg.norm(p0) - 1.0) > 1e-12:
        raise ValidationError("momentum must be a unit vector")
    if not h > 0:
        raise ValidationError("h must be positive")
    pts = _points(data)
    amp = lpca_amplitudes(pts.shape[0], support_frame, frame.basis, pts, p0, h)
    return CoherentState(amplitudes=amp, base_index=frame.center_index, momentum=p0, h=float(h),
                         kind="lpca")


def random_unit_vectors(rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    v = rng.standard_normal((count, dim))
    return v / np.linalg.norm(v, axis=1, keepdims=True)
