"""Force-directed layout of the sparse geodesic graph and k-means clustering."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

REPULSION = 0.01     # repulsion constant in units of (mean target length)^3


@dataclass(frozen=True, eq=False)
class Embedding:
    coords: np.ndarray
    seed: int
    iterations_run: int
    final_stress: float


def _edges(G):
    """(rows, cols, targets) of a distance graph or a plain triplet tuple."""
    if hasattr(G, "rows"):
        return G.n, np.asarray(G.rows), np.asarray(G.cols), np.asarray(G.values, dtype=np.float64)
    n, r, c, v = G
    return int(n), np.asarray(r), np.asarray(c), np.asarray(v, dtype=np.float64)


def stress(coords: np.ndarray, rows, cols, targets) -> float:
    """sum (|x_i - x_j| - t_ij)^2 / sum t_ij^2 over the stored edges."""
    s = np.linalg.norm(coords[rows] - coords[cols], axis=1)
    return float(np.sum((s - targets) ** 2) / np.sum(targets ** 2))


def _repulsion(x: np.ndarray, C: float, floor: float, chunk: int = 1024) -> np.ndarray:
    """sum_j C (x_i - x_j) / |x_i - x_j|^3, computed in row blocks."""
    n = x.shape[0]
    sq = np.einsum("ij,ij->i", x, x)
    out = np.empty_like(x)
    for a in range(0, n, chunk):
        b = min(a + chunk, n)
        d2 = sq[a:b, None] + sq[None, :] - 2.0 * (x[a:b] @ x.T)
        np.maximum(d2, floor * floor, out=d2)
        w = C / (d2 * np.sqrt(d2))
        w[np.arange(b - a), np.arange(a, b)] = 0.0
        out[a:b] = x[a:b] * w.sum(axis=1)[:, None] - w @ x
    return out


def force_layout(G, d: int = 3, iters: int = 500, seed: int = 0, init: np.ndarray | None = None) -> Embedding:
    """Spring layout whose stored edges pull toward their target lengths.

    Edge (i, j, t) exerts (s / t)(s - t) along the pair at separation s; every
    pair repels with C / s^2 where C = 0.01 * mean(t)^3. Each node moves by its
    net force times 1 / (1 + degree), capped by a temperature that cools
    linearly to zero. Isolated vertices feel only repulsion.
    """
    n, rows, cols, targets = _edges(G)
    if d not in (2, 3):
        raise ValidationError("embedding dimension must be 2 or 3")
    if iters < 1:
        raise ValidationError("iters must be >= 1")
    if targets.size == 0:
        raise ValidationError("distance graph has no edges")
    if np.any(targets <= 0):
        raise ValidationError("edge lengths must be positive")
    scale = float(targets.mean())
    if init is None:
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((n, d)) * scale * max(1.0, n ** (1.0 / d)) * 0.5
    else:
        x = np.array(init, dtype=np.float64)
        if x.shape != (n, d):
            raise ValidationError(f"init must have shape {(n, d)}")
    deg = np.bincount(rows, minlength=n) + np.bincount(cols, minlength=n)
    gain = 1.0 / (1.0 + deg)
    C = REPULSION * scale ** 3
    floor = 1e-6 * scale
    extent = float(np.max(np.ptp(x, axis=0))) if n > 1 else scale
    t0 = max(extent, scale) * 0.1
    for it in range(iters):
        temp = t0 * (1.0 - it / iters)
        diff = x[rows] - x[cols]
        s = np.maximum(np.linalg.norm(diff, axis=1), floor)
        # force on i from edge (i, j): -(s/t)(s - t) * unit(diff)
        mag = (s / targets) * (s - targets) / s
        pull = diff * mag[:, None]
        force = _repulsion(x, C, floor)
        np.subtract.at(force, rows, pull)
        np.add.at(force, cols, pull)
        disp = force * gain[:, None]
        norm = np.linalg.norm(disp, axis=1)
        capped = np.minimum(norm, temp) / np.maximum(norm, 1e-300)
        x = x + disp * capped[:, None]
    x = x - x.mean(axis=0)
    return Embedding(coords=x, seed=int(seed), iterations_run=iters, final_stress=stress(x, rows, cols, targets))


@dataclass(frozen=True, eq=False)
class Clustering:
    labels: np.ndarray
    centroids: np.ndarray
    inertia: float
    history: tuple = field(default_factory=tuple)
    n_iter: int = 0


def _sq_dists(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    return np.sum((x[:, None, :] - c[None, :, :]) ** 2, axis=2)


def kmeans_plus_plus(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Indices of k seeds chosen with probability proportional to squared distance."""
    n = x.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = np.sum((x - x[chosen[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=d2 / total))
        else:
            rest = np.setdiff1d(np.arange(n), chosen)
            nxt = int(rest[0])
        chosen.append(nxt)
        d2 = np.minimum(d2, np.sum((x - x[nxt]) ** 2, axis=1))
    return np.array(chosen)


def kmeans(coords, k: int, seed: int = 0, max_iter: int = 300) -> Clustering:
    """Lloyd iterations from k-means++ seeds.

    Ties in assignment go to the lowest centroid index. An empty cluster is
    reseeded at the point farthest from its current centroid. ``history``
    holds the inertia after every update step.
    """
    x = np.asarray(coords, dtype=np.float64)
    if x.ndim != 2:
        raise ValidationError("coords must be a 2-D array")
    n = x.shape[0]
    if not (1 <= k <= n):
        raise ValidationError(f"need 1 <= k <= N, got k={k}, N={n}")
    rng = np.random.default_rng(seed)
    centroids = x[kmeans_plus_plus(x, k, rng)].copy()
    labels = np.full(n, -1)
    history = []
    it = 0
    for it in range(1, max_iter + 1):
        new = np.argmin(_sq_dists(x, centroids), axis=1)
        for j in range(k):
            if not np.any(new == j):
                far = np.sum((x - centroids[new]) ** 2, axis=1)
                far[np.isin(new, np.flatnonzero(np.bincount(new, minlength=k) == 1))] = -1.0
                p = int(np.argmax(far))
                new[p] = j
        for j in range(k):
            centroids[j] = x[new == j].mean(axis=0)
        history.append(float(np.sum((x - centroids[new]) ** 2)))
        if np.array_equal(new, labels):
            break
        labels = new
    inertia = float(np.sum((x - centroids[labels]) ** 2))
    return Clustering(labels=labels, centroids=centroids, inertia=inertia, history=tuple(history), n_iter=it)
