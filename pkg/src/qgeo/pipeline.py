"""Geodesic sprays, the sparse geodesic distance matrix and the (epsilon, alpha) scan."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse

from .dataset import Dataset, PipelineConfig, semiclassical_h
from .errors import NeighborhoodError, PipelineError, StatePreparationError, ValidationError
from .laplacian import build_kernel, build_laplacian, spectral_laplacian, SpectralLaplacian
from .measurement import SampleDistribution, estimate
from .propagator import Propagator, from_modes, make_propagator
from .states import (FrameCache, lpca_amplitudes, neighbor_order, random_unit_vectors,
                     two_scale_frames, wavepacket)

log = logging.getLogger(__name__)

FAILURE_BUDGET = 0.10


@dataclass(eq=False)
class PipelineContext:
    """Everything shared by the sprays of one run; read-only once built."""

    data: Dataset
    cfg: PipelineConfig
    spec: SpectralLaplacian
    prop: Propagator
    cache: FrameCache


def prepare(data: Dataset, cfg: PipelineConfig, spec: SpectralLaplacian | None = None) -> PipelineContext:
    if spec is None:
        spec = spectral_laplacian(data, cfg.epsilon, cfg.lam, cutoff=cfg.spectral_cutoff)
    prop = make_propagator(spec, cfg.epsilon, cfg.alpha, cfg.dt)
    return PipelineContext(data=data, cfg=cfg, spec=spec, prop=prop, cache=FrameCache(data))


@dataclass(eq=False)
class SprayStates:
    """A batch of coherent states launched from one base sample."""

    base: int
    amplitudes: np.ndarray       # (N, m) complex
    momenta: np.ndarray          # (m, d), ambient or frame coordinates
    support: np.ndarray | None   # row indices where amplitudes may be nonzero
    frame: object = None         # support frame for LPCA states


def spray_states(data: Dataset, cfg: PipelineConfig, base: int, count: int | None = None) -> SprayStates:
    """Initial states for one base sample following ``cfg``.

    Neighbor momenta point toward the m-th nearest distinct neighbor for
    m = 1..count (projected into the tangent frame for LPCA states); random
    momenta are uniform unit vectors in the frame, seeded by (seed, base).
    """
    count = cfg.n_coll if count is None else count
    pts = data.points
    h = cfg.h
    if not cfg.use_pca:
        if cfg.momentum != "neighbor":
            raise ValidationError("random momenta need tangent frames; enable use_pca")
        order = neighbor_order(pts, base)
        if order.size == 0:
            raise StatePreparationError(f"sample {base} has no distinct neighbors")
        if order.size < count:
            log.warning("sample %d: only %d of %d neighbor momenta available", base, order.size, count)
        nb = order[:count]
        dirs = pts[nb] - pts[base]
        momenta = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
        amp = wavepacket(pts - pts[base], momenta, h)
        return SprayStates(base=base, amplitudes=amp, momenta=momenta, support=None)

    small, support = two_scale_frames(pts, base, cfg.delta_pca, cfg.gamma, cfg.lpca_dim)
    if cfg.momentum == "random":
        rng = np.random.default_rng([cfg.seed, base])
        momenta = random_unit_vectors(rng, count, small.dim)
    else:
        order = neighbor_order(pts, base)
        proj = (pts[order[:count]] - pts[base]) @ small.basis.T
        norms = np.linalg.norm(proj, axis=1)
        keep = norms > 1e-12
        if not np.all(keep):
            log.warning("sample %d: %d neighbor directions normal to the frame skipped",
                        base, int(np.count_nonzero(~keep)))
        momenta = proj[keep] / norms[keep, None]
        if momenta.shape[0] < count:
            log.warning("sample %d: only %d of %d neighbor momenta available", base, momenta.shape[0], count)
        if momenta.shape[0] == 0:
            raise StatePreparationError(f"sample {base}: no usable momentum directions")
    amp = lpca_amplitudes(pts.shape[0], support, small.basis, pts, momenta, h)
    return SprayStates(base=base, amplitudes=amp, momenta=momenta, support=support.neighborhood,
                       frame=support)


def propagate_batch(prop: Propagator, states: SprayStates, n_steps: int):
    """Yield (step, (N, m) states) for step = 1..n_steps."""
    E = prop.spec.eigvecs
    dsq = prop.spec.dvec_sqrt
    amp = states.amplitudes
    if states.support is not None:
        rows = states.support
        scaled = np.ascontiguousarray(dsq[rows, None] * amp[rows])
        Et = E[rows].T
    else:
        scaled = np.ascontiguousarray(dsq[:, None] * amp)
        Et = E.T
    m = scaled.shape[1]
    c0 = np.ascontiguousarray(Et @ scaled.view(np.float64).reshape(-1, 2 * m)).view(np.complex128)
    for step in range(1, n_steps + 1):
        yield step, from_modes(prop, c0 * prop.phases(step)[:, None])


def distributions(batch: np.ndarray) -> list[SampleDistribution]:
    q = batch.real ** 2 + batch.imag ** 2
    q /= q.sum(axis=0, keepdims=True)
    arg = np.argmax(q, axis=0)
    return [SampleDistribution(q=q[:, j], argmax_index=int(arg[j])) for j in range(q.shape[1])]


def track_endpoints(ctx: PipelineContext, states: SprayStates, n_steps: int,
                    estimator: str | None = None) -> np.ndarray:
    """Estimated sample index of every state after each step, shape (n_steps, m)."""
    est = estimator or ctx.cfg.resolved_estimator
    out = np.empty((n_steps, states.amplitudes.shape[1]), dtype=np.int64)
    for step, batch in propagate_batch(ctx.prop, states, n_steps):
        for j, dist in enumerate(distributions(batch)):
            out[step - 1, j] = estimate(ctx.data, dist, est, ctx.cfg.delta_pca, ctx.cache,
                                        ctx.cfg.lpca_dim)
    return out


def geodesic_spray(ctx: PipelineContext, base: int) -> list[tuple[int, float]]:
    """(endpoint index, n * dt) for every momentum and step n = 1..n_prop."""
    states = spray_states(ctx.data, ctx.cfg, base)
    ends = track_endpoints(ctx, states, ctx.cfg.n_prop)
    dt = ctx.cfg.dt
    return [(int(ends[n, j]), (n + 1) * dt) for j in range(ends.shape[1]) for n in range(ends.shape[0])]


@dataclass(eq=False)
class GeodesicDistanceMatrix:
    """Sparse symmetric distances; only pairs i < j are stored."""

    n: int
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    meta: PipelineConfig | None = None
    failed_bases: tuple[int, ...] = field(default_factory=tuple)

    @classmethod
    def from_triplets(cls, n, rows, cols, values, meta=None) -> "GeodesicDistanceMatrix":
        best: dict[tuple[int, int], float] = {}
        for i, j, d in zip(rows, cols, values):
            i, j = int(i), int(j)
            if i == j:
                continue
            if not (0 <= i < n and 0 <= j < n):
                raise ValidationError(f"index pair ({i}, {j}) out of range for n={n}")
            key = (i, j) if i < j else (j, i)
            if key not in best or d < best[key]:
                best[key] = float(d)
        return cls._from_dict(n, best, meta)

    @classmethod
    def _from_dict(cls, n, best, meta=None, failed=()):
        keys = sorted(best)
        r = np.array([k[0] for k in keys], dtype=np.int64)
        c = np.array([k[1] for k in keys], dtype=np.int64)
        v = np.array([best[k] for k in keys], dtype=np.float64)
        return cls(n=n, rows=r, cols=c, values=v, meta=meta, failed_bases=tuple(failed))

    @property
    def n_edges(self) -> int:
        return int(self.values.size)

    def get(self, i: int, j: int) -> float | None:
        """Stored distance, 0.0 on the diagonal, None when absent."""
        if i == j:
            return 0.0
        a, b = (i, j) if i < j else (j, i)
        lo = np.searchsorted(self.rows, a, side="left")
        hi = np.searchsorted(self.rows, a, side="right")
        k = lo + np.searchsorted(self.cols[lo:hi], b)
        if k < hi and self.cols[k] == b:
            return float(self.values[k])
        return None

    def to_sparse(self) -> scipy.sparse.csr_matrix:
        r = np.concatenate([self.rows, self.cols])
        c = np.concatenate([self.cols, self.rows])
        v = np.concatenate([self.values, self.values])
        return scipy.sparse.csr_matrix((v, (r, c)), shape=(self.n, self.n))

    def to_dense(self, missing: float = np.nan) -> np.ndarray:
        out = np.full((self.n, self.n), missing)
        out[self.rows, self.cols] = self.values
        out[self.cols, self.rows] = self.values
        np.fill_diagonal(out, 0.0)
        return out


def _merge_min(into: dict, other: dict) -> None:
    for k, d in other.items():
        if k not in into or d < into[k]:
            into[k] = d


def build_distance_matrix(data: Dataset, cfg: PipelineConfig, workers: int | None = None,
                          ctx: PipelineContext | None = None,
                          bases=None) -> GeodesicDistanceMatrix:
    """Run a geodesic spray from every base sample and keep the minimum n * dt per pair.

    Distances are stored as integer step counts internally so the min rule is
    exact. A base fails when none of its momenta produce a state; more than
    10% failed bases aborts with :class:`PipelineError`.
    """
    ctx = ctx or prepare(data, cfg)
    n = data.n_samples
    bases = list(range(n)) if bases is None else [int(b) for b in bases]

    def run(chunk):
        best: dict[tuple[int, int], int] = {}
        failed = []
        for base in chunk:
            try:
                states = spray_states(ctx.data, ctx.cfg, base)
            except (StatePreparationError, NeighborhoodError) as exc:
                log.warning("base %d skipped: %s", base, exc)
                failed.append(base)
                continue
            ends = track_endpoints(ctx, states, cfg.n_prop)
            for step in range(ends.shape[0]):
                for end in ends[step]:
                    end = int(end)
                    if end == base:
                        continue
                    key = (base, end) if base < end else (end, base)
                    if key not in best or step + 1 < best[key]:
                        best[key] = step + 1
        return best, failed

    if workers and workers > 1:
        chunks = [bases[w::workers] for w in range(workers)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, chunks))
    else:
        results = [run(bases)]
    steps: dict = {}
    failed: list[int] = []
    for part, bad in results:
        _merge_min(steps, part)
        failed.extend(bad)
    failed.sort()
    if len(failed) > FAILURE_BUDGET * len(bases):
        raise PipelineError(f"{len(failed)} of {len(bases)} base samples failed: {failed[:10]}...")
    dist = {k: s * cfg.dt for k, s in steps.items()}
    return GeodesicDistanceMatrix._from_dict(n, dist, meta=cfg, failed=failed)


# ------------------------------------------------------------ deviation scan

@dataclass(eq=False)
class DeviationGrid:
    eps_values: np.ndarray
    alpha_values: np.ndarray
    D: np.ndarray               # (len(eps_values), len(alpha_values))
    probe_indices: np.ndarray

    def argmin(self) -> tuple[int, int]:
        i, j = np.unravel_index(int(np.argmin(self.D)), self.D.shape)
        return int(i), int(j)

    def selected(self) -> tuple[float, float]:
        i, j = self.argmin()
        return float(self.eps_values[i]), float(self.alpha_values[j])

    def h_values(self) -> np.ndarray:
        return np.array([[semiclassical_h(e, a) for a in self.alpha_values] for e in self.eps_values])


def probe_indices(n: int, n_probes: int, seed: int) -> np.ndarray:
    """Evenly strided sample indices with a seeded offset."""
    if n_probes < 1:
        raise ValidationError("n_probes must be >= 1")
    n_probes = min(n_probes, n)
    stride = n // n_probes
    offset = int(np.random.default_rng(seed).integers(stride))
    return offset + stride * np.arange(n_probes)


def probe_states(data: Dataset, cfg: PipelineConfig, probes, h: float) -> tuple[np.ndarray, list[int]]:
    """Unit-norm probe wavepackets as columns, aimed at each probe's nearest neighbor.

    The nearest-neighbor direction keeps the probes equivariant under rigid
    motions of the data. Probes whose state cannot be built are dropped.
    """
    pts = data.points
    cols, kept = [], []
    for b in probes:
        b = int(b)
        try:
            order = neighbor_order(pts, b)
            if order.size == 0:
                raise StatePreparationError(f"sample {b} has no distinct neighbors")
            v = pts[order[0]] - pts[b]
            if cfg.use_pca:
                small, support = two_scale_frames(pts, b, cfg.delta_pca, cfg.gamma, cfg.lpca_dim)
                p = small.basis @ v
                if np.linalg.norm(p) < 1e-12:
                    raise StatePreparationError(f"sample {b}: neighbor direction normal to frame")
                col = lpca_amplitudes(pts.shape[0], support, small.basis, pts, p / np.linalg.norm(p), h)
            else:
                col = wavepacket(pts - pts[b], v / np.linalg.norm(v), h)
        except (StatePreparationError, NeighborhoodError) as exc:
            log.warning("probe %d dropped: %s", b, exc)
            continue
        cols.append(col)
        kept.append(b)
    if not cols:
        return np.zeros((pts.shape[0], 0), dtype=np.complex128), kept
    return np.stack(cols, axis=1), kept


def deviation(L: np.ndarray, states: np.ndarray, h: float) -> np.ndarray:
    """|h^2 (psi | L | psi) - 1| for each unit-norm column."""
    LS = L @ states.real + 1j * (L @ states.imag)
    expect = np.einsum("ij,ij->j", states.conj(), LS)
    return np.abs(h * h * expect - 1.0)


def deviation_scan(data: Dataset, eps_grid, alpha_grid, n_probes: int = 28,
                   cfg: PipelineConfig | None = None) -> DeviationGrid:
    """Mean deviation over probe states for every (epsilon, alpha) pair.

    Needs only the Laplacian, no eigendecomposition or propagation.
    """
    eps_grid = np.asarray(eps_grid, dtype=np.float64).ravel()
    alpha_grid = np.asarray(alpha_grid, dtype=np.float64).ravel()
    if eps_grid.size == 0 or alpha_grid.size == 0:
        raise ValidationError("scan grids must be nonempty")
    if cfg is None:
        cfg = PipelineConfig(epsilon=float(eps_grid[0]), alpha=float(alpha_grid[0]), dt=0.1,
                             n_prop=1, n_coll=1)
    probes = probe_indices(data.n_samples, n_probes, cfg.seed)
    D = np.full((eps_grid.size, alpha_grid.size), np.nan)
    for i, eps in enumerate(eps_grid):
        L, _ = build_laplacian(build_kernel(data, eps), cfg.lam)
        for j, alpha in enumerate(alpha_grid):
            h = semiclassical_h(eps, alpha)
            states, kept = probe_states(data, cfg, probes, h)
            if not kept:
                raise PipelineError(f"no usable probe states at eps={eps:g}, alpha={alpha:g}")
            D[i, j] = float(np.mean(deviation(L, states, h)))
    return DeviationGrid(eps_values=eps_grid, alpha_values=alpha_grid, D=D, probe_indices=probes)
