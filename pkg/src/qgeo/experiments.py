"""End-to-end validation runs on the sphere and the torus against analytic ground truth."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import Dataset, PipelineConfig
from .errors import NumericError
from .laplacian import SpectralLaplacian
from .measurement import SampleDistribution, euclidean_propagation_baseline, mean_position_lpca
from .oracles.geometry import SPHERE, direction_error, sphere_geodesic_distance
from .oracles.sampling import TorusSpec, sample_sphere
from .oracles.spectral_torus import TruncatedPropagator, torus_truncated_propagator
from .oracles.torus import shoot, torus_geodesic_distances
from .pipeline import DeviationGrid, PipelineContext, deviation_scan, prepare, spray_states, track_endpoints
from .states import FrameCache, lpca_amplitudes, random_unit_vectors, two_scale_frames

log = logging.getLogger(__name__)

SPHERE_LOG_EPS = np.arange(-6.0, -2.49, 0.5)
SPHERE_ALPHAS = np.round(np.arange(1.0, 2.01, 0.2), 10)


@dataclass(eq=False)
class TrackingTable:
    """Distance-versus-time statistics of tracked wavepackets."""

    times: np.ndarray
    distances: np.ndarray                 # (n_steps, m) geodesic distance from start
    baseline: np.ndarray | None = None    # same shape, straight-line estimate
    direction: np.ndarray | None = None   # same shape, direction misalignment
    h: float = float("nan")
    extra: dict = field(default_factory=dict)

    @property
    def abs_error(self) -> np.ndarray:
        return np.abs(self.distances - self.times[:, None])

    @property
    def baseline_error(self) -> np.ndarray | None:
        return None if self.baseline is None else np.abs(self.baseline - self.times[:, None])

    def rows(self) -> list[dict]:
        out = []
        for i, t in enumerate(self.times):
            row = {"t": t, "mean_distance": self.distances[i].mean(), "std_distance": self.distances[i].std(),
                   "mean_abs_error": self.abs_error[i].mean(), "std_abs_error": self.abs_error[i].std()}
            if self.baseline is not None:
                row["baseline_mean_distance"] = self.baseline[i].mean()
                row["baseline_mean_abs_error"] = self.baseline_error[i].mean()
            if self.direction is not None:
                row["mean_direction_error"] = np.nanmean(self.direction[i])
            out.append(row)
        return out

    def to_csv(self, path: str | Path) -> None:
        rows = self.rows()
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(list(rows[0]))
            for r in rows:
                w.writerow([format(float(v), ".17g") for v in r.values()])


# ------------------------------------------------------------------ sphere

def sphere_scan(data: Dataset, cfg: PipelineConfig, log_eps=SPHERE_LOG_EPS, alphas=SPHERE_ALPHAS,
                n_probes: int = 28) -> DeviationGrid:
    return deviation_scan(data, np.exp(np.asarray(log_eps)), alphas, n_probes, cfg)


def sphere_tracking(ctx: PipelineContext, n_bases: int = 20, n_steps: int = 10,
                    seed: int = 0) -> TrackingTable:
    """Launch one LPCA wavepacket from each of ``n_bases`` random samples and track it."""
    data, cfg = ctx.data, ctx.cfg
    if not cfg.use_pca:
        raise ValueError("sphere tracking compares against the LPCA straight-line baseline; enable use_pca")
    rng = np.random.default_rng(seed)
    bases = rng.choice(data.n_samples, size=n_bases, replace=False)
    times = cfg.dt * np.arange(1, n_steps + 1)
    dist = np.empty((n_steps, n_bases))
    base_d = np.empty((n_steps, n_bases))
    dirs = np.full((n_steps, n_bases), np.nan)
    pts = data.points
    for j, b in enumerate(bases):
        states = spray_states(data, cfg, int(b), count=1)
        ends = track_endpoints(ctx, states, n_steps)[:, 0]
        p_frame = states.momenta[0]
        p_amb = states.frame.basis.T @ p_frame
        p_amb /= np.linalg.norm(p_amb)
        for s, t in enumerate(times):
            dist[s, j] = sphere_geodesic_distance(pts[b], pts[ends[s]])
            lin = euclidean_propagation_baseline(data, states.frame, p_frame, t)
            base_d[s, j] = sphere_geodesic_distance(pts[b], pts[lin])
            if ends[s] != b and abs(np.dot(pts[ends[s]], pts[b]) + 1) > 1e-12:
                tangent = p_amb - np.dot(p_amb, pts[b]) * pts[b]
                dirs[s, j] = direction_error(SPHERE, pts[b], tangent / np.linalg.norm(tangent), pts[ends[s]], t)
    return TrackingTable(times=times, distances=dist, baseline=base_d, direction=dirs, h=cfg.h,
                         extra={"bases": bases})


def sphere_config(epsilon: float = np.exp(-4.7), alpha: float = 1.6, **kw) -> PipelineConfig:
    base = dict(epsilon=float(epsilon), alpha=float(alpha), dt=0.1, n_prop=10, n_coll=1,
                use_pca=True, delta_pca=1.5, gamma=0.1)
    base.update(kw)
    return PipelineConfig(**base)


@dataclass(eq=False)
class SphereValidation:
    grid: DeviationGrid
    config: PipelineConfig
    table: TrackingTable
    eigvals: np.ndarray
    data: Dataset | None = None
    spec: SpectralLaplacian | None = None


def sphere_validation(n: int = 3000, seed: int = 0, n_bases: int = 20, n_steps: int = 10,
                      cfg: PipelineConfig | None = None, scan: bool = True) -> SphereValidation:
    """Sample, select (epsilon, alpha) by deviation scan, decompose, track."""
    data = sample_sphere(n, seed)
    cfg = cfg or sphere_config(seed=seed)
    grid = sphere_scan(data, cfg) if scan else None
    if grid is not None:
        eps, alpha = grid.selected()
        cfg = cfg.replace(epsilon=eps, alpha=alpha)
        log.info("scan selected eps=%.6g alpha=%.3g h=%.4f", eps, alpha, cfg.h)
    ctx = prepare(data, cfg)
    table = sphere_tracking(ctx, n_bases, n_steps, seed)
    return SphereValidation(grid=grid, config=cfg, table=table, eigvals=ctx.spec.eigvals, data=data,
                            spec=ctx.spec)


def eigenvalue_groups(eigvals: np.ndarray, sizes=(3, 5, 7)) -> list[np.ndarray]:
    """Consecutive nonzero eigenvalues split into groups of the given sizes."""
    vals = np.asarray(eigvals)[1:]
    out, start = [], 0
    for s in sizes:
        out.append(vals[start:start + s])
        start += s
    return out


# ------------------------------------------------------------------- torus

TORUS_H = float(np.exp(-1.0))


def _torus_ambient_momentum(tp: TruncatedPropagator, point, basis, p_frame) -> float:
    """Launch angle on the true torus of the frame momentum projected to the tangent plane."""
    th, ph = tp.spec.angles(point)
    e_t = np.array([-np.sin(th) * np.cos(ph), -np.sin(th) * np.sin(ph), np.cos(th)])
    e_p = np.array([-np.sin(ph), np.cos(ph), 0.0])
    u = basis.T @ p_frame
    return float(np.arctan2(u @ e_p, u @ e_t))


@dataclass(eq=False)
class TorusValidation:
    table: TrackingTable
    long_time: TrackingTable
    propagator: TruncatedPropagator


def torus_track(tp: TruncatedPropagator, data: Dataset, cache: FrameCache, bases, momenta_frames,
                n_steps: int, h: float, measure_delta: float) -> np.ndarray:
    """Endpoint grid indices (n_steps, m) of truncated-propagator wavepackets."""
    pts = data.points
    w = tp.area_weights().ravel()
    ends = np.empty((n_steps, len(bases)), dtype=np.int64)
    for j, (b, (small, support, p)) in enumerate(zip(bases, momenta_frames)):
        psi = lpca_amplitudes(pts.shape[0], support, small.basis, pts, p, h)
        for s in range(1, n_steps + 1):
            q = np.abs(tp.propagate(psi, s).ravel()) ** 2 * w
            q /= q.sum()
            ends[s - 1, j] = mean_position_lpca(data, SampleDistribution(q, int(np.argmax(q))),
                                                measure_delta, cache)
    return ends


def torus_validation(spec: TorusSpec | None = None, n_states: int = 20, n_steps: int = 10,
                     long_steps: int = 24, dt: float = 0.1, seed: int = 0, h: float = TORUS_H,
                     delta: float = 2.0, gamma: float = 0.05, measure_delta: float = 1.0,
                     n_modes: int = 800, n_theta: int = 171, n_phi: int = 300) -> TorusValidation:
    """Truncated-propagator tracking on the torus grid plus one long trajectory.

    States use LPCA frames on the ``delta`` ball with uniformly random frame
    momenta. The position estimate uses the smaller ``measure_delta`` ball,
    which stays on one sheet of the tube. The long trajectory is the first
    random launch whose exact geodesic is still minimizing at the final time.
    """
    spec = spec or TorusSpec()
    tp = torus_truncated_propagator(spec, n_modes, n_theta, n_phi, dt)
    pts = tp.grid_points()
    data = Dataset(pts)
    cache = FrameCache(data)
    rng = np.random.default_rng(seed)

    def launch(b):
        small, support = two_scale_frames(pts, int(b), delta, gamma, 2)
        return small, support, random_unit_vectors(rng, 1, small.dim)[0]

    bases = rng.choice(pts.shape[0], size=n_states, replace=False)
    frames = [launch(b) for b in bases]
    ends = torus_track(tp, data, cache, bases, frames, n_steps, h, measure_delta)
    times = dt * np.arange(1, n_steps + 1)
    A = np.repeat(pts[bases][None], n_steps, axis=0).reshape(-1, 3)
    dist = torus_geodesic_distances(spec, A, pts[ends.ravel()]).reshape(n_steps, n_states)
    table = TrackingTable(times=times, distances=dist, h=h, extra={"bases": bases})

    t_long = long_steps * dt
    for _ in range(200):
        b = int(rng.integers(pts.shape[0]))
        small, support, p = launch(b)
        beta = _torus_ambient_momentum(tp, pts[b], small.basis, p)
        th, ph = spec.angles(pts[b])
        y = shoot(spec, th, ph, beta, t_long)
        tip = spec.embed(y[0], y[1])
        if torus_geodesic_distances(spec, pts[b][None], tip[None])[0] >= t_long - 1e-3:
            break
    else:
        raise NumericError("no minimizing long-time launch found in 200 tries")
    lends = torus_track(tp, data, cache, [b], [(small, support, p)], long_steps, h, measure_delta)[:, 0]
    ltimes = dt * np.arange(1, long_steps + 1)
    ldist = torus_geodesic_distances(spec, np.repeat(pts[b][None], long_steps, 0), pts[lends])
    long_table = TrackingTable(times=ltimes, distances=ldist[:, None], h=h,
                               extra={"base": b, "beta": beta})
    return TorusValidation(table=table, long_time=long_table, propagator=tp)
