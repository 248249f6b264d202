"""Geodesics on the torus of revolution by shooting with RK4.

Coordinates: x = (R + r cos t) cos p, y = (R + r cos t) sin p, z = r sin t,
metric ds^2 = r^2 dt^2 + rho^2 dp^2 with rho = R + r cos t. A launch angle
``beta`` gives the unit initial velocity (cos beta / r, sin beta / rho).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NumericError, ValidationError
from .sampling import TorusSpec

COARSE_STEP = 1e-2
FINE_STEP = 1e-3
N_FAN = 360
TOL = 1e-4


def _rhs(spec: TorusSpec, y: np.ndarray) -> np.ndarray:
    th, ph, dth, dph = y
    s, c = np.sin(th), np.cos(th)
    rho = spec.R + spec.r * c
    return np.stack([dth, dph, -rho * s * dph * dph / spec.r, 2.0 * spec.r * s * dth * dph / rho])


def _rk4(spec: TorusSpec, y: np.ndarray, h) -> np.ndarray:
    k1 = _rhs(spec, y)
    k2 = _rhs(spec, y + 0.5 * h * k1)
    k3 = _rhs(spec, y + 0.5 * h * k2)
    k4 = _rhs(spec, y + h * k3)
    return y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def initial_state(spec: TorusSpec, theta0, phi0, beta) -> np.ndarray:
    theta0, phi0, beta = np.broadcast_arrays(*(np.asarray(a, dtype=np.float64) for a in (theta0, phi0, beta)))
    rho = spec.R + spec.r * np.cos(theta0)
    return np.stack([theta0, phi0, np.cos(beta) / spec.r, np.sin(beta) / rho]).astype(np.float64)


def shoot(spec: TorusSpec, theta0, phi0, beta, length, step: float = FINE_STEP) -> np.ndarray:
    """Integrate unit-speed geodesics to arc length ``length`` (arrays broadcast).

    Every trajectory takes the same number of equal steps, chosen so no step
    exceeds ``step``. Returns the final (theta, phi, theta', phi') as (4, ...).
    """
    y = initial_state(spec, theta0, phi0, beta)
    length = np.broadcast_to(np.asarray(length, dtype=np.float64), y.shape[1:])
    if np.any(length < 0):
        raise ValidationError("length must be non-negative")
    n = max(1, int(np.ceil(float(np.max(length, initial=0.0)) / step)))
    h = length / n
    for _ in range(n):
        y = _rk4(spec, y, h)
    return y


def geodesic_path(spec: TorusSpec, theta0, phi0, beta, length, step: float = FINE_STEP) -> np.ndarray:
    """Sampled trajectory (n + 1, 4) of one geodesic."""
    n = max(1, int(np.ceil(length / step)))
    h = length / n
    y = initial_state(spec, theta0, phi0, beta)
    out = [y]
    for _ in range(n):
        y = _rk4(spec, y, h)
        out.append(y)
    return np.array(out)


def velocity_ambient(spec: TorusSpec, y: np.ndarray) -> np.ndarray:
    """Ambient velocity vectors (..., 3) of states (4, ...)."""
    th, ph, dth, dph = y
    rho = spec.R + spec.r * np.cos(th)
    e_t = np.stack([-spec.r * np.sin(th) * np.cos(ph), -spec.r * np.sin(th) * np.sin(ph), spec.r * np.cos(th)], -1)
    e_p = np.stack([-rho * np.sin(ph), rho * np.cos(ph), np.zeros_like(th)], -1)
    return e_t * dth[..., None] + e_p * dph[..., None]


def _wrap(a):
    return (a + np.pi) % (2 * np.pi) - np.pi


def coordinate_path_bound(spec: TorusSpec, ta, pa, tb, pb) -> np.ndarray:
    """Length of the shorter of the two meridian-then-parallel coordinate paths."""
    dt = np.abs(_wrap(tb - ta))
    dp = np.abs(_wrap(pb - pa))
    first_parallel = (spec.R + spec.r * np.cos(ta)) * dp + spec.r * dt
    first_meridian = spec.r * dt + (spec.R + spec.r * np.cos(tb)) * dp
    return np.minimum(first_parallel, first_meridian)


@dataclass(frozen=True)
class GeodesicSolution:
    distance: np.ndarray
    beta: np.ndarray
    residual: np.ndarray


def _fan_candidates(spec, ta, pa, xb, bound, n_fan, n_keep):
    """Coarse fan: closest approach of each launch direction, local minima kept."""
    P = ta.size
    betas = 2 * np.pi * np.arange(n_fan) / n_fan
    y = initial_state(spec, np.repeat(ta, n_fan), np.repeat(pa, n_fan), np.tile(betas, P))
    target = np.repeat(xb, n_fan, axis=0)
    lim = np.repeat(bound, n_fan) + COARSE_STEP
    best = np.full(P * n_fan, np.inf)
    best_s = np.zeros(P * n_fan)
    n = int(np.ceil(float(bound.max()) / COARSE_STEP)) + 1
    for i in range(1, n + 1):
        y = _rk4(spec, y, COARSE_STEP)
        s = i * COARSE_STEP
        miss = np.sum((spec.embed(y[0], y[1]) - target) ** 2, axis=1)
        better = (miss < best) & (s <= lim)
        best = np.where(better, miss, best)
        best_s = np.where(better, s, best_s)
    best = np.sqrt(best).reshape(P, n_fan)
    best_s = best_s.reshape(P, n_fan)
    left, right = np.roll(best, 1, axis=1), np.roll(best, -1, axis=1)
    is_min = (best <= left) & (best <= right)
    score = np.where(is_min, best, np.inf)
    order = np.argsort(score, axis=1, kind="stable")[:, :n_keep]
    rows = np.arange(P)[:, None]
    return betas[order], best_s[rows, order], np.isfinite(score[rows, order])


def _refine(spec, ta, pa, xb, beta, s, iters=30, step=FINE_STEP):
    """Gauss-Newton on the ambient miss X(beta, s) - x_b."""
    fd = 1e-6
    for _ in range(iters):
        y = shoot(spec, ta, pa, beta, s, step)
        res = spec.embed(y[0], y[1]) - xb
        dxs = velocity_ambient(spec, y)
        yp = shoot(spec, ta, pa, beta + fd, s, step)
        ym = shoot(spec, ta, pa, beta - fd, s, step)
        dxb = (spec.embed(yp[0], yp[1]) - spec.embed(ym[0], ym[1])) / (2 * fd)
        J = np.stack([dxb, dxs], axis=-1)                        # (..., 3, 2)
        JtJ = np.einsum("...ki,...kj->...ij", J, J)
        Jtr = np.einsum("...ki,...k->...i", J, res)
        JtJ[..., 0, 0] += 1e-14
        JtJ[..., 1, 1] += 1e-14
        delta = np.linalg.solve(JtJ, Jtr[..., None])[..., 0]
        move = np.clip(delta, -0.2, 0.2)
        beta = beta - move[..., 0]
        s = np.maximum(s - move[..., 1], 0.0)
        if np.max(np.abs(move)) < 1e-12:
            break
    y = shoot(spec, ta, pa, beta, s, step)
    res = np.linalg.norm(spec.embed(y[0], y[1]) - xb, axis=-1)
    return beta, s, res


def solve_geodesics(spec: TorusSpec, a, b, n_fan: int = N_FAN, n_keep: int = 6) -> GeodesicSolution:
    """Minimizing geodesic from each a[k] to b[k] (ambient points on the torus)."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if a.shape != b.shape or a.shape[-1] != 3:
        raise ValidationError("a and b must be matching arrays of 3-vectors")
    spec.check_on_surface(a)
    spec.check_on_surface(b)
    ta, pa = spec.angles(a)
    tb, pb = spec.angles(b)
    P = a.shape[0]
    bound = coordinate_path_bound(spec, ta, pa, tb, pb)
    dist = np.zeros(P)
    beta_out = np.zeros(P)
    resid = np.zeros(P)
    same = np.linalg.norm(a - b, axis=1) < 1e-12
    todo = np.flatnonzero(~same)
    if todo.size == 0:
        return GeodesicSolution(dist, beta_out, resid)
    ta, pa, tb, pb, xb, bound = ta[todo], pa[todo], tb[todo], pb[todo], b[todo], bound[todo]
    betas, ss, valid = _fan_candidates(spec, ta, pa, xb, bound, n_fan, n_keep)
    K = betas.shape[1]
    ta_, pa_ = np.repeat(ta, K).reshape(-1, K), np.repeat(pa, K).reshape(-1, K)
    xb_ = np.repeat(xb[:, None, :], K, axis=1)
    # converge cheaply at the coarse step, then polish at the fine step
    beta_r, s_r, _ = _refine(spec, ta_, pa_, xb_, betas, ss, iters=30, step=COARSE_STEP)
    beta_r, s_r, res = _refine(spec, ta_, pa_, xb_, beta_r, s_r, iters=4, step=FINE_STEP)
    ok = valid & (res < 1e-9) & (s_r <= bound[:, None] + TOL)
    length = np.where(ok, s_r, np.inf)
    k = np.argmin(length, axis=1)
    rows = np.arange(todo.size)
    best = length[rows, k]
    if not np.all(np.isfinite(best)):
        bad = todo[~np.isfinite(best)]
        raise NumericError(f"shooting did not converge for pair(s) {bad.tolist()}; "
                           f"smallest residuals {np.min(res, axis=1)[~np.isfinite(best)].tolist()}")
    dist[todo] = best
    beta_out[todo] = beta_r[rows, k]
    resid[todo] = res[rows, k]
    return GeodesicSolution(dist, beta_out, resid)


def torus_geodesic_distances(spec: TorusSpec, a, b) -> np.ndarray:
    return solve_geodesics(spec, a, b).distance


def torus_geodesic_distance(spec: TorusSpec, a, b) -> float:
    return float(solve_geodesics(spec, np.asarray(a)[None], np.asarray(b)[None]).distance[0])


def initial_direction(spec: TorusSpec, a, b) -> np.ndarray:
    """Unit ambient tangent at ``a`` of the minimizing geodesic toward ``b``."""
    sol = solve_geodesics(spec, np.asarray(a)[None], np.asarray(b)[None])
    ta, pa = spec.angles(np.asarray(a))
    y0 = initial_state(spec, ta, pa, sol.beta[0])
    return velocity_ambient(spec, y0)
