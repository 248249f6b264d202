"""Sphere distances, analytic tangent frames and estimation error metrics."""

from __future__ import annotations

import numpy as np

from ..errors import NumericError, ValidationError
from .sampling import TorusSpec
from . import torus as _torus

SPHERE = "sphere"


def _check_unit(u, tol=1e-8):
    if np.any(np.abs(np.linalg.norm(u, axis=-1) - 1.0) > tol):
        raise ValidationError("point is not on the unit sphere")


def sphere_geodesic_distance(u, v) -> np.ndarray | float:
    """Great-circle distance; accepts single points or matching arrays."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    _check_unit(u)
    _check_unit(v)
    d = np.arccos(np.clip(np.sum(u * v, axis=-1), -1.0, 1.0))
    return float(d) if np.ndim(d) == 0 else d


def sphere_tangent_basis(point) -> np.ndarray:
    """Orthonormal rows spanning the tangent plane of the unit sphere at ``point``.

    Uses the polar/azimuthal unit vectors away from the poles.
    """
    x, y, z = np.asarray(point, dtype=np.float64)
    theta = np.arccos(np.clip(z, -1, 1))
    phi = np.arctan2(y, x)
    if np.sin(theta) < 1e-8:
        return np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    e_t = [np.cos(theta) * np.cos(phi), np.cos(theta) * np.sin(phi), -np.sin(theta)]
    e_p = [-np.sin(phi), np.cos(phi), 0.0]
    return np.array([e_t, e_p])


def torus_tangent_basis(spec: TorusSpec, point) -> np.ndarray:
    th, ph = spec.angles(np.asarray(point))
    e_t = [-np.sin(th) * np.cos(ph), -np.sin(th) * np.sin(ph), np.cos(th)]
    e_p = [-np.sin(ph), np.cos(ph), 0.0]
    return np.array([e_t, e_p], dtype=np.float64)


def sphere_angles(points) -> np.ndarray:
    """(theta, phi) columns with theta the polar angle."""
    p = np.asarray(points, dtype=np.float64)
    return np.stack([np.arccos(np.clip(p[..., 2], -1, 1)), np.arctan2(p[..., 1], p[..., 0])], -1)


def sphere_metric(theta: float) -> np.ndarray:
    return np.diag([1.0, np.sin(theta) ** 2])


def torus_metric(spec: TorusSpec, theta: float) -> np.ndarray:
    return np.diag([spec.r ** 2, (spec.R + spec.r * np.cos(theta)) ** 2])


def subspace_angle(V1: np.ndarray, V2: np.ndarray) -> float:
    """Largest principal angle between row spaces of two orthonormal bases."""
    V1 = np.atleast_2d(V1)
    V2 = np.atleast_2d(V2)
    if V1.shape != V2.shape:
        raise ValidationError(f"basis shapes differ: {V1.shape} vs {V2.shape}")
    s = np.linalg.svd(V1 @ V2.T, compute_uv=False)
    return float(np.arccos(np.clip(s.min(), -1.0, 1.0)))


def lpca_error_metrics(frame, true_basis, intrinsic=None, metric=None) -> tuple[float, float]:
    """(tangent-space angle error, mean norm error) of an LPCA frame.

    The norm error compares |theta_j - theta_0| in frame coordinates with the
    metric length of the intrinsic coordinate difference, averaged over the
    frame's neighbors. It needs ``intrinsic`` (N, 2) coordinates of all
    samples and the 2x2 ``metric`` at the center; it is NaN otherwise.
    Azimuthal differences are wrapped to (-pi, pi].
    """
    true_basis = np.atleast_2d(np.asarray(true_basis, dtype=np.float64))
    if true_basis.shape[0] != frame.dim:
        raise ValidationError(f"true basis has dimension {true_basis.shape[0]}, frame has {frame.dim}")
    delta_ts = subspace_angle(frame.basis, true_basis)
    if intrinsic is None or metric is None:
        return delta_ts, float("nan")
    nb = frame.neighborhood
    others = nb != frame.center_index
    dq = np.asarray(intrinsic)[nb[others]] - np.asarray(intrinsic)[frame.center_index]
    dq[:, 1:] = (dq[:, 1:] + np.pi) % (2 * np.pi) - np.pi
    n_hat = np.sqrt(np.einsum("ij,jk,ik->i", dq, metric, dq))
    p = np.linalg.norm(frame.coords[others], axis=1)
    return delta_ts, float(np.mean(np.abs(p - n_hat))) if p.size else 0.0


def sphere_log_direction(base, endpoint) -> np.ndarray:
    """Unit tangent at ``base`` of the minimizing great circle toward ``endpoint``."""
    b = np.asarray(base, dtype=np.float64)
    e = np.asarray(endpoint, dtype=np.float64)
    w = e - np.dot(e, b) * b
    nw = np.linalg.norm(w)
    if nw < 1e-12:
        raise NumericError("direction undefined: endpoint coincides with base or its antipode "
                           f"(|tangential part|={nw:.2e}, cos={np.dot(e, b):.6f})")
    return w / nw


def direction_error(manifold, base, p0, endpoint, t: float) -> float:
    """|1 - <p0, p0'>_g| where p0' launches the minimizing geodesic to ``endpoint``.

    ``manifold`` is ``"sphere"`` or a :class:`TorusSpec`; ``p0`` is an ambient
    unit tangent vector at ``base``, so the metric pairing is the ambient dot
    product.
    """
    if not t > 0:
        raise ValidationError("t must be positive")
    p0 = np.asarray(p0, dtype=np.float64)
    if manifold == SPHERE:
        _check_unit(np.asarray(base))
        _check_unit(np.asarray(endpoint))
        p1 = sphere_log_direction(base, endpoint)
    elif isinstance(manifold, TorusSpec):
        if np.linalg.norm(np.asarray(endpoint) - np.asarray(base)) < 1e-12:
            raise NumericError("direction undefined: endpoint coincides with base")
        p1 = _torus.initial_direction(manifold, base, endpoint)
    else:
        raise ValidationError(f"unknown manifold {manifold!r}")
    return float(abs(1.0 - np.dot(p0, p1)))
