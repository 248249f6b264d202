"""Analytic references for the sphere and the torus of revolution."""

from .geometry import (direction_error, lpca_error_metrics, sphere_geodesic_distance, sphere_tangent_basis,
                       subspace_angle, torus_tangent_basis)
from .sampling import TorusSpec, sample_sphere, sample_torus
from .spectral_torus import TruncatedPropagator, torus_truncated_propagator
from .torus import solve_geodesics, torus_geodesic_distance, torus_geodesic_distances

__all__ = [
    "TorusSpec", "TruncatedPropagator", "direction_error", "lpca_error_metrics", "sample_sphere",
    "sample_torus", "solve_geodesics", "sphere_geodesic_distance", "sphere_tangent_basis",
    "subspace_angle", "torus_geodesic_distance", "torus_geodesic_distances", "torus_tangent_basis",
    "torus_truncated_propagator",
]
