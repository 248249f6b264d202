import math

import numpy as np
import pytest
import scipy.linalg
import scipy.stats
from hypothesis import given, settings, strategies as st

from direct_oracles import torus_dijkstra
from qgeo.errors import NumericError, ValidationError
from qgeo.oracles import (TorusSpec, direction_error, lpca_error_metrics, sample_sphere, sample_torus,
                          sphere_geodesic_distance, sphere_tangent_basis, subspace_angle,
                          torus_geodesic_distance, torus_geodesic_distances, torus_tangent_basis,
                          torus_truncated_propagator)
from qgeo.oracles.spectral_torus import theta_operator
from qgeo.oracles.torus import geodesic_path
from qgeo.states import lpca

TORUS = TorusSpec(r=0.8, R=2.0)


# ---------------------------------------------------------------- sampling

def test_sphere_samples_are_unit():
    pts = sample_sphere(2000, 0).points
    assert np.max(np.abs(np.linalg.norm(pts, axis=1) - 1)) <= 1e-12


def test_torus_samples_satisfy_implicit_equation():
    pts = sample_torus(5000, TORUS, 1).points
    assert np.max(np.abs(TORUS.residual(pts))) <= 1e-12


def test_torus_theta_follows_area_density():
    pts = sample_torus(50000, TORUS, 2).points
    theta, _ = TORUS.angles(pts)
    theta = np.mod(theta, 2 * np.pi)
    edges = np.linspace(0, 2 * np.pi, 25)
    observed, _ = np.histogram(theta, edges)
    # cumulative of (R + r cos t) / (2 pi R)
    cdf = (TORUS.R * edges + TORUS.r * np.sin(edges)) / (2 * np.pi * TORUS.R)
    expected = np.diff(cdf) * theta.size
    assert scipy.stats.chisquare(observed, expected).pvalue > 1e-3


def test_torus_spec_validation():
    with pytest.raises(ValidationError):
        TorusSpec(r=2.0, R=1.0)


# ---------------------------------------------------------------- sphere

def test_sphere_distances():
    n, s, e = np.array([0, 0, 1.0]), np.array([0, 0, -1.0]), np.array([1.0, 0, 0])
    assert sphere_geodesic_distance(n, s) == pytest.approx(math.pi, abs=1e-12)
    assert sphere_geodesic_distance(n, e) == pytest.approx(math.pi / 2, abs=1e-15)
    assert sphere_geodesic_distance(n, n) == 0.0
    with pytest.raises(ValidationError):
        sphere_geodesic_distance(n, 2 * e)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_sphere_metric_axioms(seed):
    u, v, w = sample_sphere(3, seed).points
    d = sphere_geodesic_distance
    assert d(u, v) == d(v, u)
    assert d(u, w) <= d(u, v) + d(v, w) + 1e-12


def test_sphere_tangent_basis_is_orthonormal_and_tangent():
    for p in sample_sphere(50, 3).points:
        B = sphere_tangent_basis(p)
        assert np.allclose(B @ B.T, np.eye(2), atol=1e-12)
        assert np.allclose(B @ p, 0, atol=1e-12)


def test_torus_tangent_basis_is_tangent():
    pts = sample_torus(50, TORUS, 4).points
    for p in pts:
        B = torus_tangent_basis(TORUS, p)
        # the surface normal is the gradient of the implicit function
        rho = math.hypot(p[0], p[1])
        normal = np.array([p[0] * (rho - TORUS.R) / rho, p[1] * (rho - TORUS.R) / rho, p[2]])
        assert np.allclose(B @ normal, 0, atol=1e-12)
        assert np.allclose(B @ B.T, np.eye(2), atol=1e-12)


def test_direction_error_cases():
    north = np.array([0, 0, 1.0])
    t = 0.7
    ahead = np.array([math.sin(t), 0, math.cos(t)])
    behind = np.array([-math.sin(t), 0, math.cos(t)])
    p0 = np.array([1.0, 0, 0])
    assert direction_error("sphere", north, p0, ahead, t) == pytest.approx(0.0, abs=1e-14)
    assert direction_error("sphere", north, p0, behind, t) == pytest.approx(2.0, abs=1e-14)
    with pytest.raises(NumericError):
        direction_error("sphere", north, p0, north, t)
    with pytest.raises(ValidationError):
        direction_error("plane", north, p0, ahead, t)


# ---------------------------------------------------------------- lpca metrics

def test_subspace_angle_cases():
    a = np.array([[1.0, 0, 0], [0, 1.0, 0]])
    b = np.array([[0, 1.0, 0], [1.0, 0, 0]])
    c = np.array([[1.0, 0, 0], [0, 0, 1.0]])
    assert subspace_angle(a, b) == pytest.approx(0.0, abs=1e-7)
    assert subspace_angle(a, c) == pytest.approx(math.pi / 2, abs=1e-12)
    with pytest.raises(ValidationError):
        subspace_angle(a, a[:1])


def test_lpca_metric_dimension_mismatch_and_norm_error():
    rng = np.random.default_rng(0)
    xy = rng.uniform(-1, 1, (100, 2))
    pts = np.column_stack([xy, np.zeros(100)])
    frame = lpca(pts, 0, 0.5)
    with pytest.raises(ValidationError):
        lpca_error_metrics(frame, np.array([[1.0, 0, 0]]))
    # flat intrinsic coordinates give zero norm error; phi is not periodic here, so stay small
    dts, dn = lpca_error_metrics(frame, np.eye(3)[:2], intrinsic=xy, metric=np.eye(2))
    assert dts <= 1e-10 and dn <= 1e-12


# ---------------------------------------------------------------- torus geodesics

def test_torus_equators_and_meridian():
    spec = TORUS
    outer = spec.embed([0.0, 0.0], [0.0, 0.5])
    inner = spec.embed([math.pi, math.pi], [0.0, 1.0])
    meridian = spec.embed([0.0, 1.0], [0.3, 0.3])
    assert torus_geodesic_distance(spec, *outer) == pytest.approx((spec.R + spec.r) * 0.5, abs=1e-6)
    assert torus_geodesic_distance(spec, *inner) == pytest.approx((spec.R - spec.r) * 1.0, abs=1e-6)
    assert torus_geodesic_distance(spec, *meridian) == pytest.approx(spec.r * 1.0, abs=1e-6)


def test_outer_equator_path_keeps_theta_zero():
    y = geodesic_path(TORUS, 0.0, 0.0, math.pi / 2, 3.0)
    assert np.max(np.abs(y[:, 0])) <= 1e-12


def test_torus_distances_symmetric():
    a = sample_torus(4, TORUS, 6).points
    b = sample_torus(4, TORUS, 7).points
    d1 = torus_geodesic_distances(TORUS, a, b)
    d2 = torus_geodesic_distances(TORUS, b, a)
    assert np.allclose(d1, d2, atol=1e-6)
    # never shorter than the chord
    assert np.all(d1 >= np.linalg.norm(a - b, axis=1) - 1e-9)


@pytest.mark.slow
def test_torus_shooting_matches_graph_distances():
    n_theta, n_phi = 170, 600
    rng = np.random.default_rng(8)
    src = (0, 0)
    targets = [(int(rng.integers(n_theta)), int(rng.integers(n_phi // 4))) for _ in range(12)]
    graph = torus_dijkstra(TORUS.r, TORUS.R, n_theta, n_phi, src, targets)
    th = lambda i: 2 * math.pi * i / n_theta
    ph = lambda j: 2 * math.pi * j / n_phi
    a = np.repeat(TORUS.embed(th(src[0]), ph(src[1]))[None], len(targets), axis=0)
    b = np.array([TORUS.embed(th(i), ph(j)) for i, j in targets])
    exact = torus_geodesic_distances(TORUS, a, b)
    assert np.max(np.abs(graph - exact)) <= 1e-2
    # graph paths can only be longer than geodesics, up to quadrature error
    assert np.all(graph >= exact - 1e-3)


# ---------------------------------------------------------------- truncated propagator

@pytest.fixture(scope="module")
def truncated():
    return torus_truncated_propagator(TORUS, n_modes=800, n_theta=171, n_phi=300, dt=0.1)


def test_truncated_spectrum_basics(truncated):
    assert truncated.eigvals[0] == pytest.approx(0.0, abs=1e-10)
    assert np.all(np.diff(truncated.eigvals) >= 0)
    f = truncated.eigfunc(0)
    assert np.allclose(f, f.flat[0], rtol=1e-10)
    # 400 profiles, k = 0 profiles counted once
    n_zero = int(np.count_nonzero(truncated.mode_k == 0))
    assert truncated.n_modes == 2 * 400 - n_zero
    assert truncated.eigvals[-1] == pytest.approx(156.5, rel=0.02)


def test_truncated_propagation_preserves_norm(truncated):
    rng = np.random.default_rng(0)
    raw = rng.standard_normal((171, 300)) + 1j * rng.standard_normal((171, 300))
    psi = truncated.project(raw)
    out = truncated.propagate(psi, 7)
    assert abs(truncated.norm(out) / truncated.norm(psi) - 1) <= 1e-8
    # projection is idempotent
    assert np.allclose(truncated.project(psi), psi, atol=1e-10)


def test_truncated_propagation_semigroup(truncated):
    psi = truncated.project(truncated.eigfunc(3) + truncated.eigfunc(40))
    a = truncated.propagate(truncated.propagate(psi, 2), 3)
    b = truncated.propagate(psi, 5)
    assert np.max(np.abs(a - b)) <= 1e-10


def test_theta_operator_second_order_convergence():
    vals = []
    for n in (64, 128, 256):
        S, rho = theta_operator(TORUS, n, 3)
        vals.append(scipy.linalg.eigh(S, np.diag(rho), eigvals_only=True)[2])
    ratio = (vals[0] - vals[1]) / (vals[1] - vals[2])
    assert ratio == pytest.approx(4.0, rel=0.05)


@pytest.mark.slow
def test_truncated_top_eigenvalue_fine_grid():
    top = torus_truncated_propagator(TORUS, n_modes=800, n_theta=1023, n_phi=300).eigvals[-1]
    assert top == pytest.approx(156.5, rel=0.01)
