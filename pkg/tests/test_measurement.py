import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qgeo.dataset import Dataset
from qgeo.errors import ValidationError
from qgeo.measurement import (estimate, euclidean_propagation_baseline, max_position, mean_position_extrinsic,
                              mean_position_lpca, nearest_sample, to_distribution)
from qgeo.states import lpca


def test_point_mass():
    psi = np.zeros(6, dtype=complex)
    psi[4] = 1j
    dist = to_distribution(psi)
    assert dist.q[4] == 1.0 and dist.argmax_index == 4
    data = Dataset(np.random.default_rng(0).standard_normal((6, 2)))
    for est in ("mean", "max"):
        assert estimate(data, dist, est) == 4


def test_argmax_tie_goes_to_lowest_index():
    dist = to_distribution(np.array([0.0, 1.0, 0.0, -1.0]))
    assert dist.argmax_index == 1


def test_zero_state_rejected():
    with pytest.raises(ValidationError):
        to_distribution(np.zeros(3, dtype=complex))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0, 2 * math.pi))
def test_global_phase_and_scale_invariance(seed, phase):
    rng = np.random.default_rng(seed)
    psi = rng.standard_normal(20) + 1j * rng.standard_normal(20)
    a = to_distribution(psi)
    b = to_distribution(3.5 * np.exp(1j * phase) * psi)
    assert np.allclose(a.q, b.q, rtol=1e-12, atol=0)
    assert abs(a.q.sum() - 1) <= 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_extrinsic_mean_is_permutation_equivariant(seed):
    rng = np.random.default_rng(seed)
    pts = rng.standard_normal((25, 3))
    psi = rng.standard_normal(25) + 1j * rng.standard_normal(25)
    perm = rng.permutation(25)
    a = mean_position_extrinsic(Dataset(pts), to_distribution(psi))
    b = mean_position_extrinsic(Dataset(pts[perm]), to_distribution(psi[perm]))
    assert perm[b] == a


def test_antipodal_mean_matches_brute_force():
    rng = np.random.default_rng(1)
    pts = rng.standard_normal((200, 3))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    north, south = 0, 1
    pts[north], pts[south] = [0, 0, 1], [0, 0, -1]
    psi = np.zeros(200)
    psi[[north, south]] = 1 / math.sqrt(2)
    got = mean_position_extrinsic(Dataset(pts), to_distribution(psi))
    # the mean is the origin, so the nearest sample is the one of smallest norm (all equal): lowest index
    norms = [np.sum(p ** 2) for p in pts]
    best = min(range(200), key=lambda i: (norms[i], i))
    assert got == best


def test_nearest_sample_brute_force():
    rng = np.random.default_rng(2)
    pts = rng.standard_normal((50, 4))
    target = rng.standard_normal(4)
    brute = min(range(50), key=lambda i: float(np.sum((pts[i] - target) ** 2)))
    assert nearest_sample(pts, target) == brute


def test_planar_lpca_mean_equals_extrinsic_mean():
    rng = np.random.default_rng(3)
    pts = np.zeros((300, 3))
    pts[:, :2] = rng.uniform(-1, 1, (300, 2))
    data = Dataset(pts)
    c = int(np.argmin(np.sum(pts ** 2, axis=1)))
    q = np.exp(-np.sum((pts - pts[c] - [0.1, 0.05, 0]) ** 2, axis=1) / 0.01)
    dist = to_distribution(np.sqrt(q))
    # ball large enough to hold every sample, so the restriction is trivial
    assert mean_position_lpca(data, dist, 10.0) == mean_position_extrinsic(data, dist)


def test_lpca_mean_falls_back_with_warning(caplog):
    pts = np.array([[0.0, 0.0], [5.0, 0.0], [0.0, 5.0]])
    dist = to_distribution(np.array([1.0, 0.1, 0.1]))
    with caplog.at_level(logging.WARNING):
        got = mean_position_lpca(Dataset(pts), dist, 0.5)
    assert "ambient mean" in caplog.text
    assert got == mean_position_extrinsic(Dataset(pts), dist)


def test_max_position():
    dist = to_distribution(np.array([0.1, 0.9, 0.2]))
    assert max_position(dist) == 1


def test_euclidean_baseline():
    pts = np.zeros((5, 2))
    pts[:, 0] = [0.0, 0.1, 0.2, 0.3, 0.4]
    data = Dataset(pts)
    frame = lpca(data, 0, 1.0, dim=1)
    p = np.array([1.0]) if frame.basis[0, 0] > 0 else np.array([-1.0])
    assert euclidean_propagation_baseline(data, frame, p, 0.0) == 0
    assert euclidean_propagation_baseline(data, frame, p, 0.21) == 2
    assert euclidean_propagation_baseline(data, frame, p, 5.0) == 4
    with pytest.raises(ValidationError):
        euclidean_propagation_baseline(data, frame, p, -1.0)


def test_unknown_estimator():
    with pytest.raises(ValidationError):
        estimate(Dataset(np.eye(2)), to_distribution(np.ones(2)), "median")
