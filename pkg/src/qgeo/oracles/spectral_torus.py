"""Spectrally truncated half-wave propagator on a regular torus grid.

Eigenfunctions of the Laplace-Beltrami operator separate as
psi(theta) exp(i k phi). For each k the theta profile solves a periodic
finite-volume problem S_k psi = lambda W psi with W = diag(rho), which is
symmetric-definite, so profiles are orthonormal in the area-weighted inner
product. Each kept profile with k > 0 contributes the pair of eigenfunctions
with azimuthal numbers +k and -k.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ..errors import NumericError, ValidationError
from .sampling import TorusSpec


def theta_operator(spec: TorusSpec, n_theta: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    """(S_k, rho) for the k-th azimuthal Fourier mode on a periodic theta grid."""
    dth = 2 * np.pi / n_theta
    th = dth * np.arange(n_theta)
    rho = spec.R + spec.r * np.cos(th)
    rho_half = spec.R + spec.r * np.cos(th + 0.5 * dth)        # rho at i + 1/2
    c = 1.0 / (spec.r * dth) ** 2
    S = np.zeros((n_theta, n_theta))
    idx = np.arange(n_theta)
    up = (idx + 1) % n_theta
    S[idx, idx] = c * (rho_half + np.roll(rho_half, 1)) + k * k / rho
    S[idx, up] -= c * rho_half
    S[up, idx] -= c * rho_half
    return S, rho


@dataclass(frozen=True, eq=False)
class TruncatedPropagator:
    spec: TorusSpec
    n_theta: int
    n_phi: int
    dt: float
    eigvals: np.ndarray          # ascending, with multiplicity
    mode_k: np.ndarray           # azimuthal number of each kept mode
    blocks: dict                 # k -> (values, theta profiles as columns)

    @property
    def n_modes(self) -> int:
        return int(self.eigvals.size)

    @property
    def theta(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.n_theta) / self.n_theta

    @property
    def phi(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.n_phi) / self.n_phi

    @property
    def rho(self) -> np.ndarray:
        return self.spec.R + self.spec.r * np.cos(self.theta)

    def grid_points(self) -> np.ndarray:
        """Ambient coordinates, row-major over (theta, phi), shape (n_theta * n_phi, 3)."""
        th, ph = np.meshgrid(self.theta, self.phi, indexing="ij")
        return self.spec.embed(th, ph).reshape(-1, 3)

    def area_weights(self) -> np.ndarray:
        """Quadrature weights r rho dtheta dphi on the grid, shape (n_theta, n_phi)."""
        w = self.spec.r * self.rho * (2 * np.pi / self.n_theta) * (2 * np.pi / self.n_phi)
        return np.repeat(w[:, None], self.n_phi, axis=1)

    def norm(self, state: np.ndarray) -> float:
        s = np.asarray(state).reshape(self.n_theta, self.n_phi)
        return float(np.sqrt(np.sum(self.area_weights() * np.abs(s) ** 2)))

    def eigfunc(self, index: int) -> np.ndarray:
        """Grid samples of the ``index``-th kept eigenfunction."""
        k = int(self.mode_k[index])
        vals, vecs = self.blocks[k]
        same = np.flatnonzero(self.mode_k[:index + 1] == k)
        col = vecs[:, same.size - 1]
        return col[:, None] * np.exp(1j * k * self.phi)[None, :]

    def _apply(self, state: np.ndarray, time: float | None) -> np.ndarray:
        s = np.asarray(state, dtype=np.complex128).reshape(self.n_theta, self.n_phi)
        C = np.fft.fft(s, axis=1)
        out = np.zeros_like(C)
        rho = self.rho
        for k, (vals, vecs) in self.blocks.items():
            col = k % self.n_phi
            a = vecs.T @ (rho * C[:, col])
            if time is not None:
                a = a * np.exp(-1j * time * np.sqrt(vals))
            out[:, col] = vecs @ a
        return np.fft.ifft(out, axis=1)

    def project(self, state: np.ndarray) -> np.ndarray:
        """Orthogonal projection onto the kept modes."""
        return self._apply(state, None)

    def propagate(self, state: np.ndarray, steps: int = 1) -> np.ndarray:
        """exp(-i t sqrt(Lambda)) on the kept modes, t = steps * dt; other modes are dropped."""
        return self._apply(state, steps * self.dt)


def torus_truncated_propagator(spec: TorusSpec, n_modes: int = 800, n_theta: int = 171,
                               n_phi: int = 300, dt: float = 0.1) -> TruncatedPropagator:
    """Keep the lowest ``n_modes // 2`` theta profiles over k >= 0, each used with +k and -k.

    A k = 0 profile gives a single real eigenfunction, so it enters once and
    the kept set has ``n_modes`` minus the number of k = 0 profiles members.
    """
    if n_theta < 3 or n_phi < 3:
        raise ValidationError("grid too small")
    if n_modes < 2:
        raise ValidationError("n_modes must be at least 2")
    budget = n_modes // 2
    found: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    profiles: list[tuple[float, int, int]] = []        # (value, k, column)
    k = 0
    while True:
        if k >= n_phi // 2:
            raise ValidationError(f"{n_modes} modes need more azimuthal resolution than n_phi={n_phi}")
        S, rho = theta_operator(spec, n_theta, k)
        try:
            vals, vecs = scipy.linalg.eigh(S, np.diag(rho))
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
            raise NumericError(f"eigensolver failed for k={k}: {exc}") from exc
        vals = np.maximum(vals, 0.0)
        if len(profiles) >= budget and vals[0] > sorted(profiles)[budget - 1][0]:
            break
        found[k] = (vals, vecs)
        profiles.extend((float(v), k, j) for j, v in enumerate(vals))
        k += 1
    keep = sorted(profiles)[:budget]
    cols: dict[int, list[int]] = {}
    for _, kk, j in keep:
        cols.setdefault(kk, []).append(j)
    blocks: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    for kk, js in cols.items():
        vals, vecs = found[kk]
        js = sorted(js)
        block = (vals[js], np.ascontiguousarray(vecs[:, js]))
        blocks[kk] = block
        if kk:
            blocks[-kk] = block
    entries = sorted((float(v), abs(kk), kk < 0, kk) for kk, (vals, _) in blocks.items() for v in vals)
    return TruncatedPropagator(spec=spec, n_theta=n_theta, n_phi=n_phi, dt=float(dt),
                               eigvals=np.array([e[0] for e in entries]),
                               mode_k=np.array([e[3] for e in entries]), blocks=blocks)
