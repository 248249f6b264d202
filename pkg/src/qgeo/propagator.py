"""Half-wave propagator exp(-i t sqrt(L)) applied through the eigenbasis.

The sign is chosen so that a coherent state with phase exp(+i x.p / h)
travels along +p.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import semiclassical_h
from .errors import ValidationError
from .laplacian import SpectralLaplacian


@dataclass(frozen=True, eq=False)
class Propagator:
    spec: SpectralLaplacian
    h: float
    dt: float
    phase_table: np.ndarray

    @property
    def n(self) -> int:
        return self.spec.n

    def phases(self, steps: int) -> np.ndarray:
        """Per-mode phase after ``steps`` steps, computed directly from the time."""
        return np.exp(-1j * (steps * self.dt) * np.sqrt(self.spec.eigvals))


def make_propagator(spec: SpectralLaplacian, epsilon: float, alpha: float, dt: float) -> Propagator:
    if not (np.isfinite(dt) and dt >= 0):
        raise ValidationError(f"dt must be non-negative, got {dt!r}")
    h = semiclassical_h(epsilon, alpha)
    table = np.exp(-1j * dt * np.sqrt(spec.eigvals))
    table.setflags(write=False)
    return Propagator(spec=spec, h=h, dt=float(dt), phase_table=table)


def to_modes(p: Propagator, states: np.ndarray) -> np.ndarray:
    """Mode coefficients E^T D^{1/2} psi for one state (N,) or a batch (N, m)."""
    states = np.asarray(states)
    if states.shape[0] != p.n:
        raise ValidationError(f"state length {states.shape[0]} != {p.n}")
    scaled = p.spec.dvec_sqrt.reshape((-1,) + (1,) * (states.ndim - 1)) * states
    return _real_matmul(p.spec.eigvecs.T, scaled)


def from_modes(p: Propagator, coeffs: np.ndarray) -> np.ndarray:
    out = _real_matmul(p.spec.eigvecs, coeffs)
    return out / p.spec.dvec_sqrt.reshape((-1,) + (1,) * (out.ndim - 1))


def propagate(p: Propagator, state: np.ndarray, steps: int = 1) -> np.ndarray:
    """D^{-1/2} E diag(phase^steps) E^T D^{1/2} state.

    ``state`` may be a single N-vector or an (N, m) batch of columns.
    """
    state = np.asarray(state)
    if state.ndim not in (1, 2) or state.shape[0] != p.n:
        raise ValidationError(f"state shape {state.shape} incompatible with N={p.n}")
    if not np.all(np.isfinite(state)):
        raise ValidationError("state has non-finite entries")
    if isinstance(steps, bool) or int(steps) != steps or steps < 0:
        raise ValidationError(f"steps must be a non-negative integer, got {steps!r}")
    c = to_modes(p, state.astype(np.complex128, copy=False))
    ph = p.phases(int(steps))
    c = c * (ph if c.ndim == 1 else ph[:, None])
    return from_modes(p, c)


def propagate_series(p: Propagator, states: np.ndarray, n_steps: int) -> np.ndarray:
    """States after 1..n_steps steps, shape (n_steps, N[, m]).

    The mode coefficients are computed once and reused for every time.
    """
    states = np.asarray(states, dtype=np.complex128)
    c0 = to_modes(p, states)
    out = np.empty((n_steps,) + states.shape, dtype=np.complex128)
    for s in range(1, n_steps + 1):
        ph = p.phases(s)
        out[s - 1] = from_modes(p, c0 * (ph if c0.ndim == 1 else ph[:, None]))
    return out


def weighted_norm(p: Propagator, state: np.ndarray) -> float:
    """|D^{1/2} psi|_2, the norm conserved by propagation."""
    return float(np.linalg.norm(p.spec.dvec_sqrt * state))


def _real_matmul(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """A @ B for real A and possibly complex B, without promoting A to complex."""
    if not np.iscomplexobj(B):
        return A @ B
    B = np.ascontiguousarray(B)
    if B.ndim == 1:
        flat = B.view(np.float64).reshape(-1, 2)
        return (A @ flat).view(np.complex128).reshape(-1)
    m = B.shape[1]
    flat = B.view(np.float64).reshape(B.shape[0], 2 * m)
    return np.ascontiguousarray(A @ flat).view(np.complex128).reshape(A.shape[0], m)
