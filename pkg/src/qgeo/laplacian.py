"""Gaussian kernel, density-normalized graph Laplacian and its spectrum."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .dataset import Dataset
from .errors import AsymmetryError, DegeneracyError, NumericError, ValidationError

# Numerator of the Laplacian prefactor c / epsilon. With the kernel
# exp(-d^2 / (2 eps)) this value makes the operator converge to the
# Laplace-Beltrami operator itself (see tests/test_laplacian.py for the
# sphere spectrum check); pass prefactor=4.0 for the doubled scaling.
DEFAULT_PREFACTOR = 2.0

CLAMP_REL = 1e-10


@dataclass(frozen=True, eq=False)
class KernelGraph:
    T: np.ndarray
    sigma: np.ndarray
    epsilon: float
    lam: float | None = None
    dvec: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.T.shape[0]


def squared_distances(points: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances, exactly symmetric with zero diagonal."""
    x = np.asarray(points, dtype=np.float64)
    sq = np.einsum("ij,ij->i", x, x)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    d2 = 0.5 * (d2 + d2.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return d2


def build_kernel(data: Dataset | np.ndarray, epsilon: float) -> KernelGraph:
    """T_ij = exp(-|v_i - v_j|^2 / (2 epsilon)) and its row sums."""
    if not (np.isfinite(epsilon) and epsilon > 0):
        raise ValidationError(f"epsilon must be positive, got {epsilon!r}")
    pts = data.points if isinstance(data, Dataset) else np.asarray(data, dtype=np.float64)
    T = np.exp(squared_distances(pts) / (-2.0 * epsilon))
    return KernelGraph(T=T, sigma=T.sum(axis=1), epsilon=float(epsilon))


def _normalized_kernel(kg: KernelGraph, lam: float) -> tuple[np.ndarray, np.ndarray]:
    if not (0.0 <= lam <= 1.0):
        raise ValidationError(f"lambda must lie in [0, 1], got {lam!r}")
    s = kg.sigma ** (-lam)
    K = s[:, None] * kg.T * s[None, :]
    dvec = K.sum(axis=1)
    if np.any(dvec <= 0) or not np.all(np.isfinite(dvec)):
        raise DegeneracyError("degree vector has a zero or non-finite entry")
    return K, dvec


def build_laplacian(kg: KernelGraph, lam: float = 1.0,
                    prefactor: float = DEFAULT_PREFACTOR) -> tuple[np.ndarray, KernelGraph]:
    """L = (prefactor / eps) (I - D^{-1} K) with K = Sigma^{-lam} T Sigma^{-lam}.

    Returns the dense Laplacian and the kernel graph completed with the
    degree vector D.
    """
    K, dvec = _normalized_kernel(kg, lam)
    c = prefactor / kg.epsilon
    L = (-c / dvec)[:, None] * K
    L[np.diag_indices_from(L)] += c
    done = KernelGraph(T=kg.T, sigma=kg.sigma, epsilon=kg.epsilon, lam=float(lam), dvec=dvec)
    return L, done


def symmetric_laplacian(kg: KernelGraph, lam: float = 1.0,
                        prefactor: float = DEFAULT_PREFACTOR) -> tuple[np.ndarray, np.ndarray]:
    """S = D^{1/2} L D^{-1/2}, built directly in symmetric form.

    Returns (S, D). Building S from K avoids the round-off asymmetry of
    similarity-transforming L.
    """
    K, dvec = _normalized_kernel(kg, lam)
    r = 1.0 / np.sqrt(dvec)
    c = prefactor / kg.epsilon
    S = (-c * r)[:, None] * K * r[None, :]
    S[np.diag_indices_from(S)] += c
    S = 0.5 * (S + S.T)
    return S, dvec


@dataclass(frozen=True, eq=False)
class SpectralLaplacian:
    """Eigenpairs of the symmetrized Laplacian plus the similarity scaling.

    ``eigvecs`` may hold fewer than N columns when a spectral cutoff was used.
    """

    eigvals: np.ndarray
    eigvecs: np.ndarray
    dvec_sqrt: np.ndarray
    epsilon: float
    lam: float

    @property
    def n(self) -> int:
        return self.eigvecs.shape[0]

    @property
    def n_modes(self) -> int:
        return self.eigvals.shape[0]

    def truncated(self, k: int) -> "SpectralLaplacian":
        """The lowest ``k`` eigenpairs only."""
        if k < 1:
            raise ValidationError("k must be >= 1")
        return SpectralLaplacian(eigvals=self.eigvals[:k], eigvecs=np.ascontiguousarray(self.eigvecs[:, :k]),
                                 dvec_sqrt=self.dvec_sqrt, epsilon=self.epsilon, lam=self.lam)

    def reconstruct(self) -> np.ndarray:
        """D^{-1/2} E diag(eigvals) E^T D^{1/2}."""
        E = self.eigvecs
        core = (E * self.eigvals) @ E.T
        return core / self.dvec_sqrt[:, None] * self.dvec_sqrt[None, :]

    def apply(self, f, x: np.ndarray) -> np.ndarray:
        """f(L) x through the eigenbasis; ``f`` maps eigenvalues to scalars."""
        E = self.eigvecs
        y = E.T @ (self.dvec_sqrt[:, None] * np.asarray(x).reshape(self.n, -1))
        y = f(self.eigvals)[:, None] * y
        out = (E @ y) / self.dvec_sqrt[:, None]
        return out.reshape(np.shape(x))


def decompose(S_or_L: np.ndarray, dvec: np.ndarray, epsilon: float, lam: float,
              cutoff: int | None = None, symmetric: bool = False) -> SpectralLaplacian:
    """Eigendecomposition of the Laplacian via its symmetric similarity form.

    Pass ``symmetric=True`` when the matrix already is S; otherwise L is
    transformed as D^{1/2} L D^{-1/2}. Eigenvalues in (-1e-10 lam_max, 0) are
    clamped to zero; anything more negative raises :class:`AsymmetryError`.
    """
    dvec = np.asarray(dvec, dtype=np.float64)
    dsq = np.sqrt(dvec)
    if symmetric:
        S = np.asarray(S_or_L, dtype=np.float64)
    else:
        S = dsq[:, None] * np.asarray(S_or_L, dtype=np.float64) / dsq[None, :]
        S = 0.5 * (S + S.T)
    n = S.shape[0]
    if cutoff is not None and not (1 <= cutoff):
        raise ValidationError("cutoff must be a positive integer")
    k = n if cutoff is None else min(int(cutoff), n)
    try:
        if k < n:
            vals, vecs = scipy.linalg.eigh(S, subset_by_index=[0, k - 1], driver="evr")
            lam_max = float(scipy.linalg.eigh(S, eigvals_only=True, subset_by_index=[n - 1, n - 1])[0])
        else:
            vals, vecs = scipy.linalg.eigh(S, driver="evd")
            lam_max = float(vals[-1])
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise NumericError(f"eigensolver failed: {exc}") from exc
    tol = CLAMP_REL * max(abs(lam_max), np.finfo(float).tiny)
    if vals[0] < -tol:
        raise AsymmetryError(f"eigenvalue {vals[0]:.3e} below clamp threshold {-tol:.3e}")
    vals = np.where(vals < 0, 0.0, vals)
    return SpectralLaplacian(eigvals=vals, eigvecs=np.ascontiguousarray(vecs), dvec_sqrt=dsq,
                             epsilon=float(epsilon), lam=float(lam))


def spectral_laplacian(data: Dataset | np.ndarray, epsilon: float, lam: float = 1.0,
                       cutoff: int | None = None,
                       prefactor: float = DEFAULT_PREFACTOR) -> SpectralLaplacian:
    """Kernel, Laplacian and decomposition in one call."""
    kg = build_kernel(data, epsilon)
    S, dvec = symmetric_laplacian(kg, lam, prefactor)
    del kg
    return decompose(S, dvec, epsilon, lam, cutoff=cutoff, symmetric=True)


def quadratic_form(L: np.ndarray, psi: np.ndarray) -> complex:
    """(psi | L | psi) with the plain Euclidean inner product."""
    return complex(np.vdot(psi, L @ psi))
