"""Dense matrix kernels shared by the Gramian, bound and closed-form code.

Everything here works on small dense ``numpy`` arrays (n <= ~100).  The
vec operator stacks columns, so ``vec(A @ X @ B.T) == kron(B, A) @ vec(X)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = [
    "SymEigResult",
    "mat_exp",
    "sym_eig",
    "symmetrize",
    "kron",
    "kron_sum",
    "vec",
    "unvec",
    "rank_with_tolerance",
    "psd_leq",
    "DEFAULT_RANK_TOL",
]

DEFAULT_RANK_TOL = 1e-8
_SYM_TOL = 1e-8


def _as_matrix(M, name="M", square=False):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] < 1 or M.shape[1] < 1:
        raise ValueError(f"{name} must be a non-empty 2-D matrix, got shape {M.shape}")
    if square and M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} has non-finite entries")
    return M


def mat_exp(M):
    """Matrix exponential ``e^M``.

    Scaling and squaring with a degree-13 Padé core (``scipy.linalg.expm``).

    Parameters
    ----------
    M : (n, n) array_like
        Square matrix with finite entries.

    Returns
    -------
    (n, n) ndarray
    """
    M = _as_matrix(M, square=True)
    return scipy.linalg.expm(M)


def symmetrize(S):
    S = np.asarray(S, dtype=float)
    return 0.5 * (S + S.T)


@dataclass(frozen=True)
class SymEigResult:
    """Eigenvalues in ascending order and orthonormal eigenvectors (columns)."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def lambda_min(self):
        return float(self.eigenvalues[0])

    @property
    def lambda_max(self):
        return float(self.eigenvalues[-1])


def _check_symmetric(S, name="S"):
    scale = max(1.0, float(np.linalg.norm(S)))
    asym = float(np.linalg.norm(S - S.T))
    if asym > _SYM_TOL * scale:
        raise ValueError(f"{name} is not symmetric (||S - S^T|| = {asym:.3g})")


def sym_eig(S):
    """Eigendecomposition of a symmetric matrix.

    The input is symmetrized as ``(S + S.T) / 2`` before factorization so
    that quadrature round-off cannot produce complex eigenvalues.

    Raises
    ------
    ValueError
        If ``S`` is not square, has non-finite entries, or is visibly
        asymmetric (``||S - S^T|| > 1e-8 max(1, ||S||)``).
    """
    S = _as_matrix(S, "S", square=True)
    _check_symmetric(S)
    w, V = np.linalg.eigh(symmetrize(S))
    return SymEigResult(eigenvalues=w, eigenvectors=V)


def kron(A, B):
    return np.kron(np.asarray(A, dtype=float), np.asarray(B, dtype=float))


def kron_sum(A, B):
    """Kronecker sum ``A ⊗ I + I ⊗ B`` of two square matrices."""
    A = _as_matrix(A, "A", square=True)
    B = _as_matrix(B, "B", square=True)
    return np.kron(A, np.eye(B.shape[0])) + np.kron(np.eye(A.shape[0]), B)


def vec(M):
    """Stack the columns of ``M`` into a 1-D vector."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise ValueError(f"vec expects a 2-D matrix, got shape {M.shape}")
    return M.reshape(-1, order="F")


def unvec(v, n):
    """Inverse of :func:`vec` for an ``n x n`` matrix."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.shape[0] != n * n:
        raise ValueError(f"unvec needs a vector of length {n * n}, got shape {v.shape}")
    return v.reshape((n, n), order="F")


def rank_with_tolerance(S, tol=DEFAULT_RANK_TOL):
    """Numerical rank of a symmetric PSD matrix.

    Counts eigenvalues ``λ_i > tol * max(1, λ_max)``.
    """
    eig = sym_eig(S)
    floor = tol * max(1.0, eig.lambda_max)
    return int(np.count_nonzero(eig.eigenvalues > floor))


def psd_leq(A, B, rtol=1e-10):
    """True when ``A ≼ B`` in the PSD order, up to ``rtol * max(1, ||B||)``."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    scale = max(1.0, float(np.linalg.norm(B, 2)))
    gap = np.linalg.eigvalsh(symmetrize(B - A))[0]
    return bool(gap >= -rtol * scale)
