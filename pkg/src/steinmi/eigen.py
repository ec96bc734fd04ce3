"""Dense symmetric eigendecomposition and spectral-mass truncation.

Two solvers sit behind :func:`sym_eig`: LAPACK's tridiagonal reduction
(``numpy.linalg.eigh``), used by default, and a cyclic Jacobi iteration
written in NumPy. The Jacobi route is O(n^3) per sweep in Python-level
loops and is meant for small matrices and as an independent cross-check.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DegenerateSpectrumError, InvalidArgumentError

SYMMETRY_TOL = 1e-8
JACOBI_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class EigenDecomposition:
    """Eigenpairs sorted by non-increasing eigenvalue.

    Column ``j`` of ``eigenvectors`` pairs with ``eigenvalues[j]``. Each
    column is signed so that its largest-magnitude entry is positive.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        V = self.eigenvectors
        return (V * self.eigenvalues) @ V.T


def _canonical_signs(V):
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def _jacobi(A, max_sweeps=None):
    A = A.copy()
    n = A.shape[0]
    V = np.eye(n)
    target = JACOBI_TOL * np.linalg.norm(A)
    max_sweeps = 100 * n if max_sweeps is None else max_sweeps

    def off_norm(M):
        return np.sqrt(max(np.sum(M * M) - np.sum(np.diag(M) ** 2), 0.0))

    off = off_norm(A)
    sweeps = 0
    while off > target:
        if sweeps >= max_sweeps:
            raise ConvergenceError(
                f"Jacobi did not converge in {max_sweeps} sweeps", off)
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = np.copysign(1.0, theta) / (abs(theta) + np.sqrt(1.0 + theta * theta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                ap, aq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                ap, aq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * ap - s * aq
                A[q, :] = s * ap + c * aq
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
        sweeps += 1
        off = off_norm(A)
    return np.diag(A).copy(), V


def sym_eig(G, method="lapack", max_sweeps=None) -> EigenDecomposition:
    """Full eigendecomposition of a symmetric matrix.

    Args:
        G: Square matrix, symmetric to within ``1e-8`` (relative to its
            largest entry). It is symmetrised as ``(G + G.T) / 2`` first.
        method: ``"lapack"`` or ``"jacobi"``.
        max_sweeps: Jacobi sweep cap; defaults to ``100 * n``.

    Raises:
        InvalidArgumentError: non-square, non-finite or asymmetric input.
        ConvergenceError: Jacobi hit its sweep cap.
    """
    G = np.asarray(G, dtype=np.float64)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise InvalidArgumentError(f"expected a square matrix, got {G.shape}")
    if not np.all(np.isfinite(G)):
        raise InvalidArgumentError("matrix has non-finite entries")
    scale = max(np.max(np.abs(G)), 1.0) if G.size else 1.0
    if G.size and np.max(np.abs(G - G.T)) > SYMMETRY_TOL * scale:
        raise InvalidArgumentError("matrix is not symmetric")
    G = 0.5 * (G + G.T)

    if method == "lapack":
        w, V = np.linalg.eigh(G)
    elif method == "jacobi":
        w, V = _jacobi(G, max_sweeps)
    else:
        raise InvalidArgumentError(f"unknown method {method!r}")

    order = np.argsort(w, kind="stable")[::-1]
    return EigenDecomposition(w[order], _canonical_signs(V[:, order]))


def select_top_j(eigenvalues, mass_threshold) -> int:
    """Smallest ``J`` whose leading eigenvalues hold ``mass_threshold`` of the mass.

    Negative eigenvalues are clipped to zero before computing mass, so with
    ``mass_threshold == 1`` the result is the number of positive eigenvalues.
    """
    lam = np.asarray(eigenvalues, dtype=np.float64)
    if lam.ndim != 1 or lam.size == 0:
        raise InvalidArgumentError("eigenvalues must be a non-empty vector")
    if np.any(np.diff(lam) > 0):
        raise InvalidArgumentError("eigenvalues must be sorted non-increasing")
    if not 0.0 < mass_threshold <= 1.0:
        raise InvalidArgumentError(
            f"mass_threshold must lie in (0, 1], got {mass_threshold}")
    cum = np.cumsum(np.clip(lam, 0.0, None))
    total = cum[-1]
    if not total > 0:
        raise DegenerateSpectrumError("no positive eigenvalue")
    j = int(np.searchsorted(cum, mass_threshold * total, side="left")) + 1
    return min(j, int(np.count_nonzero(lam > 0)))
