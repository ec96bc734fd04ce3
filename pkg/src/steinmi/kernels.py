r"""RBF kernel, its analytic gradient and Gram matrix assembly.

The kernel is

.. math::

    k(x, y) = \exp\left(-\frac{\lVert x - y \rVert^2}{2 \sigma^2}\right)

with bandwidth :math:`\sigma`. Besides pointwise ``eval``/``grad_x`` the
kernel exposes batched contractions used by the score estimator, so that
nothing of size ``n * m * d`` is ever materialised when it can be avoided.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist, squareform

from .errors import InsufficientSamplesError, InvalidArgumentError


def as_point(x) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if arr.ndim != 1:
        raise InvalidArgumentError(f"expected a point, got shape {arr.shape}")
    return arr


def as_samples(X, name="X") -> np.ndarray:
    """Coerce to a float64 ``(n, d)`` sample matrix; 1-D input is one column."""
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise InvalidArgumentError(f"{name} must be 2-D, got shape {arr.shape}")
    return arr


def _check_pair(x, y):
    x, y = as_point(x), as_point(y)
    if x.shape != y.shape:
        raise InvalidArgumentError(
            f"dimension mismatch: {x.shape[0]} vs {y.shape[0]}")
    return x, y


@dataclass(frozen=True)
class RbfKernel:
    """Gaussian RBF kernel with a fixed bandwidth.

    Args:
        bandwidth: Length scale :math:`\\sigma`, in the units of the samples.
    """

    bandwidth: float

    def __post_init__(self):
        bw = float(self.bandwidth)
        if not np.isfinite(bw) or bw <= 0:
            raise InvalidArgumentError(f"bandwidth must be > 0, got {bw}")
        object.__setattr__(self, "bandwidth", bw)

    @property
    def _inv_sq(self):
        return 1.0 / self.bandwidth**2

    def features(self, X: np.ndarray) -> np.ndarray:
        """Coordinates in which the kernel is isotropic (identity here)."""
        return X

    def eval(self, x, y) -> float:
        x, y = _check_pair(x, y)
        diff = x - y
        return float(np.exp(-0.5 * self._inv_sq * np.dot(diff, diff)))

    def grad_x(self, x, y) -> np.ndarray:
        """Gradient of ``k(x, y)`` with respect to ``x``."""
        x, y = _check_pair(x, y)
        diff = x - y
        return -self._inv_sq * diff * np.exp(-0.5 * self._inv_sq * np.dot(diff, diff))

    def matrix(self, A, B=None) -> np.ndarray:
        """Cross kernel matrix ``K[a, b] = k(A[a], B[b])``.

        With ``B`` omitted the symmetric Gram matrix of ``A`` is returned,
        built from ``pdist`` so it is exactly symmetric with unit diagonal.
        """
        A = as_samples(A, "A")
        if B is None:
            sq = squareform(pdist(A, "sqeuclidean"))
        else:
            B = as_samples(B, "B")
            if A.shape[1] != B.shape[1]:
                raise InvalidArgumentError(
                    f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
            sq = cdist(A, B, "sqeuclidean")
        return np.exp(-0.5 * self._inv_sq * sq)

    def grad_contract(self, A, B, W, K=None) -> np.ndarray:
        r"""Weighted sum of kernel gradients.

        Returns ``T[a, j, i] = sum_b d/dA[a, i] k(A[a], B[b]) * W[b, j]``,
        shape ``(n_a, J, d)``.
        """
        A, B = as_samples(A, "A"), as_samples(B, "B")
        W = np.asarray(W, dtype=np.float64)
        if K is None:
            K = self.matrix(A, B)
        KW = K @ W
        n_b, J = W.shape
        d = B.shape[1]
        KWB = (K @ (W[:, :, None] * B[:, None, :]).reshape(n_b, J * d)).reshape(-1, J, d)
        return -self._inv_sq * (A[:, None, :] * KW[:, :, None] - KWB)

    def grad_contract_sum(self, A, B, W, K=None) -> np.ndarray:
        """``grad_contract(A, B, W).sum(axis=0)`` without the big intermediate."""
        A, B = as_samples(A, "A"), as_samples(B, "B")
        W = np.asarray(W, dtype=np.float64)
        if K is None:
            K = self.matrix(A, B)
        # sum_a A[a,i] (K W)[a,j]  -  sum_b (1^T K)[b] W[b,j] B[b,i]
        first = (K @ W).T @ A
        colsum = K.sum(axis=0)
        second = (W * colsum[:, None]).T @ B
        return -self._inv_sq * (first - second)


def gram(kernel, X) -> np.ndarray:
    """Symmetric Gram matrix of ``kernel`` over the rows of ``X``."""
    X = as_samples(X)
    if X.shape[0] < 2:
        raise InsufficientSamplesError(
            f"need at least 2 samples for a Gram matrix, got {X.shape[0]}")
    return kernel.matrix(X)


def median_heuristic(X) -> float:
    """Median pairwise Euclidean distance between the rows of ``X``.

    Falls back to 1.0 when the median is zero, so that batches of
    coincident points still yield a usable bandwidth.
    """
    X = as_samples(X)
    if X.shape[0] < 2:
        raise InsufficientSamplesError(
            f"need at least 2 samples for the median heuristic, got {X.shape[0]}")
    med = float(np.median(pdist(X, "euclidean")))
    if not med > 0:
        return 1.0
    return med
