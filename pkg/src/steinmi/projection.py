r"""Random projection and the projected-kernel score estimator.

A projector holds a ``k x d`` Gaussian matrix ``R`` whose rows are
rescaled to unit length, so each row is a uniformly random direction in
``R^d``. Pairwise distances then satisfy, approximately,

.. math::

    \lVert x_1 - x_2 \rVert \approx \sqrt{d/k}\, \lVert R x_1 - R x_2 \rVert .

:class:`ProjectedRbfKernel` evaluates an RBF kernel on the scaled projections
``sqrt(d/k) R x`` but differentiates with respect to the original ``x``, so an
estimator fitted with it returns scores in the original ``d``-dimensional
coordinates (gradients flow back through ``R^T``).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientSamplesError, InvalidArgumentError
from .kernels import RbfKernel, _check_pair, as_samples, median_heuristic
from .ssge import FittedScoreEstimator, SsgeConfig, fit_with_kernel


@dataclass(frozen=True, eq=False)
class RandomProjector:
    matrix: np.ndarray
    seed: int

    @property
    def source_dim(self) -> int:
        return self.matrix.shape[1]

    @property
    def target_dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def scale(self) -> float:
        """Distance rescaling factor ``sqrt(d / k)``."""
        return float(np.sqrt(self.source_dim / self.target_dim))


def make_projector(d: int, k: int, seed: int) -> RandomProjector:
    """Draw a ``k x d`` projector with unit-norm rows from ``seed``.

    Normalizing rows (not columns) is what makes ``sqrt(d/k)`` the right
    distance rescaling: with unit columns ``||R x||`` already tracks ``||x||``.
    """
    d, k = int(d), int(k)
    if d < 1 or k < 1:
        raise InvalidArgumentError(f"dimensions must be positive, got d={d}, k={k}")
    if k > d:
        raise InvalidArgumentError(f"target dim k={k} exceeds source dim d={d}")
    rng = np.random.default_rng(seed)
    R = rng.standard_normal((k, d))
    R /= np.linalg.norm(R, axis=1, keepdims=True)
    R.setflags(write=False)
    return RandomProjector(matrix=R, seed=int(seed))


def project(p: RandomProjector, X) -> np.ndarray:
    X = as_samples(X)
    if X.shape[1] != p.source_dim:
        raise InvalidArgumentError(
            f"sample dimension {X.shape[1]} != projector source dim {p.source_dim}")
    return X @ p.matrix.T


@dataclass(frozen=True, eq=False)
class ProjectedRbfKernel:
    """RBF kernel on ``sqrt(d/k) R x`` with gradients in ``x`` coordinates."""

    projector: RandomProjector
    bandwidth: float

    def __post_init__(self):
        # validates the bandwidth
        object.__setattr__(self, "_base", RbfKernel(self.bandwidth))

    @property
    def _lift(self):
        # d(features)/dx, shape (k, d)
        return self.projector.scale * self.projector.matrix

    def features(self, X) -> np.ndarray:
        return self.projector.scale * project(self.projector, X)

    def eval(self, x, y) -> float:
        x, y = _check_pair(x, y)
        f = self.features(np.stack([x, y]))
        return self._base.eval(f[0], f[1])

    def grad_x(self, x, y) -> np.ndarray:
        x, y = _check_pair(x, y)
        f = self.features(np.stack([x, y]))
        return self._base.grad_x(f[0], f[1]) @ self._lift

    def matrix(self, A, B=None) -> np.ndarray:
        FA = self.features(A)
        return self._base.matrix(FA, None if B is None else self.features(B))

    def grad_contract(self, A, B, W, K=None) -> np.ndarray:
        T = self._base.grad_contract(self.features(A), self.features(B), W, K=K)
        return T @ self._lift

    def grad_contract_sum(self, A, B, W, K=None) -> np.ndarray:
        S = self._base.grad_contract_sum(self.features(A), self.features(B), W, K=K)
        return S @ self._lift


def projected_kernel(p: RandomProjector, bandwidth: float) -> ProjectedRbfKernel:
    return ProjectedRbfKernel(p, bandwidth)


def fit_scalable(X, config: SsgeConfig, p: RandomProjector) -> FittedScoreEstimator:
    """Score estimator whose kernel works on random projections of ``X``.

    The median heuristic, when used, is taken over the scaled projected
    distances. Scores are returned in the original coordinates.
    """
    X = as_samples(X)
    if X.shape[1] != p.source_dim:
        raise InvalidArgumentError(
            f"sample dimension {X.shape[1]} != projector source dim {p.source_dim}")
    if X.shape[0] < 2:
        raise InsufficientSamplesError(f"need at least 2 samples, got {X.shape[0]}")
    bw = config.bandwidth
    if bw is None:
        bw = median_heuristic(p.scale * project(p, X))
    return fit_with_kernel(X, ProjectedRbfKernel(p, bw), config)
