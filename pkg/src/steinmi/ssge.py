r"""Spectral Stein gradient estimator.

Given samples :math:`x^1, \dots, x^M` from an implicit density :math:`q`,
the score :math:`\nabla_x \log q(x)` is expanded in the leading
eigenfunctions of the kernel integral operator. With Gram eigenpairs
:math:`(\lambda_j, u_j)` the Nyström eigenfunctions are

.. math::

    \hat\psi_j(x) = \frac{\sqrt{M}}{\lambda_j} \sum_m u_{jm} k(x, x^m),

and the expansion coefficients follow from Stein's identity,

.. math::

    \hat\beta_{ij} = -\frac{1}{M} \sum_m \partial_i \hat\psi_j(x^m),
    \qquad \hat g_i(x) = \sum_j \hat\beta_{ij} \hat\psi_j(x).

Queries far from the base samples are extrapolated through the kernel, so
the estimate decays towards zero there rather than following the true score.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .eigen import select_top_j, sym_eig
from .errors import InsufficientSamplesError, InvalidArgumentError
from .kernels import RbfKernel, as_samples, gram, median_heuristic


@dataclass(frozen=True)
class SsgeConfig:
    """Estimator settings.

    Args:
        bandwidth: Kernel bandwidth; ``None`` selects the median heuristic.
        mass_threshold: Fraction of Gram spectral mass kept when choosing J.
        max_j: Optional hard cap on J.
    """

    bandwidth: Optional[float] = None
    mass_threshold: float = 0.94
    max_j: Optional[int] = None

    def __post_init__(self):
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise InvalidArgumentError(f"bandwidth must be > 0, got {self.bandwidth}")
        if not 0.0 < self.mass_threshold <= 1.0:
            raise InvalidArgumentError(
                f"mass_threshold must lie in (0, 1], got {self.mass_threshold}")
        if self.max_j is not None and self.max_j < 1:
            raise InvalidArgumentError(f"max_j must be >= 1, got {self.max_j}")


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class FittedScoreEstimator:
    """Immutable fitted state; see :func:`fit`.

    ``beta`` is indexed ``[j, i]``: eigenfunction ``j``, coordinate ``i``.
    ``eigen_mass`` is the fraction of the clipped spectrum that was kept.
    """

    base_samples: np.ndarray
    kernel: object
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    beta: np.ndarray
    eigen_mass: float = field(default=1.0)

    @property
    def n_components(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def dim(self) -> int:
        return self.base_samples.shape[1]

    @property
    def bandwidth(self) -> float:
        return self.kernel.bandwidth

    @property
    def _coeffs(self):
        # u_j * sqrt(M) / lambda_j, shape (M, J)
        M = self.base_samples.shape[0]
        return self.eigenvectors * (np.sqrt(M) / self.eigenvalues)

    def _check_query(self, Q):
        Q = as_samples(Q, "Q")
        if Q.shape[1] != self.dim:
            raise InvalidArgumentError(
                f"query dimension {Q.shape[1]} != fitted dimension {self.dim}")
        return Q

    def eigenfunctions(self, Q) -> np.ndarray:
        """Nyström eigenfunction values, shape ``(q, J)``."""
        Q = self._check_query(Q)
        return self.kernel.matrix(Q, self.base_samples) @ self._coeffs

    def eigenfunction_grads(self, Q) -> np.ndarray:
        """Eigenfunction gradients, shape ``(q, J, d)``."""
        Q = self._check_query(Q)
        return self.kernel.grad_contract(Q, self.base_samples, self._coeffs)

    def score(self, Q) -> np.ndarray:
        return self.eigenfunctions(Q) @ self.beta


def fit_with_kernel(X, kernel, config: SsgeConfig = SsgeConfig()) -> FittedScoreEstimator:
    """Fit the estimator on ``X`` using an already-constructed kernel."""
    X = as_samples(X)
    M = X.shape[0]
    if M < 2:
        raise InsufficientSamplesError(f"need at least 2 samples, got {M}")
    if not np.all(np.isfinite(X)):
        raise InvalidArgumentError("samples have non-finite entries")

    K = gram(kernel, X)
    eig = sym_eig(K)
    J = select_top_j(eig.eigenvalues, config.mass_threshold)
    if config.max_j is not None:
        J = min(J, config.max_j)
    lam = eig.eigenvalues[:J]
    U = eig.eigenvectors[:, :J]

    positive = np.clip(eig.eigenvalues, 0.0, None)
    mass = float(positive[:J].sum() / positive.sum())

    coeffs = U * (np.sqrt(M) / lam)
    beta = -kernel.grad_contract_sum(X, X, coeffs, K=K) / M
    return FittedScoreEstimator(
        base_samples=_frozen(X),
        kernel=kernel,
        eigenvalues=_frozen(lam),
        eigenvectors=_frozen(U),
        beta=_frozen(beta),
        eigen_mass=mass,
    )


def fit(X, config: SsgeConfig = SsgeConfig()) -> FittedScoreEstimator:
    """Fit the score estimator on samples ``X`` of shape ``(M, d)``.

    Raises:
        InsufficientSamplesError: fewer than two samples.
        DegenerateSpectrumError: the Gram matrix has no positive eigenvalue.
    """
    X = as_samples(X)
    if X.shape[0] < 2:
        raise InsufficientSamplesError(f"need at least 2 samples, got {X.shape[0]}")
    bw = config.bandwidth if config.bandwidth is not None else median_heuristic(X)
    return fit_with_kernel(X, RbfKernel(bw), config)


def score(est: FittedScoreEstimator, Q) -> np.ndarray:
    """Estimated score at each row of ``Q``; shape ``(q, d)``."""
    return est.score(Q)


def stein_residual(kernel, X, score_values) -> float:
    """Max-norm of the Monte Carlo Stein identity with ``h(x) = k(x, X)``.

    Entry ``(m, i)`` is ``mean_a[k(x^a, x^m) s_i(x^a) + d/dx_i k(x^a, x^m)]``;
    it vanishes in expectation when ``score_values`` is the true score.
    """
    X = as_samples(X)
    S = as_samples(score_values, "score_values")
    M = X.shape[0]
    if M < 2:
        raise InsufficientSamplesError(f"need at least 2 samples, got {M}")
    if S.shape != X.shape:
        raise InvalidArgumentError(
            f"score_values shape {S.shape} != samples shape {X.shape}")
    K = kernel.matrix(X)
    # For a shift-invariant kernel, sum_a grad_1 k(x^a, x^m) = -sum_a grad_1 k(x^m, x^a).
    grad_term = -kernel.grad_contract(X, X, np.ones((M, 1)), K=K)[:, 0, :]
    resid = (K @ S + grad_term) / M
    return float(np.max(np.abs(resid)))
