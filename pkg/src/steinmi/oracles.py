"""Closed-form ground truths used to validate the estimators."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .kernels import as_point


@dataclass(frozen=True)
class ToyProblem:
    """Pair of ``d``-dim standard Gaussians with componentwise correlation ``rho``."""

    d: int
    rho: float

    def __post_init__(self):
        if int(self.d) < 1:
            raise InvalidArgumentError(f"d must be >= 1, got {self.d}")
        if not abs(self.rho) < 1.0:
            raise InvalidArgumentError(f"|rho| must be < 1, got {self.rho}")


def sample_toy(p: ToyProblem, n: int, seed) -> tuple[np.ndarray, np.ndarray]:
    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p.d))
    eps = rng.standard_normal((n, p.d))
    Y = p.rho * X + np.sqrt(1.0 - p.rho**2) * eps
    return X, Y


def analytic_mi_grad(p: ToyProblem) -> float:
    """d I(x; y) / d rho = rho d / (1 - rho^2)."""
    return p.rho * p.d / (1.0 - p.rho**2)


def analytic_mi(p: ToyProblem) -> float:
    return -0.5 * p.d * np.log1p(-p.rho**2)


def gaussian_score(x, mean, cov_diag) -> np.ndarray:
    x, mean, cov_diag = as_point(x), as_point(mean), as_point(cov_diag)
    if np.any(cov_diag <= 0):
        raise InvalidArgumentError("variances must be positive")
    return -(x - mean) / cov_diag


def gaussian_entropy(cov) -> float:
    """Differential entropy (nats) of a Gaussian with covariance ``cov``."""
    cov = np.atleast_2d(np.asarray(cov, dtype=np.float64))
    _, logdet = np.linalg.slogdet(cov)
    return 0.5 * (cov.shape[0] * np.log(2 * np.pi * np.e) + logdet)


def _check_var(noise_var):
    if not noise_var > 0:
        raise InvalidArgumentError(f"noise variance must be > 0, got {noise_var}")


def linear_gaussian_mi(W, noise_var, input_cov=None) -> float:
    """I(x; z) for ``z = W x + eta``, ``x ~ N(0, input_cov)``, ``eta ~ N(0, noise_var I)``.

    Equals ``0.5 log det(I + W C W^T / noise_var)`` with ``C = input_cov``
    (identity when omitted).
    """
    _check_var(noise_var)
    W = np.atleast_2d(np.asarray(W, dtype=np.float64))
    C = np.eye(W.shape[1]) if input_cov is None else np.atleast_2d(input_cov)
    _, logdet = np.linalg.slogdet(np.eye(W.shape[0]) + W @ C @ W.T / noise_var)
    return 0.5 * logdet


def linear_gaussian_mi_grad(W, noise_var, input_cov=None) -> np.ndarray:
    """Closed-form ``dI/dW = (noise_var I + W C W^T)^{-1} W C``, shaped like ``W``."""
    _check_var(noise_var)
    W = np.atleast_2d(np.asarray(W, dtype=np.float64))
    C = np.eye(W.shape[1]) if input_cov is None else np.atleast_2d(input_cov)
    A = noise_var * np.eye(W.shape[0]) + W @ C @ W.T
    return np.linalg.solve(A, W @ C)


def linear_gaussian_chain_mi(A, B, var_h, var_z) -> float:
    """I(h; z) for ``h = A x + eta_h``, ``z = B h + eta_z`` with ``x ~ N(0, I)``."""
    _check_var(var_h)
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    cov_h = A @ A.T + var_h * np.eye(A.shape[0])
    return linear_gaussian_mi(B, var_z, cov_h)


def finite_diff(f, theta, step=1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function of a parameter vector."""
    theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
    grad = np.zeros_like(theta)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = step
        grad[i] = (f(theta + e) - f(theta - e)) / (2 * step)
    return grad
