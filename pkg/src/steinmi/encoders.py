"""Differentiable encoders with parameter-Jacobian-transpose products.

Every encoder works on batches: ``X`` has shape ``(n, input_dim)``, noise
``eps`` (stochastic encoders only) has shape ``(n, noise_dim)`` and a
cotangent ``V`` has shape ``(n, output_dim)``. ``pjvp`` returns the
batch sum ``sum_r (dE(X[r], eps[r]) / dpsi)^T V[r]`` as a vector of length
``param_count``; pass a single row to get a per-sample product.
"""
from __future__ import annotations

from abc import ABC, abstractmethod

import numpy as np

from .errors import InvalidArgumentError
from .kernels import as_samples


class Encoder(ABC):
    input_dim: int
    output_dim: int
    noise_dim: int = 0

    @property
    @abstractmethod
    def params(self) -> np.ndarray:
        """Flat copy of the trainable parameters."""

    @property
    def param_count(self) -> int:
        return self.params.size

    @property
    def stochastic(self) -> bool:
        return self.noise_dim > 0

    @property
    def has_conditional_score(self) -> bool:
        return False

    @abstractmethod
    def with_params(self, theta) -> "Encoder":
        """Copy of this encoder with parameters replaced by ``theta``."""

    @abstractmethod
    def forward(self, X, eps=None) -> np.ndarray:
        ...

    @abstractmethod
    def pjvp(self, X, V, eps=None) -> np.ndarray:
        ...

    @abstractmethod
    def input_vjp(self, X, V, eps=None) -> np.ndarray:
        """``(dE/dx)^T V`` row by row, shape ``(n, input_dim)``."""

    def conditional_score(self, Z, X) -> np.ndarray:
        """Analytic ``grad_z log q(z | x)`` when the encoder knows it."""
        raise NotImplementedError(f"{type(self).__name__} has no analytic conditional score")

    def sample_noise(self, n, rng) -> np.ndarray | None:
        if not self.stochastic:
            return None
        return rng.standard_normal((n, self.noise_dim))

    def _inputs(self, X, eps=None, V=None):
        X = as_samples(X)
        if X.shape[1] != self.input_dim:
            raise InvalidArgumentError(
                f"input dim {X.shape[1]} != encoder input dim {self.input_dim}")
        if self.stochastic:
            if eps is None:
                raise InvalidArgumentError("stochastic encoder needs noise eps")
            eps = as_samples(eps, "eps")
            if eps.shape != (X.shape[0], self.noise_dim):
                raise InvalidArgumentError(f"noise shape {eps.shape} mismatches batch")
        if V is not None:
            V = as_samples(V, "V")
            if V.shape != (X.shape[0], self.output_dim):
                raise InvalidArgumentError(f"cotangent shape {V.shape} mismatches output")
        return X, eps, V


class IdentityEncoder(Encoder):
    """``z = x`` with no trainable parameters."""

    def __init__(self, dim):
        self.input_dim = self.output_dim = int(dim)

    @property
    def params(self):
        return np.zeros(0)

    def with_params(self, theta):
        if np.size(theta) != 0:
            raise InvalidArgumentError("IdentityEncoder has no parameters")
        return self

    def forward(self, X, eps=None):
        X, _, _ = self._inputs(X)
        return X.copy()

    def pjvp(self, X, V, eps=None):
        self._inputs(X, V=V)
        return np.zeros(0)

    def input_vjp(self, X, V, eps=None):
        _, _, V = self._inputs(X, V=V)
        return V.copy()


class LinearEncoder(Encoder):
    """``z = W x``, optionally plus isotropic Gaussian noise ``noise_std * eps``.

    With ``noise_std > 0`` the encoder is stochastic and
    ``q(z | x) = N(W x, noise_std^2 I)`` is available in closed form.
    """

    def __init__(self, W, noise_std=0.0):
        W = np.atleast_2d(np.asarray(W, dtype=np.float64))
        self.W = W.copy()
        self.output_dim, self.input_dim = W.shape
        self.noise_std = float(noise_std)
        if self.noise_std < 0:
            raise InvalidArgumentError("noise_std must be >= 0")
        self.noise_dim = self.output_dim if self.noise_std > 0 else 0

    @property
    def params(self):
        return self.W.ravel().copy()

    def with_params(self, theta):
        return LinearEncoder(np.reshape(theta, self.W.shape), self.noise_std)

    @property
    def has_conditional_score(self):
        return self.stochastic

    def forward(self, X, eps=None):
        X, eps, _ = self._inputs(X, eps)
        Z = X @ self.W.T
        if self.stochastic:
            Z = Z + self.noise_std * eps
        return Z

    def pjvp(self, X, V, eps=None):
        X, _, V = self._inputs(X, eps, V)
        return (V.T @ X).ravel()

    def input_vjp(self, X, V, eps=None):
        _, _, V = self._inputs(X, eps, V)
        return V @ self.W

    def conditional_score(self, Z, X):
        if not self.stochastic:
            return super().conditional_score(Z, X)
        return -(as_samples(Z, "Z") - as_samples(X) @ self.W.T) / self.noise_std**2


class TanhMlpEncoder(Encoder):
    """``z = W2 tanh(W1 x + b1) + b2``; parameters flattened in that order."""

    def __init__(self, W1, b1, W2, b2):
        self.W1 = np.atleast_2d(np.asarray(W1, dtype=np.float64)).copy()
        self.b1 = np.asarray(b1, dtype=np.float64).ravel().copy()
        self.W2 = np.atleast_2d(np.asarray(W2, dtype=np.float64)).copy()
        self.b2 = np.asarray(b2, dtype=np.float64).ravel().copy()
        hidden, self.input_dim = self.W1.shape
        self.output_dim = self.W2.shape[0]
        if self.b1.size != hidden or self.W2.shape[1] != hidden or self.b2.size != self.output_dim:
            raise InvalidArgumentError("inconsistent MLP parameter shapes")

    @classmethod
    def random(cls, input_dim, hidden, output_dim, rng, scale=0.5):
        return cls(
            scale * rng.standard_normal((hidden, input_dim)),
            scale * rng.standard_normal(hidden),
            scale * rng.standard_normal((output_dim, hidden)),
            scale * rng.standard_normal(output_dim),
        )

    @property
    def params(self):
        return np.concatenate([self.W1.ravel(), self.b1, self.W2.ravel(), self.b2])

    def with_params(self, theta):
        theta = np.asarray(theta, dtype=np.float64)
        sizes = np.cumsum([self.W1.size, self.b1.size, self.W2.size])
        W1, b1, W2, b2 = np.split(theta, sizes)
        return TanhMlpEncoder(W1.reshape(self.W1.shape), b1, W2.reshape(self.W2.shape), b2)

    def _hidden(self, X):
        return np.tanh(X @ self.W1.T + self.b1)

    def forward(self, X, eps=None):
        X, _, _ = self._inputs(X)
        return self._hidden(X) @ self.W2.T + self.b2

    def pjvp(self, X, V, eps=None):
        X, _, V = self._inputs(X, V=V)
        H = self._hidden(X)
        dpre = (V @ self.W2) * (1.0 - H * H)
        return np.concatenate([
            (dpre.T @ X).ravel(), dpre.sum(axis=0), (V.T @ H).ravel(), V.sum(axis=0)])

    def input_vjp(self, X, V, eps=None):
        X, _, V = self._inputs(X, V=V)
        H = self._hidden(X)
        return ((V @ self.W2) * (1.0 - H * H)) @ self.W1


class GaussianChannelEncoder(Encoder):
    """Elementwise ``z = rho x + sqrt(1 - rho^2) eps``; the single parameter is ``rho``.

    For standard-normal ``x`` this reproduces a pair of ``dim``-dimensional
    Gaussians with componentwise correlation ``rho``.
    """

    def __init__(self, rho, dim=1):
        rho = float(rho)
        if not abs(rho) < 1.0:
            raise InvalidArgumentError(f"|rho| must be < 1, got {rho}")
        self.rho = rho
        self.input_dim = self.output_dim = self.noise_dim = int(dim)

    @property
    def params(self):
        return np.array([self.rho])

    def with_params(self, theta):
        return GaussianChannelEncoder(float(np.ravel(theta)[0]), self.input_dim)

    @property
    def has_conditional_score(self):
        return True

    @property
    def _s(self):
        return np.sqrt(1.0 - self.rho**2)

    def forward(self, X, eps=None):
        X, eps, _ = self._inputs(X, eps)
        return self.rho * X + self._s * eps

    def pjvp(self, X, V, eps=None):
        X, eps, V = self._inputs(X, eps, V)
        dz = X - (self.rho / self._s) * eps
        return np.array([np.sum(V * dz)])

    def input_vjp(self, X, V, eps=None):
        _, _, V = self._inputs(X, eps, V)
        return self.rho * V

    def conditional_score(self, Z, X):
        return -(as_samples(Z, "Z") - self.rho * as_samples(X)) / (1.0 - self.rho**2)
