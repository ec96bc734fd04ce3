r"""Mutual-information gradients assembled from estimated scores.

Every entropy gradient here uses the reparameterisation ``z = E_psi(x, eps)``:

.. math::

    \nabla_\psi H(z) = -\mathbb{E}\big[(\partial_\psi E_\psi)^\top
    \nabla_z \log q(z)\big],

with the score supplied by the spectral Stein estimator (or, for
conditional terms, in closed form when the encoder provides it). MI
gradients are signed sums of such terms:

* deterministic encoder: ``grad I(x; z) = grad H(z) - grad H(x, z)``;
* two-stage ``z = f(C(x))``: ``grad I(h; z) = grad H(h) + grad H(z) - grad H(h, z)``;
* stochastic encoder: ``grad I(x; z) = grad H(z) - grad H(z | x)``.

The data entropy ``H(x)`` does not depend on the parameters and is never
estimated.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .encoders import Encoder
from .errors import InsufficientSamplesError, InvalidArgumentError
from .kernels import as_samples
from .projection import RandomProjector, fit_scalable
from .ssge import SsgeConfig, fit

# relative residual spread below which a joint (x, z) batch counts as singular
SINGULAR_TOL = 1e-8


@dataclass(frozen=True)
class Diagnostics:
    """Fit statistics attached to a gradient estimate.

    ``j_used``/``eigen_mass``/``bandwidth`` describe the score fit of the
    leading entropy term. They are ``0``/``0.0``/``0.0`` when no fit ran
    (zero-parameter encoders), and ``bandwidth`` is NaN for closed-form
    conditional scores.
    """

    j_used: int
    eigen_mass: float
    bandwidth: float
    batch_size: int
    seed: int
    singular_joint: bool = False


@dataclass(frozen=True, eq=False)
class GradientReport:
    gradient: np.ndarray
    diagnostics: Diagnostics
    components: dict = field(default_factory=dict)


def _check_batch(X):
    X = as_samples(X)
    if X.shape[0] < 2:
        raise InsufficientSamplesError(f"need at least 2 samples, got {X.shape[0]}")
    return X


def _fit_scores(S, cfg, projector=None):
    if projector is None:
        est = fit(S, cfg)
    else:
        est = fit_scalable(S, cfg, projector)
    return est.score(S), est


def _skipped(n, seed):
    return GradientReport(np.zeros(0), Diagnostics(0, 0.0, 0.0, n, seed))


def _joint_is_singular(X, Z):
    # z an affine function of x (to round-off) means q(x, z) has no density
    design = np.hstack([X, np.ones((X.shape[0], 1))])
    coef, *_ = np.linalg.lstsq(design, Z, rcond=None)
    resid = Z - design @ coef
    spread = max(float(np.std(Z)), 1e-300)
    return float(np.sqrt(np.mean(resid**2))) <= SINGULAR_TOL * spread


def entropy_grad(enc: Encoder, X, cfg: SsgeConfig = SsgeConfig(), seed=0,
                 eps=None, projector: RandomProjector | None = None) -> GradientReport:
    """Gradient of the marginal entropy ``H(z)`` w.r.t. encoder parameters.

    Stochastic encoders draw one noise vector per row from ``seed`` unless
    ``eps`` is given. With ``projector`` the score is fitted through a
    random projection of ``z``.
    """
    X = _check_batch(X)
    n = X.shape[0]
    if enc.param_count == 0:
        return _skipped(n, seed)
    if eps is None:
        eps = enc.sample_noise(n, np.random.default_rng(seed))
    Z = enc.forward(X, eps)
    G, est = _fit_scores(Z, cfg, projector)
    grad = -enc.pjvp(X, G, eps) / n
    diag = Diagnostics(est.n_components, est.eigen_mass, est.bandwidth, n, seed)
    return GradientReport(grad, diag)


def joint_entropy_grad(enc: Encoder, X, cfg: SsgeConfig = SsgeConfig(), seed=0,
                       eps=None) -> GradientReport:
    """Gradient of the joint entropy ``H(x, z)``.

    The score is fitted on concatenated ``(x, z)`` rows; only its z-block
    contributes, since ``x`` does not depend on the parameters. A
    deterministic encoder whose output is affine in ``x`` makes the joint
    singular; the estimate is still returned and ``singular_joint`` is set.
    """
    X = _check_batch(X)
    n = X.shape[0]
    if enc.param_count == 0:
        return _skipped(n, seed)
    if eps is None:
        eps = enc.sample_noise(n, np.random.default_rng(seed))
    Z = enc.forward(X, eps)
    G, est = _fit_scores(np.hstack([X, Z]), cfg)
    grad = -enc.pjvp(X, G[:, X.shape[1]:], eps) / n
    diag = Diagnostics(est.n_components, est.eigen_mass, est.bandwidth, n, seed,
                       singular_joint=_joint_is_singular(X, Z))
    return GradientReport(grad, diag)


def mi_grad_circ1(enc: Encoder, X, cfg: SsgeConfig = SsgeConfig(), seed=0) -> GradientReport:
    """``grad I(x; z)`` for a deterministic encoder: ``grad H(z) - grad H(x, z)``."""
    X = _check_batch(X)
    if enc.stochastic:
        raise InvalidArgumentError("circumstance I needs a deterministic encoder")
    h_z = entropy_grad(enc, X, cfg, seed)
    h_xz = joint_entropy_grad(enc, X, cfg, seed)
    diag = Diagnostics(h_z.diagnostics.j_used, h_z.diagnostics.eigen_mass,
                       h_z.diagnostics.bandwidth, X.shape[0], seed,
                       singular_joint=h_xz.diagnostics.singular_joint)
    return GradientReport(h_z.gradient - h_xz.gradient, diag,
                          {"H(z)": h_z.gradient, "H(x,z)": h_xz.gradient})


def mi_grad_circ2(c_enc: Encoder, f_enc: Encoder, X, cfg: SsgeConfig = SsgeConfig(),
                  seed=0) -> GradientReport:
    """``grad I(h; z)`` for ``h = C(x)``, ``z = f(h)``.

    The parameter vector is ``concat(C params, f params)``. Either stage may
    be stochastic; one noise draw per row and stage is shared by all three
    entropy terms.
    """
    X = _check_batch(X)
    n = X.shape[0]
    if f_enc.input_dim != c_enc.output_dim:
        raise InvalidArgumentError(
            f"stage mismatch: C outputs {c_enc.output_dim}, f expects {f_enc.input_dim}")
    pc, pf = c_enc.param_count, f_enc.param_count
    if pc + pf == 0:
        return _skipped(n, seed)

    rng_c, rng_f = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))
    eps_c = c_enc.sample_noise(n, rng_c)
    eps_f = f_enc.sample_noise(n, rng_f)
    H = c_enc.forward(X, eps_c)
    Z = f_enc.forward(H, eps_f)
    dh = H.shape[1]

    def through_both(Vh, Vz):
        # cotangents on h (direct) and on z, pulled back to all parameters
        back = Vh + f_enc.input_vjp(H, Vz, eps_f)
        return np.concatenate([c_enc.pjvp(X, back, eps_c), f_enc.pjvp(H, Vz, eps_f)])

    G_h, est_h = _fit_scores(H, cfg)
    term_h = -np.concatenate([c_enc.pjvp(X, G_h, eps_c), np.zeros(pf)]) / n

    G_z, _ = _fit_scores(Z, cfg)
    term_z = -through_both(np.zeros_like(H), G_z) / n

    G_hz, _ = _fit_scores(np.hstack([H, Z]), cfg)
    term_hz = -through_both(G_hz[:, :dh], G_hz[:, dh:]) / n

    diag = Diagnostics(est_h.n_components, est_h.eigen_mass, est_h.bandwidth, n, seed,
                       singular_joint=_joint_is_singular(H, Z))
    return GradientReport(term_h + term_z - term_hz, diag,
                          {"H(h)": term_h, "H(z)": term_z, "H(h,z)": term_hz})


def cond_entropy_grad(enc: Encoder, X, L: int = 1, cfg: SsgeConfig = SsgeConfig(),
                      seed=0, eps=None) -> GradientReport:
    """Gradient of ``H(z | x)`` for a stochastic encoder.

    Each row of ``X`` gets ``L`` noise draws (``eps`` shape ``(n, L, noise_dim)``).
    The conditional score is taken from ``enc.conditional_score`` when
    available; otherwise a separate estimator is fitted on the ``L``
    conditional samples of every row, which needs ``L >= 2``.
    """
    X = _check_batch(X)
    n = X.shape[0]
    if not enc.stochastic:
        raise InvalidArgumentError("conditional entropy needs a stochastic encoder")
    L = int(L)
    analytic = enc.has_conditional_score
    if L < 1 or (L < 2 and not analytic):
        raise InsufficientSamplesError(
            f"need L >= {1 if analytic else 2} conditional draws per input, got {L}")
    if enc.param_count == 0:
        return _skipped(n, seed)
    if eps is None:
        eps = np.random.default_rng(seed).standard_normal((n, L, enc.noise_dim))
    eps = np.asarray(eps, dtype=np.float64).reshape(n, L, enc.noise_dim)

    Xr = np.repeat(X, L, axis=0)
    Er = eps.reshape(n * L, enc.noise_dim)
    Z = enc.forward(Xr, Er)
    if analytic:
        S = enc.conditional_score(Z, Xr)
        diag = Diagnostics(0, 1.0, float("nan"), n, seed)
    else:
        S = np.empty_like(Z)
        js, masses, bws = [], [], []
        for i in range(n):
            rows = slice(i * L, (i + 1) * L)
            S[rows], est = _fit_scores(Z[rows], cfg)
            js.append(est.n_components)
            masses.append(est.eigen_mass)
            bws.append(est.bandwidth)
        diag = Diagnostics(int(round(np.mean(js))), float(np.mean(masses)),
                           float(np.mean(bws)), n, seed)
    grad = -enc.pjvp(Xr, S, Er) / (n * L)
    return GradientReport(grad, diag)


def mi_grad_circ3(enc: Encoder, X, L: int = 1, cfg: SsgeConfig = SsgeConfig(), seed=0,
                  projector: RandomProjector | None = None,
                  shared_noise: bool = True) -> GradientReport:
    """``grad I(x; z) = grad H(z) - grad H(z | x)`` for a stochastic encoder.

    With ``shared_noise`` the marginal term reuses the first conditional
    draw of each row, so both terms see the same ``z`` batch and their
    Monte Carlo noise largely cancels. Otherwise the marginal term gets its
    own independent draws.
    """
    X = _check_batch(X)
    n = X.shape[0]
    if not enc.stochastic:
        raise InvalidArgumentError("circumstance III needs a stochastic encoder")
    if enc.param_count == 0:
        return _skipped(n, seed)
    rng_m, rng_c = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))
    eps_c = rng_c.standard_normal((n, int(L), enc.noise_dim))
    eps_m = eps_c[:, 0, :] if shared_noise else rng_m.standard_normal((n, enc.noise_dim))
    h_z = entropy_grad(enc, X, cfg, seed, eps=eps_m, projector=projector)
    h_zx = cond_entropy_grad(enc, X, L, cfg, seed, eps=eps_c)
    return GradientReport(h_z.gradient - h_zx.gradient, h_z.diagnostics,
                          {"H(z)": h_z.gradient, "H(z|x)": h_zx.gradient})


def pjvp_check(enc: Encoder, X, eps=None, step=1e-4, seed=0) -> float:
    """Max relative error between ``pjvp`` and central differences of ``forward``.

    Uses a random cotangent drawn from ``seed``; the error is normalised by
    the largest finite-difference component.
    """
    X = as_samples(X)
    if enc.stochastic and eps is None:
        eps = enc.sample_noise(X.shape[0], np.random.default_rng(seed + 1))
    V = np.random.default_rng(seed).standard_normal((X.shape[0], enc.output_dim))
    theta = enc.params
    analytic = enc.pjvp(X, V, eps)
    fd = np.empty_like(theta)
    for p in range(theta.size):
        e = np.zeros_like(theta)
        e[p] = step
        up = np.sum(V * enc.with_params(theta + e).forward(X, eps))
        down = np.sum(V * enc.with_params(theta - e).forward(X, eps))
        fd[p] = (up - down) / (2 * step)
    scale = max(float(np.max(np.abs(fd), initial=0.0)), 1e-12)
    return float(np.max(np.abs(analytic - fd), initial=0.0) / scale)
