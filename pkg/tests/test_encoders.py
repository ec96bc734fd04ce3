import numpy as np
import pytest

from steinmi.encoders import (
    GaussianChannelEncoder,
    IdentityEncoder,
    LinearEncoder,
    TanhMlpEncoder,
)
from steinmi.errors import InvalidArgumentError
from steinmi.mige import pjvp_check


def _builtins(rng):
    return [
        (LinearEncoder(rng.standard_normal((2, 3))), 3),
        (LinearEncoder(rng.standard_normal((2, 3)), noise_std=0.3), 3),
        (TanhMlpEncoder.random(3, 4, 2, rng), 3),
        (GaussianChannelEncoder(0.3, dim=3), 3),
    ]


def test_pjvp_is_linear_in_cotangent(rng):
    for enc, dx in _builtins(rng):
        X = rng.standard_normal((7, dx))
        eps = enc.sample_noise(7, rng)
        V1, V2 = rng.standard_normal((2, 7, enc.output_dim))
        a, b = 1.7, -0.4
        lhs = enc.pjvp(X, a * V1 + b * V2, eps)
        rhs = a * enc.pjvp(X, V1, eps) + b * enc.pjvp(X, V2, eps)
        assert np.max(np.abs(lhs - rhs)) <= 1e-10


def test_pjvp_matches_finite_differences(rng):
    X = rng.standard_normal((10, 3))
    assert pjvp_check(LinearEncoder(rng.standard_normal((2, 3))), X) <= 1e-6
    assert pjvp_check(TanhMlpEncoder.random(3, 5, 2, rng), X, step=1e-4) <= 1e-4
    assert pjvp_check(GaussianChannelEncoder(0.3, dim=3), X) <= 1e-5
    assert pjvp_check(LinearEncoder(rng.standard_normal((2, 3)), 0.5), X) <= 1e-6


def test_input_vjp_matches_finite_differences(rng):
    for enc, dx in _builtins(rng):
        x = rng.standard_normal((1, dx))
        eps = enc.sample_noise(1, rng)
        v = rng.standard_normal((1, enc.output_dim))
        h = 1e-6
        fd = np.array([
            np.sum(v * (enc.forward(x + h * e, eps) - enc.forward(x - h * e, eps))) / (2 * h)
            for e in np.eye(dx)])
        np.testing.assert_allclose(enc.input_vjp(x, v, eps)[0], fd, rtol=1e-6, atol=1e-8)


def test_with_params_round_trip(rng):
    for enc, dx in _builtins(rng):
        theta = enc.params
        X = rng.standard_normal((4, dx))
        eps = enc.sample_noise(4, rng)
        np.testing.assert_array_equal(enc.with_params(theta).forward(X, eps), enc.forward(X, eps))
        assert enc.param_count == theta.size


def test_identity_has_no_parameters(rng):
    enc = IdentityEncoder(3)
    X = rng.standard_normal((5, 3))
    assert enc.param_count == 0
    assert enc.pjvp(X, X).shape == (0,)
    np.testing.assert_array_equal(enc.forward(X), X)


def test_channel_statistics_and_conditional_score():
    enc = GaussianChannelEncoder(0.6, dim=2)
    rng = np.random.default_rng(3)
    X = rng.standard_normal((20000, 2))
    Z = enc.forward(X, enc.sample_noise(20000, rng))
    assert np.std(Z) == pytest.approx(1.0, abs=0.02)
    assert np.corrcoef(X[:, 0], Z[:, 0])[0, 1] == pytest.approx(0.6, abs=0.02)
    z, x = np.array([[0.5, -1.0]]), np.array([[1.0, 1.0]])
    np.testing.assert_allclose(enc.conditional_score(z, x), -(z - 0.6 * x) / 0.64)


def test_channel_rejects_unit_rho():
    for rho in (1.0, -1.0, 1.5):
        with pytest.raises(InvalidArgumentError):
            GaussianChannelEncoder(rho)


def test_deterministic_encoders_lack_conditional_score(rng):
    enc = LinearEncoder(np.eye(2))
    assert not enc.stochastic and not enc.has_conditional_score
    with pytest.raises(NotImplementedError):
        enc.conditional_score(np.zeros((1, 2)), np.zeros((1, 2)))


def test_shape_contracts(rng):
    enc = GaussianChannelEncoder(0.2, dim=2)
    with pytest.raises(InvalidArgumentError):
        enc.forward(np.zeros((3, 2)))
    with pytest.raises(InvalidArgumentError):
        enc.forward(np.zeros((3, 3)), np.zeros((3, 3)))
    with pytest.raises(InvalidArgumentError):
        LinearEncoder(np.eye(2)).pjvp(np.zeros((3, 2)), np.zeros((3, 1)))
    with pytest.raises(InvalidArgumentError):
        TanhMlpEncoder(np.eye(2), np.zeros(3), np.eye(2), np.zeros(2))
