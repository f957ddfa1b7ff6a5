import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mulog.channelizer import (
    ChannelBasis,
    calibrate,
    calibrate_from_log,
    condition_input,
    kappa,
    kappa_inv,
    mad_sigma,
    offdiag_pairs,
    omega,
    omega_adjoint,
    omega_inv,
    omega_linear,
)
from mulog.exceptions import DegenerateCalibrationError, InvalidInputError
from mulog.hermitian import mat_log_fast
from mulog.statistics import sample_wishart

SQRT2 = math.sqrt(2.0)


def test_offdiag_order():
    rows, cols = offdiag_pairs(4)
    assert list(zip(rows, cols)) == [(0, 1), (1, 2), (2, 3), (0, 2), (1, 3), (0, 3)]


def test_kappa_d1():
    np.testing.assert_array_equal(kappa(np.array([2.5])), [[2.5]])


def test_kappa_d2_layout():
    m = kappa(np.array([1.0, 2.0, 3.0, 4.0]))
    expected = np.array([[1.0, (3.0 + 4.0j) / SQRT2], [(3.0 - 4.0j) / SQRT2, 2.0]])
    np.testing.assert_allclose(m, expected, rtol=1e-15)


def test_kappa_rejects_bad_channel_count():
    with pytest.raises(InvalidInputError):
        kappa(np.zeros(5))


@pytest.mark.parametrize("dim", [1, 2, 3, 4])
def test_kappa_is_unitary(rng, dim):
    alpha = rng.standard_normal((50, dim * dim))
    m = kappa(alpha)
    np.testing.assert_allclose(np.linalg.norm(m, axis=(-2, -1)), np.linalg.norm(alpha, axis=-1), rtol=1e-13)
    np.testing.assert_allclose(kappa_inv(m), alpha, rtol=1e-13, atol=1e-14)


@given(arrays(np.float64, (3, 9), elements=st.floats(-1e3, 1e3)))
def test_kappa_roundtrip_property(alpha):
    np.testing.assert_allclose(kappa_inv(kappa(alpha)), alpha, rtol=1e-13, atol=1e-12)


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_omega_roundtrip(rng, basis, dim):
    basis = basis(rng, dim)
    x = rng.standard_normal((20, dim * dim))
    np.testing.assert_allclose(omega_inv(omega(x, basis), basis), x, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_omega_adjoint_identity(rng, herm, basis, dim):
    basis = basis(rng, dim)
    x = rng.standard_normal((20, dim * dim))
    m = herm(rng, 20, dim)
    lhs = np.einsum("nij,nij->n", np.conj(m), omega_linear(x, basis)).real
    rhs = np.sum(omega_adjoint(m, basis) * x, axis=-1)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12)


def test_identity_basis_is_kappa(rng):
    basis = ChannelBasis.identity(2)
    x = rng.standard_normal((5, 4))
    np.testing.assert_array_equal(omega(x, basis), kappa(x))
    assert basis.channels == 4


def test_basis_validation():
    with pytest.raises(InvalidInputError):
        ChannelBasis(2, np.eye(4), np.zeros(4), np.array([1.0, 1.0, 0.0, 1.0]))
    with pytest.raises(InvalidInputError):
        ChannelBasis(2, 2 * np.eye(4), np.zeros(4), np.ones(4))
    with pytest.raises(InvalidInputError):
        ChannelBasis(2, np.eye(3), np.zeros(3), np.ones(3))


def test_mad_examples():
    assert mad_sigma(np.zeros((8, 8))) == 0.0
    # Alternating +-1 columns: |diff| / sqrt2 = sqrt2 everywhere
    alt = np.tile([1.0, -1.0], (8, 4))
    assert mad_sigma(alt) == pytest.approx(1.4826 * SQRT2)
    with pytest.raises(InvalidInputError):
        mad_sigma(np.zeros((2, 4)))
    with pytest.raises(InvalidInputError):
        mad_sigma(np.zeros((32, 1)))


def test_mad_of_white_noise(rng):
    assert mad_sigma(rng.normal(0.0, 2.0, (256, 256))) == pytest.approx(2.0, rel=0.02)


def _speckled(rng, dim, looks, size=64):
    sigma = np.eye(dim) + 0.4 * np.diag(np.ones(dim - 1), 1) + 0.4 * np.diag(np.ones(dim - 1), -1)
    return sample_wishart(sigma, looks, int(rng.integers(1 << 30)), shape=(size, size))


@pytest.mark.parametrize("dim", [2, 3])
def test_calibration_whitens_channels(rng, dim):
    c = _speckled(rng, dim, looks=dim + 2)
    basis = calibrate(c, dim + 2)
    x = omega_inv(mat_log_fast(c), basis)
    for k in range(dim * dim):
        assert mad_sigma(x[..., k]) == pytest.approx(1.0, rel=1e-9)
    np.testing.assert_allclose(np.mean(x.reshape(-1, dim * dim), axis=0), 0.0, atol=1e-10)
    cov = np.cov(x.reshape(-1, dim * dim), rowvar=False)
    off = cov - np.diag(np.diag(cov))
    assert np.max(np.abs(off)) < 1e-8 * np.max(np.diag(cov))
    idx = np.argmax(np.abs(basis.A), axis=0)
    assert np.all(basis.A[idx, np.arange(dim * dim)] > 0)


def test_calibration_d1_is_scalar():
    rng = np.random.default_rng(3)
    y = np.log(rng.gamma(2.0, 0.5, (64, 64)))[..., None, None]
    basis = calibrate_from_log(y)
    np.testing.assert_array_equal(basis.A, [[1.0]])
    assert basis.b[0] == pytest.approx(np.mean(y))
    assert basis.phi[0] == pytest.approx(mad_sigma(y[..., 0, 0]))


def test_calibration_degenerate():
    with pytest.raises(DegenerateCalibrationError):
        calibrate(np.tile(np.eye(2), (16, 16, 1, 1)), 4.0)
    with pytest.raises(DegenerateCalibrationError):
        calibrate_from_log(np.zeros((2, 2, 2, 2)))


def test_condition_passthrough(rng):
    c = _speckled(rng, 2, looks=4, size=16)
    assert condition_input(c, 4.0) is c


@pytest.mark.parametrize("dim", [2, 3])
def test_condition_single_look_is_positive_definite(rng, dim):
    c = _speckled(rng, dim, looks=1, size=32)
    out = condition_input(c, 1.0)
    assert np.all(np.linalg.eigvalsh(out)[..., 0] > 0)
    assert np.all(np.isfinite(mat_log_fast(out)))


def test_condition_shrinks_only_off_diagonal(rng):
    c = _speckled(rng, 2, looks=1, size=32)
    out = condition_input(c, 1.0)
    np.testing.assert_array_equal(np.diagonal(out, axis1=-2, axis2=-1), np.diagonal(c, axis1=-2, axis2=-1))
    assert np.all(np.abs(out[..., 0, 1]) < np.abs(c[..., 0, 1]))


def test_condition_constant_rank_one_image():
    v = np.array([1.0, 0.5j])
    c = np.tile(np.outer(v, np.conj(v)), (8, 8, 1, 1))
    out = condition_input(c, 1.0)
    assert np.all(np.linalg.eigvalsh(out)[..., 0] > 0)
    # Fully coherent constant image keeps |coherence| close to one
    coh = np.abs(out[..., 0, 1]) / np.sqrt(out[..., 0, 0].real * out[..., 1, 1].real)
    assert np.all(coh < 1.0)
    assert np.all(coh > 0.999)


def test_condition_rejects_nonpositive_diagonal():
    c = np.tile(np.eye(2), (4, 4, 1, 1))
    c[1, 2, 0, 0] = 0.0
    with pytest.raises(InvalidInputError, match="pixel 6"):
        condition_input(c, 1.0)


@pytest.mark.parametrize("dim", [1, 2, 3])
@pytest.mark.parametrize("factor", [1, 2, 4])
def test_calibrated_channels_have_unit_noise(dim, factor):
    looks = dim * factor
    sigma = np.eye(dim) + 0.3 * (np.ones((dim, dim)) - np.eye(dim))
    c = sample_wishart(sigma, looks, 100 * dim + factor, shape=(48, 48))
    conditioned = condition_input(c, looks)
    c_log = mat_log_fast(conditioned)
    y = omega_inv(c_log, calibrate_from_log(c_log))
    for k in range(dim * dim):
        assert 0.8 <= mad_sigma(y[..., k]) <= 1.25
