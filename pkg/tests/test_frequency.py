import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mfk.errors import DimensionError
from mfk.frequency import PowerSpectrum, dct_basis, dct_forward, dct_inverse, power_spectrum


def naive_coefficients(seq):
    """Direct evaluation of the transform sum, independent of the matrix path."""
    length = len(seq)
    out = []
    for l in range(length):
        scale = math.sqrt(2.0 / length) / (math.sqrt(2.0) if l == 0 else 1.0)
        acc = 0.0
        for t in range(length):
            acc += seq[t] * math.cos(math.pi / (2.0 * length) * (2 * t + 1) * l)
        out.append(scale * acc)
    return np.array(out)


def test_zero_sequence_gives_zero_coefficients():
    assert np.all(dct_forward(np.zeros(12)) == 0.0)


@pytest.mark.parametrize("length", [1, 2, 5, 24, 25])
def test_constant_sequence_concentrates_in_first_coefficient(length):
    c = 3.25
    coeffs = dct_forward(np.full(length, c))
    assert coeffs[0] == pytest.approx(c * math.sqrt(length), abs=1e-10)
    assert np.all(np.abs(coeffs[1:]) < 1e-10)


def test_matches_naive_sum_oracle():
    rng = np.random.default_rng(42)
    for length in (2, 3, 8, 24):
        seq = rng.normal(size=length)
        np.testing.assert_allclose(dct_forward(seq), naive_coefficients(seq), atol=1e-12)


def test_matches_scipy_orthonormal_dct():
    scipy_fft = pytest.importorskip("scipy.fft")
    rng = np.random.default_rng(7)
    seq = rng.normal(size=24)
    np.testing.assert_allclose(dct_forward(seq), scipy_fft.dct(seq, norm="ortho"), atol=1e-12)
    np.testing.assert_allclose(dct_inverse(seq), scipy_fft.idct(seq, norm="ortho"), atol=1e-12)


def test_round_trip_length_24():
    rng = np.random.default_rng(0)
    seq = rng.normal(size=24)
    np.testing.assert_allclose(dct_inverse(dct_forward(seq)), seq, atol=1e-9)


def test_inverse_of_constant_coefficients():
    length = 16
    coeffs = np.zeros(length)
    coeffs[0] = 2.5 * math.sqrt(length)
    np.testing.assert_allclose(dct_inverse(coeffs), np.full(length, 2.5), atol=1e-10)


@pytest.mark.parametrize("length", range(2, 65))
def test_basis_inverse_is_identity(length):
    basis = dct_basis(length)
    np.testing.assert_allclose(
        basis.inverse_matrix @ basis.matrix, np.eye(length), atol=1e-10
    )


@settings(max_examples=120, deadline=None)
@given(
    st.integers(min_value=2, max_value=64),
    st.integers(min_value=0, max_value=2**31 - 1),
)
def test_round_trip_property(length, seed):
    seq = np.random.default_rng(seed).normal(size=length) * 50.0
    np.testing.assert_allclose(dct_inverse(dct_forward(seq)), seq, atol=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=2, max_value=48), st.integers(min_value=0, max_value=2**31 - 1))
def test_linearity(length, seed):
    rng = np.random.default_rng(seed)
    x, y = rng.normal(size=(2, length))
    a, b = rng.uniform(-3, 3, size=2)
    np.testing.assert_allclose(
        dct_forward(a * x + b * y), a * dct_forward(x) + b * dct_forward(y), atol=1e-9
    )


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=2, max_value=64), st.integers(min_value=0, max_value=2**31 - 1))
def test_energy_preservation(length, seed):
    seq = np.random.default_rng(seed).normal(size=length) * 10.0
    coeffs = dct_forward(seq)
    assert np.sum(coeffs**2) == pytest.approx(np.sum(seq**2), rel=1e-7, abs=1e-7)


def test_empty_sequence_rejected():
    with pytest.raises(DimensionError):
        dct_forward(np.array([]))
    with pytest.raises(DimensionError):
        dct_inverse(np.array([]))


# power spectrum ------------------------------------------------------------


def test_zero_signal_degenerate_and_uniform():
    ps = power_spectrum(np.zeros((2, 25)))
    assert ps.degenerate.all()
    bins = ps.normalized.shape[1]
    np.testing.assert_allclose(ps.normalized, np.full((2, bins), 1.0 / bins), atol=1e-12)


def test_pure_cosine_concentrates_mass():
    t = np.arange(25)
    k = 5
    sig = np.cos(2 * np.pi * k * t / 25.0)
    ps = power_spectrum(sig[None, :])
    assert ps.normalized[0, k] > 0.99
    assert not ps.degenerate[0]


def test_constant_signal_is_dc():
    ps = power_spectrum(np.full((1, 25), 7.0))
    assert ps.normalized[0, 0] > 0.99


def test_sign_flip_invariance():
    rng = np.random.default_rng(3)
    sig = rng.normal(size=(4, 25))
    a = power_spectrum(sig)
    b = power_spectrum(-sig)
    np.testing.assert_allclose(a.values, b.values, atol=1e-12)


def test_bin_count_is_one_sided():
    ps = power_spectrum(np.ones((1, 25)))
    assert ps.values.shape[1] == 13  # floor(25/2) + 1
    assert isinstance(ps, PowerSpectrum)


def test_too_short_signal_rejected():
    with pytest.raises(DimensionError):
        power_spectrum(np.ones((2, 1)))
