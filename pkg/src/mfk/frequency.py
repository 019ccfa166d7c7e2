"""Cosine-basis trajectory coding and power spectra for evaluation.

The forward transform of a length-L sequence y is

    C[l] = sqrt(2/L) * sum_t y[t] / sqrt(1 + (l == 0)) * cos(pi/(2L) * (2t+1) * l)

with l, t zero-based. The basis is orthonormal, so the inverse is the
transpose. Sequences here are short (L <= 64), so dense matrices are used
throughout; no fast transform is needed.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DimensionError

SPECTRUM_EPS = 1e-8


@dataclass(frozen=True)
class DctBasis:
    length: int
    matrix: np.ndarray  # [L, L], rows are coefficients
    inverse_matrix: np.ndarray  # [L, L]


@lru_cache(maxsize=None)
def dct_basis(length: int) -> DctBasis:
    if length < 1:
        raise DimensionError(f"basis length must be >= 1, got {length}")
    l = np.arange(length)[:, None]  # coefficient index
    t = np.arange(length)[None, :]  # time index
    mat = np.sqrt(2.0 / length) * np.cos(np.pi / (2.0 * length) * (2 * t + 1) * l)
    mat[0] /= np.sqrt(2.0)
    inv = mat.T.copy()
    mat.setflags(write=False)
    inv.setflags(write=False)
    return DctBasis(length=length, matrix=mat, inverse_matrix=inv)


def dct_forward(seq: np.ndarray) -> np.ndarray:
    """Coefficients of a length-L scalar sequence."""
    seq = np.asarray(seq, dtype=np.float64)
    if seq.ndim != 1 or seq.size < 1:
        raise DimensionError(f"expected a non-empty 1-D sequence, got shape {seq.shape}")
    return dct_basis(seq.size).matrix @ seq


def dct_inverse(coeffs: np.ndarray) -> np.ndarray:
    """Exact inverse of :func:`dct_forward`."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.ndim != 1 or coeffs.size < 1:
        raise DimensionError(f"expected non-empty 1-D coefficients, got shape {coeffs.shape}")
    return dct_basis(coeffs.size).inverse_matrix @ coeffs


@dataclass
class PowerSpectrum:
    """One-sided squared-magnitude spectrum per feature row.

    values: [F, n_bins] raw power; normalized: per-feature distribution over
    bins (epsilon-smoothed so it always sums to 1); degenerate flags features
    whose total raw power is zero.
    """

    values: np.ndarray
    normalized: np.ndarray
    degenerate: np.ndarray


def power_spectrum(seq_block: np.ndarray) -> PowerSpectrum:
    """Squared DFT magnitudes over the non-redundant bins of each feature row."""
    seq_block = np.asarray(seq_block, dtype=np.float64)
    if seq_block.ndim == 1:
        seq_block = seq_block[None, :]
    if seq_block.ndim != 2 or seq_block.shape[1] < 2:
        raise DimensionError(f"expected [features, L>=2], got shape {seq_block.shape}")
    spectrum = np.fft.rfft(seq_block, axis=1)
    values = np.abs(spectrum) ** 2
    total = values.sum(axis=1)
    degenerate = total == 0.0
    smoothed = values + SPECTRUM_EPS
    normalized = smoothed / smoothed.sum(axis=1, keepdims=True)
    return PowerSpectrum(values=values, normalized=normalized, degenerate=degenerate)
