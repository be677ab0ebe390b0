"""Maximum-likelihood detection of the tag's reflection state.

Under absorb (state 0) the received vectors are zero-mean complex Gaussian
with covariance K0 = h1 h1^H + I; under reflect (state 1) the tag path adds
in and the covariance becomes K1 = (h1 + h2)(h1 + h2)^H + I. Both are
identity-plus-rank-one, so inverses and log-determinants have exact closed
forms:

    K^-1 = I - v v^H / (1 + ||v||^2),    ln|K| = ln(1 + ||v||^2)

The detector compares the quadratic-form statistic
sum_n y_n^H (K0^-1 - K1^-1) y_n of a block against the log-determinant
threshold N ln(|K1|/|K0|); this is algebraically the same decision as
comparing the two joint likelihoods directly. Exact ties decode as 0.

The receiver is assumed to know the channel (hence K0, K1) exactly; pilot
bits are carried in the frame format but not used for estimation here.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import log, log1p, pi

import numpy as np

from .channel import ChannelBatch, ChannelRealization, ReceivedBlock

_LOG_PI = log(pi)


@dataclass(frozen=True)
class CovariancePair:
    """Per-hypothesis covariance statistics for one channel realization.

    Immutable after construction; detection only reads it, so it is safe to
    share across threads.
    """

    k0: np.ndarray  # (M, M) absorb-state covariance
    k1: np.ndarray  # (M, M) reflect-state covariance
    k0_inv: np.ndarray
    k1_inv: np.ndarray
    logdet0: float
    logdet1: float
    threshold: float  # N * (logdet1 - logdet0)
    n_samples: int  # N the threshold was built for


@dataclass(frozen=True)
class CovarianceBatch:
    """Rank-one covariance statistics for a batch of channels.

    Stores the defining vectors rather than M x M matrices; the quadratic
    forms reduce to inner products against them.
    """

    v0: np.ndarray  # (B, M) = h1
    v1: np.ndarray  # (B, M) = h1 + h2
    gain0: np.ndarray  # (B,) = 1 + ||v0||^2
    gain1: np.ndarray  # (B,) = 1 + ||v1||^2
    logdet0: np.ndarray  # (B,)
    logdet1: np.ndarray  # (B,)


def _rank_one_inverse(v: np.ndarray) -> tuple[np.ndarray, float]:
    """Inverse and log-determinant of I + v v^H."""
    m = v.shape[0]
    energy = float(np.vdot(v, v).real)
    inv = np.eye(m, dtype=np.complex128) - np.outer(v, v.conj()) / (1.0 + energy)
    return inv, log1p(energy)


def build_covariances(ch: ChannelRealization, n_samples: int) -> CovariancePair:
    """Covariance pair, inverses and decision threshold for one channel."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    m = ch.h1.shape[0]
    eye = np.eye(m, dtype=np.complex128)
    v0 = ch.h1
    v1 = ch.h1 + ch.h2
    k0 = np.outer(v0, v0.conj()) + eye
    k1 = np.outer(v1, v1.conj()) + eye
    k0_inv, logdet0 = _rank_one_inverse(v0)
    k1_inv, logdet1 = _rank_one_inverse(v1)
    return CovariancePair(k0=k0, k1=k1, k0_inv=k0_inv, k1_inv=k1_inv,
                          logdet0=logdet0, logdet1=logdet1,
                          threshold=n_samples * (logdet1 - logdet0),
                          n_samples=n_samples)


def build_covariance_batch(batch: ChannelBatch) -> CovarianceBatch:
    v0 = batch.h1
    v1 = batch.h1 + batch.h2
    gain0 = 1.0 + np.einsum("bm,bm->b", v0.conj(), v0).real
    gain1 = 1.0 + np.einsum("bm,bm->b", v1.conj(), v1).real
    return CovarianceBatch(v0=v0, v1=v1, gain0=gain0, gain1=gain1,
                           logdet0=np.log(gain0), logdet1=np.log(gain1))


def _block_samples(block) -> np.ndarray:
    y = block.samples if isinstance(block, ReceivedBlock) else np.asarray(block)
    return np.atleast_2d(y)


def log_likelihood(block, cov: CovariancePair, hypothesis: int) -> float:
    """Joint log-density of a received block under one reflection state.

    Accepts a :class:`ReceivedBlock` or a raw (N, M) array; a single sample
    vector is treated as a one-row block.
    """
    if hypothesis not in (0, 1):
        raise ValueError(f"hypothesis must be 0 or 1, got {hypothesis}")
    y = _block_samples(block)
    m = cov.k0.shape[0]
    if y.shape[1] != m:
        raise ValueError(f"block has {y.shape[1]} antennas, expected {m}")
    k_inv = cov.k0_inv if hypothesis == 0 else cov.k1_inv
    logdet = cov.logdet0 if hypothesis == 0 else cov.logdet1
    n = y.shape[0]
    quad = float(np.einsum("nm,mk,nk->", y.conj(), k_inv, y).real)
    return -n * m * _LOG_PI - n * logdet - quad


def detection_statistic(block, cov: CovariancePair) -> float:
    """sum_n y_n^H (K0^-1 - K1^-1) y_n over the block's rows."""
    y = _block_samples(block)
    delta = cov.k0_inv - cov.k1_inv
    return float(np.einsum("nm,mk,nk->", y.conj(), delta, y).real)


def ml_detect(block, cov: CovariancePair) -> int:
    """Most likely reflection state for one block; ties decode as 0."""
    y = _block_samples(block)
    if y.shape[0] != cov.n_samples:
        raise ValueError(
            f"block has {y.shape[0]} rows, threshold was built for "
            f"{cov.n_samples}")
    return int(detection_statistic(y, cov) > cov.threshold)


def detect_frame(blocks, cov: CovariancePair) -> np.ndarray:
    """Elementwise :func:`ml_detect` over a frame's blocks."""
    return np.asarray([ml_detect(b, cov) for b in blocks], dtype=np.uint8)


def detect_frame_batch(y: np.ndarray, cov: CovarianceBatch) -> np.ndarray:
    """Vectorized state decisions for stacked frames.

    `y` has shape (B, K, N, M) as produced by the channel batch synthesis.
    Uses the rank-one form of the quadratic statistic, which agrees with the
    matrix form used by :func:`ml_detect` up to floating-point rounding.
    """
    b, k, n, m = y.shape
    flat = y.reshape(b, k * n, m)
    z0 = flat @ cov.v0.conj()[:, :, None]
    z1 = flat @ cov.v1.conj()[:, :, None]
    stat = (np.abs(z1[..., 0]) ** 2 / cov.gain1[:, None]
            - np.abs(z0[..., 0]) ** 2 / cov.gain0[:, None])
    stat = stat.reshape(b, k, n).sum(axis=2)
    thresholds = n * (cov.logdet1 - cov.logdet0)
    return (stat > thresholds[:, None]).astype(np.uint8)


def log_likelihood_diff_batch(y: np.ndarray,
                              cov: CovarianceBatch) -> np.ndarray:
    """Reflect-minus-absorb log-likelihood for one block per batch row.

    `y` has shape (B, N, M). The per-sample density constants cancel in the
    difference.
    """
    b, n, m = y.shape
    z0 = np.einsum("bnm,bm->bn", y, cov.v0.conj())
    z1 = np.einsum("bnm,bm->bn", y, cov.v1.conj())
    quad_gap = ((np.abs(z1) ** 2).sum(axis=1) / cov.gain1
                - (np.abs(z0) ** 2).sum(axis=1) / cov.gain0)
    return quad_gap - n * (cov.logdet1 - cov.logdet0)
