"""Monte-Carlo estimate of the maximum achievable backscatter rate.

The rate of the tag's binary reflect/absorb channel is the mutual
information between the state and the received observation, averaged over
channel realizations. No closed form exists because the ambient transmitter
symbols are themselves random and unknown, so the estimator samples:

    rate = C(prior) - E[ C(posterior weight of state 0 given y) ]

with C the binary entropy in bits. Per trial it draws a fresh channel,
draws the state from the prior, synthesizes one observation, and scores the
posterior entropy of the state via the detector's log-likelihoods.

Trials are processed in fixed-size chunks with independent child random
streams, so estimates are reproducible from the seed regardless of how many
workers run the chunks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import channel, detector
from .params import SimParams
from ._pool import map_ordered

CHUNK_TRIALS = 16_384  # fixed chunk size, part of the reproducibility contract


def binary_entropy(theta: float | np.ndarray):
    """Binary entropy in bits, with 0 log 0 taken as 0.

    Symmetric about 0.5 where it attains its maximum of 1. Accepts scalars
    or arrays; values outside [0, 1] raise.
    """
    arr = np.asarray(theta, dtype=np.float64)
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError("probabilities must be within [0, 1]")
    out = _entropy01(arr)
    return float(out) if np.isscalar(theta) or arr.ndim == 0 else out


def _entropy01(p: np.ndarray) -> np.ndarray:
    out = np.zeros_like(p)
    for q in (p, 1.0 - p):
        mask = q > 0.0
        out[mask] -= q[mask] * np.log2(q[mask])
    return out


def _stable_logistic(d: np.ndarray) -> np.ndarray:
    """1 / (1 + exp(-d)) without overflow for large |d|."""
    out = np.empty_like(d)
    pos = d >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-d[pos]))
    ed = np.exp(d[~pos])
    out[~pos] = ed / (1.0 + ed)
    return out


def posterior_weights(loglik_diff: np.ndarray, prior: float) -> np.ndarray:
    """Posterior probability of state 0 from the reflect-minus-absorb
    log-likelihood, combined with the prior in the log domain."""
    if not 0.0 <= prior <= 1.0:
        raise ValueError(f"prior must be within [0, 1], got {prior}")
    d = np.asarray(loglik_diff, dtype=np.float64)
    if prior == 1.0:
        return np.ones_like(d)
    if prior == 0.0:
        return np.zeros_like(d)
    log_odds = (np.log(1.0 - prior) - np.log(prior)) + d
    return _stable_logistic(-log_odds)


def posterior(y0, cov: detector.CovariancePair,
              prior: float) -> tuple[float, float]:
    """Posterior probabilities of the two reflection states given y0.

    `y0` is a received block or raw sample array. Both likelihoods come from
    the detector module and are combined with the prior in the log domain,
    so extreme likelihood ratios stay finite.
    """
    if not 0.0 <= prior <= 1.0:
        raise ValueError(f"prior must be within [0, 1], got {prior}")
    if prior == 1.0:
        return 1.0, 0.0
    if prior == 0.0:
        return 0.0, 1.0
    diff = (detector.log_likelihood(y0, cov, 1)
            - detector.log_likelihood(y0, cov, 0))
    log_odds = (np.log(1.0 - prior) - np.log(prior)) + diff
    w1 = float(_stable_logistic(np.asarray(log_odds)))
    w0 = float(_stable_logistic(np.asarray(-log_odds)))
    return w0, w1


@dataclass(frozen=True)
class RateEstimate:
    """Estimated achievable rate in bits per backscatter symbol."""

    rate_bits: float
    prior: float
    trials: int
    standard_error: float


def _rate_chunk(params: SimParams, n_obs: int, trials: int,
                rng: np.random.Generator) -> tuple[float, float, int]:
    batch = channel.sample_channel_batch(params, trials, rng)
    states = (rng.random(trials) < params.prior_one).astype(np.uint8)
    y = channel.synthesize_frame_batch(batch, states[:, None], params, rng,
                                       samples_per_state=n_obs)[:, 0]
    cov = detector.build_covariance_batch(batch)
    diff = detector.log_likelihood_diff_batch(y, cov)
    w0 = posterior_weights(diff, params.prior)
    c = _entropy01(w0)
    return float(c.sum()), float((c * c).sum()), trials


def estimate_max_rate(params: SimParams, trials: int,
                      rng: np.random.Generator, *,
                      samples_per_observation: int | None = None,
                      workers: int = 1) -> RateEstimate:
    """Monte-Carlo estimate of the maximum achievable backscatter rate.

    One observation spans `samples_per_observation` transmitter samples,
    either the full spreading factor (default, one backscatter symbol) or a
    single sample for sensitivity analysis.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    n_obs = (params.spreading if samples_per_observation is None
             else samples_per_observation)
    if n_obs not in (1, params.spreading):
        raise ValueError(
            f"samples_per_observation must be 1 or the spreading factor "
            f"{params.spreading}, got {n_obs}")
    sizes = _chunk_sizes(trials, CHUNK_TRIALS)
    streams = rng.spawn(len(sizes))
    results = map_ordered(
        lambda args: _rate_chunk(params, n_obs, args[0], args[1]),
        list(zip(sizes, streams)), workers)
    total = sum(r[0] for r in results)
    total_sq = sum(r[1] for r in results)
    mean = total / trials
    if trials > 1:
        var = max(total_sq / trials - mean * mean, 0.0) * trials / (trials - 1)
        std_err = float(np.sqrt(var / trials))
    else:
        std_err = float("nan")
    prior_entropy = binary_entropy(params.prior)
    return RateEstimate(rate_bits=prior_entropy - mean, prior=params.prior,
                        trials=trials, standard_error=std_err)


def _chunk_sizes(total: int, chunk: int) -> Sequence[int]:
    full, rest = divmod(total, chunk)
    return [chunk] * full + ([rest] if rest else [])
