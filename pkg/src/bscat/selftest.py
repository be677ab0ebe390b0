"""Quick self-contained consistency checks for the installed package.

Each suite validates one subsystem against an independent reference:
generic linear-algebra solves for the closed-form covariance inverses, a
direct density-product comparison for the ML decision rule, a direct Bayes
computation for the posterior, and algebraic identities for the codec and
unit conversions. Runs in a few seconds; the CLI exposes it as `selftest`.
"""

from __future__ import annotations

from typing import Callable, NamedTuple

import numpy as np

from . import channel, codec, detector, rate
from .params import SimParams, db_to_linear, linear_to_db


class CheckResult(NamedTuple):
    name: str
    passed: bool
    detail: str


def _suite_unit_conversions(rng: np.random.Generator) -> CheckResult:
    worst = 0.0
    for x in 10.0 ** rng.uniform(-6, 6, size=500):
        back = db_to_linear(linear_to_db(x))
        worst = max(worst, abs(back - x) / x)
    ok = worst < 1e-12 and db_to_linear(0.0) == 1.0 \
        and linear_to_db(0.0) == float("-inf")
    return CheckResult("db round-trip", ok, f"worst rel err {worst:.2e}")


def _suite_rank_one_inverse(rng: np.random.Generator) -> CheckResult:
    worst = 0.0
    for _ in range(200):
        m = int(rng.integers(1, 9))
        params = SimParams(antennas=m,
                           direct_snr=db_to_linear(rng.uniform(1, 9)))
        ch = channel.sample_channel(params, rng)
        cov = detector.build_covariances(ch, params.spreading)
        for k, k_inv, logdet in ((cov.k0, cov.k0_inv, cov.logdet0),
                                 (cov.k1, cov.k1_inv, cov.logdet1)):
            worst = max(worst, np.linalg.norm(k_inv - np.linalg.inv(k)))
            worst = max(worst, abs(logdet - np.linalg.slogdet(k)[1]))
    return CheckResult("closed-form covariance inverses", worst < 1e-10,
                       f"worst deviation {worst:.2e}")


def _naive_likelihood(y: np.ndarray, k: np.ndarray) -> float:
    """Product of per-sample densities via generic inverse/determinant."""
    m = k.shape[0]
    k_inv = np.linalg.inv(k)
    det = np.linalg.det(k).real
    densities = [
        float(np.exp(-(row.conj() @ k_inv @ row).real)) / (np.pi ** m * det)
        for row in y
    ]
    return float(np.prod(densities))


def _suite_ml_rule(rng: np.random.Generator) -> CheckResult:
    disagreements = 0
    total = 0
    for _ in range(500):
        m = int(rng.integers(1, 9))
        n = int(rng.choice([1, 5]))
        params = SimParams(antennas=m, spreading=n,
                           direct_snr=db_to_linear(rng.uniform(1, 9)))
        ch = channel.sample_channel(params, rng)
        cov = detector.build_covariances(ch, n)
        for e_bit in (0, 1):
            block = channel.synthesize_block(ch, e_bit, params, rng)
            fast = detector.ml_detect(block, cov)
            l0 = _naive_likelihood(block.samples, cov.k0)
            l1 = _naive_likelihood(block.samples, cov.k1)
            naive = 1 if l1 > l0 else 0
            disagreements += int(fast != naive)
            total += 1
    return CheckResult("ML rule vs direct likelihoods", disagreements == 0,
                       f"{disagreements}/{total} disagreements")


def _suite_posterior(rng: np.random.Generator) -> CheckResult:
    worst_sum = 0.0
    worst_bayes = 0.0
    for _ in range(500):
        params = SimParams(antennas=int(rng.integers(1, 6)))
        prior = float(rng.uniform(0.05, 0.95))
        ch = channel.sample_channel(params, rng)
        cov = detector.build_covariances(ch, params.spreading)
        block = channel.synthesize_block(ch, int(rng.integers(0, 2)), params,
                                         rng)
        w0, w1 = rate.posterior(block, cov, prior)
        worst_sum = max(worst_sum, abs(w0 + w1 - 1.0))
        l0 = _naive_likelihood(block.samples, cov.k0)
        l1 = _naive_likelihood(block.samples, cov.k1)
        direct = prior * l0 / (prior * l0 + (1.0 - prior) * l1)
        worst_bayes = max(worst_bayes, abs(w0 - direct))
    ok = worst_sum < 1e-12 and worst_bayes < 1e-10
    return CheckResult("posterior normalization and Bayes",
                       ok, f"sum err {worst_sum:.1e}, "
                           f"Bayes err {worst_bayes:.1e}")


def _suite_codec(rng: np.random.Generator) -> CheckResult:
    layout = codec.FrameLayout()
    for _ in range(500):
        length = int(rng.integers(1, 400))
        message = rng.integers(0, 2, size=length, dtype=np.uint8)
        if not np.array_equal(
                codec.differential_decode(codec.differential_encode(message)),
                message):
            return CheckResult("codec round-trips", False,
                               "differential coding failed")
        split = codec.random_split(message, float(rng.uniform(0, 1)), rng)
        merged = codec.merge_message(split.active_bits,
                                     split.backscatter_payload,
                                     split.first_bit_id, split.step)
        if not np.array_equal(merged, message):
            return CheckResult("codec round-trips", False,
                               "split/merge failed")
        payload = rng.integers(0, 2, size=int(rng.integers(0, 200)),
                               dtype=np.uint8)
        frames = codec.build_frames(payload, layout, 17, 3)
        _, _, back = codec.parse_frames([f.bits for f in frames], layout,
                                        payload.size)
        if not np.array_equal(back, payload):
            return CheckResult("codec round-trips", False,
                               "frame build/parse failed")
    return CheckResult("codec round-trips", True, "500 randomized cases")


def _suite_throughput_accounting(rng: np.random.Generator) -> CheckResult:
    ok = codec.decoded_bits(1000, 0.0, 0.0, 0.9) == 1000.0
    ok = ok and codec.decoded_bits(1000, 1.0, 0.3, 0.0) == 1000.0
    ok = ok and abs(codec.decoded_bits(1000, 0.1, 0.0, 0.2) - 980.0) < 1e-9
    return CheckResult("decoded-bits accounting", ok, "endpoint identities")


SUITES: tuple[Callable[[np.random.Generator], CheckResult], ...] = (
    _suite_unit_conversions,
    _suite_rank_one_inverse,
    _suite_ml_rule,
    _suite_posterior,
    _suite_codec,
    _suite_throughput_accounting,
)


def run_all(seed: int = 2025) -> list[CheckResult]:
    results = []
    for i, suite in enumerate(SUITES):
        rng = np.random.default_rng(np.random.SeedSequence(seed,
                                                           spawn_key=(i,)))
        results.append(suite(rng))
    return results
