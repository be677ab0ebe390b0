"""Seeded Monte-Carlo experiments over parameter sweeps.

Reproduces the four standard curves of the system study: achievable
backscatter rate versus the state prior and versus the direct SNR, the
backscatter bit error rate versus the direct SNR, and the successfully
decoded bit counts versus the direct SNR for several splitting ratios.

Every (series, sweep point) cell draws its randomness from an independent
child stream of the experiment seed, and each estimator partitions its
trials into fixed chunks reduced in order, so a given spec produces
identical numbers no matter how many workers run it.
"""

from __future__ import annotations

import csv
import os
import tempfile
from dataclasses import dataclass, field
from math import isfinite
from typing import Callable, NamedTuple

import numpy as np

from . import channel, codec, detector
from ._pool import map_ordered
from .params import SimParams, db_to_linear
from .rate import estimate_max_rate

CHUNK_FRAMES = 250  # frames per chunk, part of the reproducibility contract

KINDS = ("rate_vs_prior", "rate_vs_snr", "ber_vs_snr", "throughput_vs_snr")

CSV_HEADER = ("x", "series", "y", "stderr", "trials")


@dataclass(frozen=True)
class ExperimentSpec:
    """One sweep: what to measure, where, and with how much averaging.

    For `rate_vs_prior` the sweep values are state-0 priors; for the other
    kinds they are direct-link SNRs in dB. `etas` and `direct_ber` only
    matter for `throughput_vs_snr`.
    """

    kind: str
    sweep: tuple[float, ...]
    antennas: tuple[int, ...] = (10,)
    trials: int = 100_000
    base: SimParams = field(default_factory=SimParams)
    seed: int = 2025
    etas: tuple[float, ...] = (0.0, 0.1, 0.4)
    direct_ber: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not self.sweep:
            raise ValueError("sweep must not be empty")
        if self.kind == "rate_vs_prior":
            for v in self.sweep:
                if not 0.0 <= v <= 1.0:
                    raise ValueError(
                        f"sweep: prior must be within [0, 1], got {v}")
        if not self.antennas or any(m < 1 for m in self.antennas):
            raise ValueError("antennas must be a non-empty list of ints >= 1")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        for eta in self.etas:
            if not 0.0 <= eta <= 1.0:
                raise ValueError(f"etas: must be within [0, 1], got {eta}")
        if not 0.0 <= self.direct_ber <= 1.0:
            raise ValueError("direct_ber must be within [0, 1]")


@dataclass(frozen=True)
class CurvePoint:
    """Measurements of every series at one sweep position."""

    x: float
    y: dict[str, float]
    stderr: dict[str, float]
    trials: int

    def __post_init__(self) -> None:
        for name, value in self.y.items():
            if not isfinite(value):
                raise ValueError(f"series {name}: non-finite value {value}")
        for name, value in self.stderr.items():
            if not value >= 0.0:
                raise ValueError(f"series {name}: negative stderr {value}")


class BerResult(NamedTuple):
    ber: float
    std_err: float


class ThroughputResult(NamedTuple):
    total_bits: float  # expected successfully decoded bits, both streams
    backscatter_bits: float  # backscatter stream only
    ber: float  # measured backscatter BER behind the two counts
    ber_std_err: float


def _ber_chunk(params: SimParams, frames: int,
               rng: np.random.Generator) -> tuple[int, int, int]:
    """Simulate `frames` independent frames; return integer error moments."""
    batch = channel.sample_channel_batch(params, frames, rng)
    bits = rng.integers(0, 2, size=(frames, params.frame_bits), dtype=np.uint8)
    states = codec.differential_encode(bits)
    y = channel.synthesize_frame_batch(batch, states[:, 1:], params, rng)
    cov = detector.build_covariance_batch(batch)
    detected = detector.detect_frame_batch(y, cov)
    reference = np.ones((frames, 1), dtype=np.uint8)  # tag state before the frame
    decoded = codec.differential_decode(
        np.concatenate([reference, detected], axis=1))
    errors = np.sum(decoded != bits, axis=1, dtype=np.int64)
    return int(errors.sum()), int((errors * errors).sum()), frames


def run_ber(params: SimParams, trials: int, rng: np.random.Generator, *,
            workers: int = 1) -> BerResult:
    """Backscatter-link BER over `trials` independent frames.

    Each trial draws a channel, sends one frame of uniform payload bits
    through differential encoding, synthesis and ML detection, and counts
    decoded-bit errors. The standard error treats per-frame error fractions
    as the i.i.d. samples, which absorbs the within-frame correlation
    induced by the shared channel.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    sizes = _chunk_sizes(trials, CHUNK_FRAMES)
    streams = rng.spawn(len(sizes))
    results = map_ordered(lambda a: _ber_chunk(params, a[0], a[1]),
                          list(zip(sizes, streams)), workers)
    k_sum = sum(r[0] for r in results)
    k_sq_sum = sum(r[1] for r in results)
    bits_per_frame = params.frame_bits
    ber = k_sum / (trials * bits_per_frame)
    if trials > 1:
        mean_sq = k_sq_sum / (trials * bits_per_frame ** 2)
        var = max(mean_sq - ber * ber, 0.0) * trials / (trials - 1)
        std_err = float(np.sqrt(var / trials))
    else:
        std_err = float("nan")
    return BerResult(ber=ber, std_err=std_err)


def run_throughput(params: SimParams, trials: int, rng: np.random.Generator, *,
                   direct_ber: float = 0.0,
                   workers: int = 1) -> ThroughputResult:
    """Expected decoded bit counts at the params' splitting ratio.

    Measures the backscatter BER by simulation and applies the decoded-bits
    accounting; the direct stream's BER is a configured constant (it is
    approximately zero at these SNRs and no active-link modem is modeled).
    """
    ber, std_err = run_ber(params, trials, rng, workers=workers)
    eta = params.split_ratio
    total = codec.decoded_bits(params.total_bits, eta, direct_ber, ber)
    backscatter = params.total_bits * eta * (1.0 - ber)
    return ThroughputResult(total_bits=total, backscatter_bits=backscatter,
                            ber=ber, ber_std_err=std_err)


def _cell_rng(seed: int, series_idx: int, point_idx: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(seed, spawn_key=(series_idx, point_idx)))


def run_experiment(spec: ExperimentSpec, *, workers: int = 1,
                   progress: Callable[[CurvePoint], None] | None = None
                   ) -> list[CurvePoint]:
    """Run all sweep points of an experiment and return its curve.

    Deterministic for a given spec: the measurement for antenna-series i at
    sweep index j always uses the child stream (i, j) of the spec seed.
    """
    points = []
    for j, x in enumerate(spec.sweep):
        ys: dict[str, float] = {}
        errs: dict[str, float] = {}
        for i, m in enumerate(spec.antennas):
            rng = _cell_rng(spec.seed, i, j)
            label = f"M={m}"
            if spec.kind == "rate_vs_prior":
                params = spec.base.with_overrides(antennas=m, prior=x)
                est = estimate_max_rate(params, spec.trials, rng,
                                        workers=workers)
                ys[label], errs[label] = est.rate_bits, est.standard_error
            elif spec.kind == "rate_vs_snr":
                params = spec.base.with_overrides(
                    antennas=m, direct_snr=db_to_linear(x))
                est = estimate_max_rate(params, spec.trials, rng,
                                        workers=workers)
                ys[label], errs[label] = est.rate_bits, est.standard_error
            elif spec.kind == "ber_vs_snr":
                params = spec.base.with_overrides(
                    antennas=m, direct_snr=db_to_linear(x))
                res = run_ber(params, spec.trials, rng, workers=workers)
                ys[label], errs[label] = res.ber, res.std_err
            else:  # throughput_vs_snr: one BER measurement serves all etas
                params = spec.base.with_overrides(
                    antennas=m, direct_snr=db_to_linear(x))
                ber, ber_err = run_ber(params, spec.trials, rng,
                                       workers=workers)
                total_bits = spec.base.total_bits
                ys[f"{label},ber"] = ber
                errs[f"{label},ber"] = ber_err
                for eta in spec.etas:
                    scale = total_bits * eta
                    ys[f"{label},eta={eta:g},total"] = codec.decoded_bits(
                        total_bits, eta, spec.direct_ber, ber)
                    errs[f"{label},eta={eta:g},total"] = scale * ber_err
                    ys[f"{label},eta={eta:g},backscatter"] = \
                        scale * (1.0 - ber)
                    errs[f"{label},eta={eta:g},backscatter"] = scale * ber_err
        point = CurvePoint(x=float(x), y=ys, stderr=errs, trials=spec.trials)
        points.append(point)
        if progress is not None:
            progress(point)
    return points


def write_csv(points: list[CurvePoint], path: str) -> None:
    """Write curve points as CSV, atomically (temp file then rename).

    Header `x,series,y,stderr,trials`; one row per (point, series) in sweep
    then series order; UTF-8 with LF line endings. Floats are written with
    repr so identical runs produce identical bytes.
    """
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp_path = tempfile.mkstemp(dir=directory, suffix=".csv.tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for point in points:
                for series, y in point.y.items():
                    writer.writerow([repr(float(point.x)), series,
                                     repr(float(y)),
                                     repr(float(point.stderr[series])),
                                     point.trials])
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise


def _chunk_sizes(total: int, chunk: int) -> list[int]:
    full, rest = divmod(total, chunk)
    return [chunk] * full + ([rest] if rest else [])
