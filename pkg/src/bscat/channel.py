"""Fading draws and received-signal synthesis.

All fading terms are i.i.d. circularly symmetric complex Gaussian with unit
power (real and imaginary parts are independent zero-mean Gaussians with
variance 1/2). One :class:`ChannelRealization` stays fixed for the whole
backscatter frame and is redrawn independently between frames.

Each received sample vector across the M receive antennas is

    y = (h1 + e * h2) * s + sigma

with s the unknown unit-power transmitter symbol, e the current reflection
state of the tag (0 absorb, 1 reflect), h1 the faded direct component and
h2 the faded tag path, and sigma the receiver noise. The batch variants
stack many independent frames for vectorized Monte-Carlo work and are
draw-for-draw identical to the scalar paths for a batch of one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import SimParams

_COMPONENT_STD = 1.0 / np.sqrt(2.0)


def complex_normal(rng: np.random.Generator, shape,
                   std: float = 1.0) -> np.ndarray:
    """Circularly symmetric complex Gaussian draws with E|x|^2 = std^2."""
    out = np.empty(shape, dtype=np.complex128)
    rng.standard_normal(out=out.view(np.float64).reshape(-1))
    scale = std * _COMPONENT_STD
    if scale != 1.0:
        out *= scale
    return out


@dataclass(frozen=True)
class ChannelRealization:
    """One frame's fading draw and the derived signal components."""

    f_r: np.ndarray  # (M,) direct-link fading
    f_b: np.ndarray  # (M,) tag-to-receiver fading
    g_r: complex  # transmitter-to-tag fading
    h1: np.ndarray  # (M,) f_r * sqrt(direct_snr)
    h2: np.ndarray  # (M,) g_r * f_b * sqrt(backscatter_snr)


@dataclass(frozen=True)
class ChannelBatch:
    """Independent channel realizations stacked along the first axis."""

    f_r: np.ndarray  # (B, M)
    f_b: np.ndarray  # (B, M)
    g_r: np.ndarray  # (B,)
    h1: np.ndarray  # (B, M)
    h2: np.ndarray  # (B, M)

    def __len__(self) -> int:
        return self.h1.shape[0]

    def realization(self, i: int) -> ChannelRealization:
        return ChannelRealization(f_r=self.f_r[i], f_b=self.f_b[i],
                                  g_r=complex(self.g_r[i]),
                                  h1=self.h1[i], h2=self.h2[i])


@dataclass(frozen=True)
class ReceivedBlock:
    """Received samples of one backscatter symbol period.

    Rows are the N transmitter sample instants, columns the M antennas.
    """

    samples: np.ndarray  # (N, M)
    index: int = 0  # symbol position within the frame


def sample_channel_batch(params: SimParams, count: int,
                         rng: np.random.Generator) -> ChannelBatch:
    """Draw `count` independent channel realizations.

    Draw order is fixed (direct fading, tag-to-receiver fading,
    transmitter-to-tag fading) so results replay bit-exactly from the seed.
    """
    m = params.antennas
    f_r = complex_normal(rng, (count, m))
    f_b = complex_normal(rng, (count, m))
    g_r = complex_normal(rng, (count,))
    h1 = f_r * np.sqrt(params.direct_snr)
    h2 = g_r[:, None] * f_b * np.sqrt(params.backscatter_snr)
    return ChannelBatch(f_r=f_r, f_b=f_b, g_r=g_r, h1=h1, h2=h2)


def sample_channel(params: SimParams,
                   rng: np.random.Generator) -> ChannelRealization:
    """Draw one channel realization, valid for a single frame."""
    return sample_channel_batch(params, 1, rng).realization(0)


def _as_batch(ch: ChannelRealization) -> ChannelBatch:
    return ChannelBatch(f_r=ch.f_r[None, :], f_b=ch.f_b[None, :],
                        g_r=np.asarray([ch.g_r]),
                        h1=ch.h1[None, :], h2=ch.h2[None, :])


def synthesize_frame_batch(batch: ChannelBatch, states: np.ndarray,
                           params: SimParams, rng: np.random.Generator,
                           samples_per_state: int | None = None) -> np.ndarray:
    """Received samples for a batch of frames sharing per-row channels.

    `states` has shape (B, K) with one reflection state per backscatter
    symbol; each state is held for `samples_per_state` transmitter samples
    (the spreading factor by default). Returns a (B, K, n, M) array. All
    transmitter symbols are drawn first, then the noise.
    """
    n = params.spreading if samples_per_state is None else samples_per_state
    states = np.asarray(states)
    if states.ndim != 2 or states.shape[0] != len(batch):
        raise ValueError("states must have shape (batch, symbols)")
    b, k = states.shape
    s = complex_normal(rng, (b, k, n))
    y = complex_normal(rng, (b, k, n, batch.h1.shape[1]),
                       std=params.noise_scale)
    gain = batch.h1[:, None, :] + states[:, :, None] * batch.h2[:, None, :]
    y += gain[:, :, None, :] * s[..., None]
    return y


def synthesize_block(ch: ChannelRealization, e_bit: int, params: SimParams,
                     rng: np.random.Generator,
                     samples_per_state: int | None = None) -> ReceivedBlock:
    """Synthesize the received block of one backscatter symbol."""
    if e_bit not in (0, 1):
        raise ValueError(f"e_bit must be 0 or 1, got {e_bit}")
    y = synthesize_frame_batch(_as_batch(ch), np.asarray([[e_bit]]), params,
                               rng, samples_per_state)
    return ReceivedBlock(samples=y[0, 0], index=0)


def synthesize_frame(ch: ChannelRealization, encoded_states, params: SimParams,
                     rng: np.random.Generator) -> list[ReceivedBlock]:
    """Synthesize one frame of received blocks over a shared channel.

    `encoded_states` carries the I reflection states of the frame (the
    leading reference state is not transmitted). Symbols and noise are
    independent between blocks.
    """
    states = np.asarray(encoded_states, dtype=np.uint8)
    if states.ndim != 1 or states.size != params.frame_bits:
        raise ValueError(
            f"expected {params.frame_bits} states, got {states.size}")
    y = synthesize_frame_batch(_as_batch(ch), states[None, :], params, rng)
    return [ReceivedBlock(samples=y[0, i], index=i)
            for i in range(states.size)]
