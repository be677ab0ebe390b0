"""Message dividing, backscatter frame format and differential coding.

A message is split into an active stream (sent by the conventional radio)
and a backscatter stream (reflected by the tag). The backscatter payload is
taken from the original message starting at a random first bit and striding
by a fixed step, so the receiver can undo the split knowing only the pair
(first_bit_id, step) that travels inside each backscatter frame.

Frame wire format, most significant bit first in every field::

    [ pilot | first_bit_id | step | payload ]
       8 b        16 b        8 b    I - 32 b      (I configurable, default 100)

Reflection states are differentially encoded: the tag holds a reference
state of 1 before the frame and toggles it for every 1 bit, which lets the
receiver decode from consecutive state decisions without an absolute
reference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_FRAME_BITS = 100
PILOT_BITS = 8
FIRST_BIT_ID_BITS = 16
STEP_BITS = 8
DEFAULT_OVERHEAD_BITS = PILOT_BITS + FIRST_BIT_ID_BITS + STEP_BITS


def as_bits(values) -> np.ndarray:
    """Coerce a bit sequence to a uint8 array, rejecting non-binary values."""
    bits = np.asarray(values, dtype=np.uint8)
    src = np.asarray(values)
    if bits.ndim == 0:
        bits = bits.reshape(1)
        src = src.reshape(1)
    if src.size and not np.isin(src, (0, 1)).all():
        raise ValueError("bit vectors may only contain 0 and 1")
    return bits


def bits_from_hex(text: str) -> np.ndarray:
    """Hex string to a bit vector, 4 bits per digit, MSB first."""
    text = text.strip().lower().removeprefix("0x")
    if not text:
        return np.zeros(0, dtype=np.uint8)
    try:
        digits = [int(c, 16) for c in text]
    except ValueError as exc:
        raise ValueError(f"not a hex string: {text!r}") from exc
    nibbles = np.asarray(digits, dtype=np.uint8)[:, None]
    return ((nibbles >> np.arange(3, -1, -1)) & 1).reshape(-1).astype(np.uint8)


def int_to_bits(value: int, width: int) -> np.ndarray:
    if not 0 <= value < (1 << width):
        raise ValueError(f"{value} does not fit in {width} bits")
    return np.array([(value >> (width - 1 - i)) & 1 for i in range(width)],
                    dtype=np.uint8)


def bits_to_int(bits: np.ndarray) -> int:
    out = 0
    for b in np.asarray(bits, dtype=np.uint8):
        out = (out << 1) | int(b)
    return out


@dataclass(frozen=True)
class FrameLayout:
    """Bit budget of one backscatter frame."""

    total_bits: int = DEFAULT_FRAME_BITS  # I
    pilot_bits: int = PILOT_BITS  # P
    first_bit_id_bits: int = FIRST_BIT_ID_BITS
    step_bits: int = STEP_BITS

    def __post_init__(self) -> None:
        for name in ("total_bits", "pilot_bits", "first_bit_id_bits",
                     "step_bits"):
            if getattr(self, name) < 0 or (name == "total_bits"
                                           and self.total_bits < 1):
                raise ValueError(f"{name} must be non-negative")
        if self.pilot_bits + self.info_bits >= self.total_bits:
            raise ValueError(
                "pilot and dividing-info fields must leave room for payload: "
                f"{self.pilot_bits} + {self.info_bits} >= {self.total_bits}")

    @property
    def info_bits(self) -> int:
        """S, the dividing-information field width."""
        return self.first_bit_id_bits + self.step_bits

    @property
    def payload_bits(self) -> int:
        return self.total_bits - self.pilot_bits - self.info_bits

    def pilot_pattern(self) -> np.ndarray:
        """Alternating 1010... training prefix."""
        return ((np.arange(self.pilot_bits) + 1) % 2).astype(np.uint8)


@dataclass(frozen=True)
class SplitMessage:
    """One message divided into its active and backscatter streams."""

    active_bits: np.ndarray
    backscatter_payload: np.ndarray
    first_bit_id: int
    step: int  # K, stride in message bits between extracted bits


@dataclass(frozen=True)
class BackscatterFrame:
    """Frame bits plus the reflection states the tag drives."""

    bits: np.ndarray  # (I,) pilot | first_bit_id | step | payload
    states: np.ndarray  # (I + 1,) differential states, leading reference 1


def _extraction_positions(length: int, first_bit_id: int, step: int,
                          count: int) -> np.ndarray:
    if step < 1:
        raise ValueError(f"step must be >= 1, got {step}")
    if count < 0:
        raise ValueError("count must be >= 0")
    if count == 0:
        return np.zeros(0, dtype=np.intp)
    positions = first_bit_id + step * np.arange(count, dtype=np.intp)
    if first_bit_id < 0 or positions[-1] >= length:
        raise ValueError(
            f"extraction positions {first_bit_id}..{int(positions[-1])} "
            f"(step {step}) fall outside a {length}-bit message")
    return positions


def split_message(original, first_bit_id: int, step: int,
                  count: int) -> SplitMessage:
    """Divide a message: `count` strided bits go to the backscatter stream.

    The backscatter payload is original[first_bit_id + j * step] for
    j = 0..count-1; everything else stays in the active stream in order.
    """
    bits = as_bits(original)
    positions = _extraction_positions(bits.size, first_bit_id, step, count)
    mask = np.zeros(bits.size, dtype=bool)
    mask[positions] = True
    return SplitMessage(active_bits=bits[~mask],
                        backscatter_payload=bits[mask],
                        first_bit_id=first_bit_id, step=step)


def merge_message(active, payload, first_bit_id: int, step: int) -> np.ndarray:
    """Inverse of :func:`split_message` given the same dividing info."""
    active = as_bits(active)
    payload = as_bits(payload)
    total = active.size + payload.size
    positions = _extraction_positions(total, first_bit_id, step, payload.size)
    mask = np.zeros(total, dtype=bool)
    mask[positions] = True
    out = np.empty(total, dtype=np.uint8)
    out[mask] = payload
    out[~mask] = active
    return out


def random_split(original, ratio: float, rng: np.random.Generator,
                 step: int | None = None) -> SplitMessage:
    """Split off `round(ratio * len)` bits at a seeded random start position.

    The stride defaults to the largest value that spreads the extracted bits
    across the whole message. Determinism lives entirely in `rng`.
    """
    bits = as_bits(original)
    if not 0.0 <= ratio <= 1.0:
        raise ValueError("ratio must be within [0, 1]")
    count = int(round(ratio * bits.size))
    if count == 0:
        return SplitMessage(bits.copy(), np.zeros(0, dtype=np.uint8), 0,
                            step if step else 1)
    if step is None:
        step = max(bits.size // count, 1)
    max_first = bits.size - 1 - (count - 1) * step
    if max_first < 0:
        raise ValueError(
            f"cannot place {count} bits with step {step} in {bits.size} bits")
    first = int(rng.integers(0, max_first + 1))
    return split_message(bits, first, step, count)


def differential_encode(bits) -> np.ndarray:
    """Bits to reflection states along the last axis, reference state 1.

    Output has one extra leading entry (the reference), so a length-L input
    yields L + 1 states: states[i] = states[i-1] XOR bits[i-1].
    """
    b = as_bits(bits) if np.ndim(bits) <= 1 else np.asarray(bits, dtype=np.uint8)
    lead = np.ones(b.shape[:-1] + (1,), dtype=np.uint8)
    if b.shape[-1] == 0:
        return lead
    states = np.bitwise_xor.accumulate(b, axis=-1) ^ 1
    return np.concatenate([lead, states], axis=-1)


def differential_decode(states) -> np.ndarray:
    """Recover bits from consecutive states; exact inverse of encoding."""
    s = np.asarray(states, dtype=np.uint8)
    if s.shape[-1] < 1:
        raise ValueError("need at least the leading reference state")
    return s[..., :-1] ^ s[..., 1:]


def build_frames(payload, layout: FrameLayout, first_bit_id: int,
                 step: int) -> list[BackscatterFrame]:
    """Pack a payload into differentially encoded backscatter frames.

    The final frame is zero-padded; the payload bit length is not stored in
    the frame and must travel out of band (see :func:`parse_frames`).
    """
    payload = as_bits(payload)
    if not 0 <= first_bit_id < (1 << layout.first_bit_id_bits):
        raise ValueError(
            f"first_bit_id {first_bit_id} does not fit "
            f"{layout.first_bit_id_bits} bits")
    if not 1 <= step < (1 << layout.step_bits):
        raise ValueError(f"step {step} does not fit {layout.step_bits} bits")
    if payload.size == 0:
        return []
    header = np.concatenate([
        layout.pilot_pattern(),
        int_to_bits(first_bit_id, layout.first_bit_id_bits),
        int_to_bits(step, layout.step_bits),
    ])
    per_frame = layout.payload_bits
    n_frames = -(-payload.size // per_frame)
    padded = np.zeros(n_frames * per_frame, dtype=np.uint8)
    padded[: payload.size] = payload
    frames = []
    for k in range(n_frames):
        bits = np.concatenate([header, padded[k * per_frame:(k + 1) * per_frame]])
        frames.append(BackscatterFrame(bits=bits,
                                       states=differential_encode(bits)))
    return frames


def parse_frames(frame_bits, layout: FrameLayout,
                 payload_len: int) -> tuple[int, int, np.ndarray]:
    """Inverse of :func:`build_frames` on clean frame bit vectors.

    `payload_len` trims the zero padding of the final frame. Returns
    (first_bit_id, step, payload). Raises on pilot mismatch, inconsistent
    dividing info between frames, or a payload length the frames cannot hold.
    """
    frames = [as_bits(f) for f in frame_bits]
    capacity = len(frames) * layout.payload_bits
    if not 0 <= payload_len <= capacity:
        raise ValueError(
            f"payload_len {payload_len} exceeds capacity {capacity}")
    if payload_len == 0 and not frames:
        return 0, 1, np.zeros(0, dtype=np.uint8)
    header_end = layout.pilot_bits + layout.info_bits
    first_bit_id = step = None
    chunks = []
    for k, bits in enumerate(frames):
        if bits.size != layout.total_bits:
            raise ValueError(
                f"frame {k} has {bits.size} bits, expected {layout.total_bits}")
        if not np.array_equal(bits[: layout.pilot_bits], layout.pilot_pattern()):
            raise ValueError(f"frame {k}: pilot pattern mismatch")
        fid = bits_to_int(bits[layout.pilot_bits:
                               layout.pilot_bits + layout.first_bit_id_bits])
        stp = bits_to_int(bits[layout.pilot_bits + layout.first_bit_id_bits:
                               header_end])
        if first_bit_id is None:
            first_bit_id, step = fid, stp
        elif (fid, stp) != (first_bit_id, step):
            raise ValueError(f"frame {k}: dividing info differs from frame 0")
        chunks.append(bits[header_end:])
    payload = np.concatenate(chunks)[:payload_len]
    return first_bit_id, step, payload


def decoded_bits(total: float, split_ratio: float, direct_ber: float,
                 backscatter_ber: float) -> float:
    """Expected successfully decoded bits across both streams.

    Direct stream delivers total*(1-split_ratio)*(1-direct_ber) bits and the
    backscatter stream total*split_ratio*(1-backscatter_ber).
    """
    if total < 0:
        raise ValueError("total must be >= 0")
    for name, value in (("split_ratio", split_ratio),
                        ("direct_ber", direct_ber),
                        ("backscatter_ber", backscatter_ber)):
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"{name} must be within [0, 1], got {value}")
    return (total * (1.0 - split_ratio) * (1.0 - direct_ber)
            + total * split_ratio * (1.0 - backscatter_ber))
