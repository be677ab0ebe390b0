"""Physical and simulation parameters of the backscatter link.

The simulator itself runs on two dimensionless SNRs: the direct
transmitter-to-receiver SNR (noise has unit variance, so this equals the
average received power) and the relative gain of the reflected
transmitter-tag-receiver path. :class:`LinkBudget` is an optional physical
front-end that produces both from antenna gains, distances and the tag
reflection coefficient; :class:`SimParams` carries everything the Monte-Carlo
machinery consumes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

from .codec import DEFAULT_OVERHEAD_BITS

_NEG_INF = float("-inf")


def db_to_linear(x_db: float) -> float:
    """Convert a decibel power ratio to a linear one."""
    return 10.0 ** (x_db / 10.0)


def linear_to_db(x: float) -> float:
    """Convert a linear power ratio to decibels.

    Zero maps to the -inf sentinel so that round-tripping absorbing tags
    (zero reflected power) stays well defined. Negative ratios are invalid.
    """
    if x < 0:
        raise ValueError(f"linear power ratio must be >= 0, got {x}")
    if x == 0:
        return _NEG_INF
    return 10.0 * math.log10(x)


@dataclass(frozen=True)
class LinkBudget:
    """Physical parameters of one transmitter/tag/receiver deployment."""

    transmit_power: float  # W
    wavelength: float  # m
    dist_tx_rx: float  # m, transmitter -> receiver
    dist_tx_tag: float  # m, transmitter -> tag
    dist_tag_rx: float  # m, tag -> receiver
    gain_tx: float = 1.0  # linear
    gain_rx: float = 1.0  # linear
    gain_tag: float = 1.0  # linear
    path_loss_exponent: float = 2.0
    reflection_coefficient: complex = 1.0  # |gamma| <= 1

    def __post_init__(self) -> None:
        for name in ("transmit_power", "wavelength", "dist_tx_rx",
                     "dist_tx_tag", "dist_tag_rx", "gain_tx", "gain_rx",
                     "gain_tag"):
            value = getattr(self, name)
            if not value > 0:
                raise ValueError(f"{name} must be > 0, got {value}")
        if self.path_loss_exponent <= 0:
            raise ValueError("path_loss_exponent must be > 0")
        if abs(self.reflection_coefficient) > 1.0 + 1e-12:
            raise ValueError("reflection_coefficient magnitude must be <= 1")

    @property
    def aperture_factor(self) -> float:
        """(wavelength / 4 pi)^2, the free-space aperture scaling."""
        return (self.wavelength / (4.0 * math.pi)) ** 2


def compute_direct_snr(budget: LinkBudget) -> float:
    """Average received power of the direct link, in linear units.

    The receiver noise is unit variance, so this is also the direct-link SNR.
    """
    return (budget.aperture_factor * budget.transmit_power * budget.gain_tx
            * budget.gain_rx / budget.dist_tx_rx ** budget.path_loss_exponent)


def compute_relative_backscatter_gain(budget: LinkBudget) -> float:
    """Gain of the reflected tag path relative to the direct link.

    Multiplying this by the direct SNR gives the backscatter-link SNR.
    """
    kappa = budget.aperture_factor
    gamma2 = abs(budget.reflection_coefficient) ** 2
    v = budget.path_loss_exponent
    return (kappa * gamma2 * budget.gain_tag ** 2 * budget.dist_tx_rx ** v
            / (budget.dist_tx_tag ** v * budget.dist_tag_rx ** v))


@dataclass(frozen=True)
class SimParams:
    """Dimensionless knobs of the link-level simulation.

    Immutable; share freely across threads. `noise_scale` is a test hook
    (0 disables receiver noise entirely), normal operation keeps it at 1.
    """

    antennas: int = 10  # M, receive antennas
    spreading: int = 5  # N, transmitter samples per backscatter bit
    frame_bits: int = 100  # I, bits per backscatter frame
    prior: float = 0.5  # probability of backscattering a 0 state
    direct_snr: float = db_to_linear(5.0)  # linear
    relative_backscatter_gain: float = db_to_linear(-10.0)  # linear
    split_ratio: float = 0.1  # fraction of the message sent via the tag
    total_bits: int = 1000  # message size for throughput accounting
    seed: int = 2025
    trials: int = 100_000
    noise_scale: float = 1.0

    def __post_init__(self) -> None:
        if self.antennas < 1:
            raise ValueError("antennas must be >= 1")
        if self.spreading < 1:
            raise ValueError("spreading must be >= 1")
        if self.frame_bits <= DEFAULT_OVERHEAD_BITS:
            raise ValueError(
                f"frame_bits must exceed the {DEFAULT_OVERHEAD_BITS}-bit "
                f"pilot/dividing-info overhead, got {self.frame_bits}")
        if not 0.0 <= self.prior <= 1.0:
            raise ValueError(f"prior must be within [0, 1], got {self.prior}")
        if not self.direct_snr > 0:
            raise ValueError("direct_snr must be > 0")
        if self.relative_backscatter_gain < 0:
            raise ValueError("relative_backscatter_gain must be >= 0")
        if not 0.0 <= self.split_ratio <= 1.0:
            raise ValueError("split_ratio must be within [0, 1]")
        if self.total_bits < 1:
            raise ValueError("total_bits must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.noise_scale < 0:
            raise ValueError("noise_scale must be >= 0")

    @property
    def backscatter_snr(self) -> float:
        """SNR of the reflected path: relative gain times direct SNR."""
        return self.relative_backscatter_gain * self.direct_snr

    @property
    def prior_one(self) -> float:
        """Probability of backscattering a 1 state."""
        return 1.0 - self.prior

    def with_overrides(self, **changes) -> "SimParams":
        return replace(self, **changes)


_SIM_FIELDS = {f.name for f in fields(SimParams)}
_DB_FIELDS = {"direct_snr", "relative_backscatter_gain"}
_BUDGET_FIELDS = {f.name for f in fields(LinkBudget)}


def link_budget_from_mapping(data: dict) -> LinkBudget:
    """Build a LinkBudget from parsed JSON with snake_case keys."""
    unknown = set(data) - _BUDGET_FIELDS
    if unknown:
        raise ValueError(f"unknown link_budget key: {sorted(unknown)[0]}")
    kwargs = dict(data)
    gamma = kwargs.get("reflection_coefficient")
    if isinstance(gamma, (list, tuple)):  # [re, im] pair in JSON
        if len(gamma) != 2:
            raise ValueError("reflection_coefficient must be a number or "
                             "[real, imag] pair")
        kwargs["reflection_coefficient"] = complex(gamma[0], gamma[1])
    return LinkBudget(**kwargs)


def sim_params_from_mapping(data: dict, base: SimParams | None = None) -> SimParams:
    """Build SimParams from parsed JSON with snake_case keys.

    SNR fields are accepted either linear (`direct_snr`) or with an explicit
    `_db` suffix (`direct_snr_db`); giving both forms of one field is an
    error. A nested `link_budget` object may supply both SNRs instead.
    """
    base = base if base is not None else SimParams()
    known = _SIM_FIELDS | {f + "_db" for f in _DB_FIELDS} | {"link_budget"}
    changes: dict = {}
    for key, value in data.items():
        if key not in known:
            raise ValueError(f"unknown key: {key}")
        if key == "link_budget":
            continue
        if key.endswith("_db") and key[:-3] in _DB_FIELDS:
            plain = key[:-3]
            if plain in data:
                raise ValueError(f"give either {plain} or {key}, not both")
            changes[plain] = db_to_linear(float(value))
        else:
            changes[key] = value
    if "link_budget" in data:
        budget = link_budget_from_mapping(data["link_budget"])
        for field in _DB_FIELDS:
            if field in changes:
                raise ValueError(
                    f"{field} conflicts with link_budget; give one or the other")
        changes["direct_snr"] = compute_direct_snr(budget)
        changes["relative_backscatter_gain"] = \
            compute_relative_backscatter_gain(budget)
    return replace(base, **changes)
