"""Power/count codec, simulated meter sampling, and energy arithmetic.

The wire carries appliance power as a two-byte pulse count at 0.02 W per
count, so the largest representable load is 1310.70 W. Everything here is
a pure function over value inputs and safe to call concurrently.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

JOULES_PER_KWH = 3_600_000.0


@dataclass(frozen=True)
class CountCodec:
    """Quantization constants of the two-byte power counter."""

    resolution_w: float = 0.02
    max_count: int = 0xFFFF

    def __post_init__(self) -> None:
        if self.resolution_w <= 0:
            raise ValueError("resolution_w must be positive")
        if not 0 < self.max_count <= 0xFFFF:
            raise ValueError("max_count must fit in 16 bits")

    @property
    def max_power_w(self) -> float:
        return self.max_count * self.resolution_w


CODEC = CountCodec()


class MeterSample(NamedTuple):
    count: int
    saturated: bool


@dataclass(frozen=True)
class MeterModel:
    """Measurement behavior of a simulated meter.

    noise_stddev_w is Gaussian jitter applied to the true power before
    quantization; zero makes the meter fully deterministic. gate_s is the
    measurement gate, equal to the node's report interval.
    """

    noise_stddev_w: float = 0.0
    gate_s: float = 60.0

    def __post_init__(self) -> None:
        if self.noise_stddev_w < 0:
            raise ValueError("noise_stddev_w must be >= 0")
        if self.gate_s <= 0:
            raise ValueError("gate_s must be positive")


def encode_power(power_w: float, codec: CountCodec = CODEC) -> MeterSample:
    """Quantize watts to a count, rounding half up; clamp at the 16-bit ceiling.

    Returns (count, saturated) where saturated is set iff clamping occurred.
    """
    if not math.isfinite(power_w) or power_w < 0:
        raise ValueError(f"power must be finite and >= 0, got {power_w!r}")
    # Exact rational rounding against the decimal step (1/50 W), so ties round
    # half up; plain float division misrounds at quantization boundaries.
    step = Fraction(str(codec.resolution_w))
    raw = math.floor(Fraction(power_w) / step + Fraction(1, 2))
    if raw > codec.max_count:
        return MeterSample(codec.max_count, True)
    return MeterSample(raw, False)


def decode_count(count: int, codec: CountCodec = CODEC) -> float:
    """Inverse of encode_power: count * resolution, exact for every 16-bit value."""
    if not 0 <= count <= codec.max_count:
        raise ValueError(f"count out of range: {count!r}")
    return count * codec.resolution_w


def meter_sample(
    true_power_w: float,
    model: MeterModel = MeterModel(),
    rng: random.Random | int | None = None,
) -> MeterSample:
    """One gated measurement of true_power_w, with the model's noise applied.

    rng may be a random.Random, a seed, or None (no noise source needed when
    noise_stddev_w is zero). Deterministic for a given seed.
    """
    if not math.isfinite(true_power_w) or true_power_w < 0:
        raise ValueError(f"power must be finite and >= 0, got {true_power_w!r}")
    observed = true_power_w
    if model.noise_stddev_w > 0:
        if rng is None:
            raise ValueError("a noisy meter needs an rng or seed")
        if isinstance(rng, int):
            rng = random.Random(rng)
        observed = max(0.0, true_power_w + rng.gauss(0.0, model.noise_stddev_w))
    return encode_power(observed)


@dataclass
class EnergyLedger:
    """Time-ordered (timestamp, power_w) samples for one integration run.

    gap_cap_s bounds the duration any single sample may represent, so a node
    that stops reporting cannot inflate the energy total.
    """

    samples: list[tuple[float, float]] = field(default_factory=list)
    gap_cap_s: float = 120.0


def integrate_energy(ledger: EnergyLedger, start: float, end: float) -> float:
    """Riemann-sum energy in joules over [start, end).

    Each in-window sample is credited power * duration, with duration the
    smaller of the gap to the next sample, the remaining window, and the
    ledger's gap cap.
    """
    if start > end:
        raise ValueError("start must be <= end")
    if ledger.gap_cap_s <= 0:
        raise ValueError("gap_cap_s must be positive")
    samples = ledger.samples
    prev_ts = None
    for ts, power_w in samples:
        if prev_ts is not None and ts <= prev_ts:
            raise ValueError(f"ledger timestamps must be strictly increasing at t={ts}")
        if power_w < 0:
            raise ValueError(f"negative power in ledger at t={ts}")
        prev_ts = ts
    terms = []
    for i, (ts, power_w) in enumerate(samples):
        if not start <= ts < end:
            continue
        next_ts = samples[i + 1][0] if i + 1 < len(samples) else math.inf
        duration = min(next_ts - ts, end - ts, ledger.gap_cap_s)
        terms.append(power_w * duration)
    return math.fsum(terms)


def joules_to_kwh(joules: float) -> float:
    if joules < 0:
        raise ValueError("joules must be >= 0")
    return joules / JOULES_PER_KWH


def energy_cost(kwh: float, price_per_kwh: float) -> float:
    """Cost of kwh at the user-set price, reported at 4 decimal places."""
    if kwh < 0:
        raise ValueError("kwh must be >= 0")
    if price_per_kwh < 0:
        raise ValueError("price must be >= 0")
    return round(kwh * price_per_kwh, 4)
