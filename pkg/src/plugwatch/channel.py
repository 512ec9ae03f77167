"""Star-topology WPAN model with slotted delivery.

Contention mode drops every uplink frame that shares a slot with another;
polled mode is collision-free by construction. Downlink is always delivered:
the server is the only transmitter toward the nodes. The radio's data sheet
numbers are kept as documentation constants, not simulated physics.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable

from .protocol import Frame, poll_frame

MAX_NODES = 254

# 802.15.4 @ 2.4 GHz context for the model's scale; not used in computation.
DATA_RATE_BPS = 250_000
RECEIVER_SENSITIVITY_DBM = -92
INDOOR_RANGE_M = 30

STATS_CSV_HEADER = "mode,slots,delivered,collided,lost,mean_latency_s"


class ChannelMode(str, Enum):
    CONTENTION = "contention"
    POLLED = "polled"


class ChannelFullError(ValueError):
    """More nodes registered than the star topology supports."""


@dataclass(frozen=True)
class ChannelConfig:
    mode: ChannelMode = ChannelMode.CONTENTION
    slot_s: float = 1.0
    loss_prob: float = 0.0
    max_nodes: int = MAX_NODES
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.slot_s <= 0:
            raise ValueError("slot_s must be positive")
        if not 0.0 <= self.loss_prob <= 1.0:
            raise ValueError("loss_prob must be in [0, 1]")
        if not 0 < self.max_nodes <= MAX_NODES:
            raise ValueError(f"max_nodes must be in 1..{MAX_NODES}")


@dataclass
class LinkStats:
    delivered: int = 0
    collided: int = 0
    lost: int = 0
    slots: int = 0
    latency_s: dict[int, list[float]] = field(default_factory=dict)

    @property
    def offered(self) -> int:
        return self.delivered + self.collided + self.lost

    def record_latency(self, mac: int, seconds: float) -> None:
        self.latency_s.setdefault(mac, []).append(seconds)

    def mean_latency_s(self) -> float:
        samples = [s for per_node in self.latency_s.values() for s in per_node]
        return sum(samples) / len(samples) if samples else 0.0

    def to_csv(self, mode: ChannelMode) -> str:
        row = (
            f"{mode.value},{self.slots},{self.delivered},{self.collided},"
            f"{self.lost},{self.mean_latency_s():.3f}"
        )
        return f"{STATS_CSV_HEADER}\n{row}\n"


class Channel:
    """One star network: registered nodes, a seeded loss source, and stats."""

    def __init__(self, config: ChannelConfig = ChannelConfig()) -> None:
        self.config = config
        self.stats = LinkStats()
        self._rng = random.Random(f"{config.rng_seed}:channel")
        self._macs: list[int] = []

    @property
    def macs(self) -> list[int]:
        return list(self._macs)

    def register(self, mac: int) -> None:
        if mac in self._macs:
            raise ValueError(f"mac {mac:#x} already registered")
        if len(self._macs) >= self.config.max_nodes:
            raise ChannelFullError(f"star supports at most {self.config.max_nodes} nodes")
        self._macs.append(mac)

    def step_contention(self, transmissions: list[tuple[int, Frame]]) -> list[Frame]:
        """One slot of unprompted uplink. Two or more frames in the slot all collide;
        a sole frame survives the loss draw."""
        if self.config.mode is not ChannelMode.CONTENTION:
            raise ValueError("channel is not in contention mode")
        self.stats.slots += 1
        if not transmissions:
            return []
        if len(transmissions) >= 2:
            self.stats.collided += len(transmissions)
            return []
        mac, frame = transmissions[0]
        if self.config.loss_prob > 0 and self._rng.random() < self.config.loss_prob:
            self.stats.lost += 1
            return []
        self.stats.delivered += 1
        self.stats.record_latency(mac, 0.0)
        return [frame]

    def deliver_downlink(self, frame: Frame) -> Frame:
        # Sole transmitter in a star: downlink cannot collide and is not lossed.
        return frame

    def run_polled_round(
        self,
        macs: Iterable[int],
        respond: Callable[[int, Frame], Frame | None],
    ) -> list[Frame]:
        """Poll every node in mac order, one slot for the poll and one for the
        reply; collision-free by construction. Returns delivered reply frames."""
        if self.config.mode is not ChannelMode.POLLED:
            raise ValueError("channel is not in polled mode")
        delivered: list[Frame] = []
        for position, mac in enumerate(sorted(macs)):
            self.stats.slots += 2
            reply = respond(mac, self.deliver_downlink(poll_frame(mac)))
            if reply is None:
                continue
            if self.config.loss_prob > 0 and self._rng.random() < self.config.loss_prob:
                self.stats.lost += 1
                continue
            self.stats.delivered += 1
            self.stats.record_latency(mac, (2 * position + 1) * self.config.slot_s)
            delivered.append(reply)
        return delivered


def jittered_offset(mac: int, interval_s: float, seed: int) -> float:
    """Deterministic per-mac phase offset in [0, interval_s), de-correlating
    nodes that would otherwise transmit in lockstep."""
    if interval_s <= 0:
        raise ValueError("interval_s must be positive")
    return random.Random(f"{seed}:offset:{mac:016x}").random() * interval_s
