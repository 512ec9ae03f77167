"""Simulated measurement node: appliance model, relay, LEDs, and report loop.

A node is a value stepped by the simulation clock. Each tick it may emit one
REPORT frame; control frames and the local reset button mutate the relay and
the LED block. The red LED is lit exactly while the relay is open, green is
lit whenever the node runs, yellow only on a tick that transmits.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum

from .metering import MeterModel, decode_count, meter_sample
from .protocol import Command, Frame, report_frame

FAST_INTERVAL_S = 10.0
SLOW_INTERVAL_S = 60.0

# The physical node draws roughly this much itself while transmitting. It
# meters the appliance, not itself, so this never enters reported power;
# the runner surfaces it as a scenario statistic.
NODE_SELF_DRAW_W = 1.5


class ApplianceMode(str, Enum):
    OFF = "off"
    STANDBY = "standby"
    ACTIVE = "active"


@dataclass(frozen=True)
class ModePower:
    mean_w: float
    jitter_stddev_w: float = 0.0


@dataclass
class ApplianceProfile:
    """Scripted power behavior driving one node's meter.

    schedule lists (at_seconds, mode) switch points; before the first entry
    the appliance is off. OFF always draws exactly 0 W.
    """

    label: str
    modes: dict[ApplianceMode, ModePower] = field(default_factory=dict)
    schedule: list[tuple[float, ApplianceMode]] = field(default_factory=list)

    def __post_init__(self) -> None:
        off = self.modes.get(ApplianceMode.OFF)
        if off is not None and (off.mean_w != 0 or off.jitter_stddev_w != 0):
            raise ValueError("OFF mode must draw exactly 0 W")
        standby = self.modes.get(ApplianceMode.STANDBY)
        active = self.modes.get(ApplianceMode.ACTIVE)
        if standby and active and not standby.mean_w < active.mean_w:
            raise ValueError("standby mean must be below active mean")
        for mode_power in self.modes.values():
            if mode_power.mean_w < 0 or mode_power.jitter_stddev_w < 0:
                raise ValueError("mode power and jitter must be >= 0")
        last_at = None
        for at, mode in self.schedule:
            if last_at is not None and at <= last_at:
                raise ValueError("schedule timestamps must be strictly increasing")
            if mode is not ApplianceMode.OFF and mode not in self.modes:
                raise ValueError(f"schedule uses undefined mode {mode.value!r}")
            last_at = at

    def mode_at(self, now: float) -> ApplianceMode:
        current = ApplianceMode.OFF
        for at, mode in self.schedule:
            if at > now:
                break
            current = mode
        return current

    def power_at(self, now: float, rng: random.Random) -> float:
        mode = self.mode_at(now)
        if mode is ApplianceMode.OFF:
            return 0.0
        mode_power = self.modes[mode]
        watts = mode_power.mean_w
        if mode_power.jitter_stddev_w > 0:
            watts += rng.gauss(0.0, mode_power.jitter_stddev_w)
        return max(0.0, watts)


@dataclass
class Leds:
    green: bool = True
    yellow: bool = False
    red: bool = False


@dataclass
class NodeState:
    mac: int
    relay_closed: bool = True
    leds: Leds = field(default_factory=Leds)
    seq: int = 0
    report_interval_s: float = 60.0
    adaptive: bool = False
    active_hint_w: float = 50.0
    next_report_at: float | None = None
    last_power_w: float = 0.0

    def __post_init__(self) -> None:
        if self.report_interval_s <= 0:
            raise ValueError("report_interval_s must be positive")
        if self.next_report_at is None:
            self.next_report_at = self.report_interval_s


def adaptive_report_interval(node: NodeState, last_power_w: float, active_hint_w: float) -> float:
    """Fast cadence while the load looks active, slow cadence otherwise."""
    return FAST_INTERVAL_S if last_power_w >= active_hint_w else SLOW_INTERVAL_S


def _measure(node: NodeState, appliance: ApplianceProfile, now: float,
             model: MeterModel, rng: random.Random) -> Frame:
    load_w = appliance.power_at(now, rng) if node.relay_closed else 0.0
    sample = meter_sample(load_w, model, rng)
    frame = report_frame(
        node.mac, node.seq, sample.count,
        relay_on=node.relay_closed, saturated=sample.saturated,
    )
    node.seq = (node.seq + 1) % 256
    node.last_power_w = decode_count(sample.count)
    node.leds.yellow = True
    return frame


def node_tick(node: NodeState, appliance: ApplianceProfile, now: float,
              model: MeterModel, rng: random.Random) -> Frame | None:
    """Advance the node to `now`; emit a REPORT frame when a report is due.

    An open relay forces the measured load to 0 W; the node keeps reporting
    so the server can still display it.
    """
    if now < node.next_report_at:
        node.leds.yellow = False
        return None
    frame = _measure(node, appliance, now, model, rng)
    if node.adaptive:
        interval = adaptive_report_interval(node, node.last_power_w, node.active_hint_w)
    else:
        interval = node.report_interval_s
    node.next_report_at += interval
    return frame


def poll_response(node: NodeState, appliance: ApplianceProfile, now: float,
                  model: MeterModel, rng: random.Random) -> Frame:
    """Answer a server POLL with a fresh measurement, outside the self-timed cadence."""
    return _measure(node, appliance, now, model, rng)


def handle_control(node: NodeState, command: Command) -> NodeState:
    """Apply a CONTROL command: OFF opens the relay (red LED on), ON closes it."""
    if command is Command.OFF:
        node.relay_closed = False
        node.leds.red = True
    else:
        node.relay_closed = True
        node.leds.red = False
    return node


def press_reset(node: NodeState) -> NodeState:
    """Local push-button: restore power regardless of prior state."""
    node.relay_closed = True
    node.leds.red = False
    return node
