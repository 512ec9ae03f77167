"""Central server: ingestion pipeline, standby power-save engine, control
dispatch, timed control, and energy queries.

All state mutation is serialized under one lock, so ingestion and user
commands (from the CLI runner or the HTTP gateway) interleave safely;
queries snapshot under the same lock.
"""

from __future__ import annotations

import math
import statistics
import threading
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any

from . import events
from .events import ApiEvent, EventBus
from .metering import EnergyLedger, decode_count, energy_cost, integrate_energy, joules_to_kwh
from .protocol import Command, Frame, FrameKind, ProtocolError, control_frame, decode_frame
from .storage import CsvStore, PowerReading, format_timestamp

SECONDS_PER_DAY = 86_400

DEFAULT_CALIBRATION_SAMPLES = 10
DEFAULT_THRESHOLD_MULTIPLIER = 1.2
DEFAULT_CONSECUTIVE_REQUIRED = 30


class UnknownNodeError(KeyError):
    def __init__(self, mac: int) -> None:
        super().__init__(f"no node registered with mac {mac:016x}")
        self.mac = mac


class StandbyPhase(str, Enum):
    DISABLED = "disabled"
    CALIBRATING = "calibrating"
    ARMED = "armed"


class StandbyAction(Enum):
    NONE = 0
    SEND_OFF = 1


@dataclass(frozen=True)
class StandbyState:
    """Per-node power-save state machine.

    Calibration averages samples_needed readings, arms with threshold
    mean * multiplier, then counts consecutive below-threshold readings;
    reaching consecutive_required triggers the shutoff and disables the
    engine until the user re-enables it.
    """

    phase: StandbyPhase = StandbyPhase.DISABLED
    samples_needed: int = DEFAULT_CALIBRATION_SAMPLES
    samples: tuple[float, ...] = ()
    multiplier: float = DEFAULT_THRESHOLD_MULTIPLIER
    threshold_w: float | None = None
    consecutive_required: int = DEFAULT_CONSECUTIVE_REQUIRED
    below_count: int = 0


def standby_step(state: StandbyState, power_w: float) -> tuple[StandbyState, StandbyAction]:
    """Feed one reading through the power-save engine; pure.

    Any reading at or above the threshold resets the below-threshold count.
    The shutoff fires exactly when the count reaches consecutive_required,
    after which the engine returns to DISABLED.
    """
    if power_w < 0:
        raise ValueError("power must be >= 0")
    if state.phase is StandbyPhase.DISABLED:
        return state, StandbyAction.NONE
    if state.phase is StandbyPhase.CALIBRATING:
        samples = state.samples + (power_w,)
        if len(samples) >= state.samples_needed:
            threshold = state.multiplier * statistics.fmean(samples)
            armed = replace(
                state, phase=StandbyPhase.ARMED, samples=samples,
                threshold_w=threshold, below_count=0,
            )
            return armed, StandbyAction.NONE
        return replace(state, samples=samples), StandbyAction.NONE
    # ARMED
    assert state.threshold_w is not None
    if power_w < state.threshold_w:
        below = state.below_count + 1
        if below >= state.consecutive_required:
            done = replace(
                state, phase=StandbyPhase.DISABLED, samples=(),
                threshold_w=None, below_count=0,
            )
            return done, StandbyAction.SEND_OFF
        return replace(state, below_count=below), StandbyAction.NONE
    return replace(state, below_count=0), StandbyAction.NONE


@dataclass(frozen=True)
class TimedWindow:
    """Daily off/on window in seconds-of-day; may wrap midnight."""

    off_at: int
    on_at: int

    def __post_init__(self) -> None:
        for value in (self.off_at, self.on_at):
            if not 0 <= value < SECONDS_PER_DAY:
                raise ValueError("window boundaries must be within one day")
        if self.off_at == self.on_at:
            raise ValueError("window must have nonzero length")

    def length_s(self) -> int:
        return (self.on_at - self.off_at) % SECONDS_PER_DAY

    def covers(self, second_of_day: int) -> bool:
        return (second_of_day - self.off_at) % SECONDS_PER_DAY < self.length_s()


def windows_overlap(a: TimedWindow, b: TimedWindow) -> bool:
    # Circular arcs intersect iff one contains the start of the other.
    return a.covers(b.off_at) or b.covers(a.off_at)


@dataclass
class NodeRecord:
    mac: int
    label: str
    relay_believed_on: bool = True
    last_reading: PowerReading | None = None
    last_seq: int | None = None
    standby: StandbyState = field(default_factory=StandbyState)
    timed_windows: list[TimedWindow] = field(default_factory=list)
    timed_checked_at: float | None = None


@dataclass(frozen=True)
class TimedAction:
    command: Command
    at: int


def apply_timed_windows(record: NodeRecord, now: float) -> list[TimedAction]:
    """Edge-triggered boundary check: one OFF per off_at crossing, one ON per
    on_at crossing since the record was last evaluated. The first evaluation
    only sets the baseline."""
    if record.timed_checked_at is None:
        record.timed_checked_at = now
        return []
    prev = record.timed_checked_at
    record.timed_checked_at = now
    if now <= prev or not record.timed_windows:
        return []
    actions: list[TimedAction] = []
    for window in record.timed_windows:
        for second_of_day, command in ((window.off_at, Command.OFF), (window.on_at, Command.ON)):
            # Crossings of `second_of_day + k*day` inside (prev, now].
            first_day = math.floor((prev - second_of_day) / SECONDS_PER_DAY) + 1
            boundary = second_of_day + first_day * SECONDS_PER_DAY
            while boundary <= now:
                actions.append(TimedAction(command, int(boundary)))
                boundary += SECONDS_PER_DAY
    actions.sort(key=lambda a: a.at)
    return actions


@dataclass
class IngestResult:
    accepted: bool = False
    reason: str | None = None
    reading: PowerReading | None = None
    control: Frame | None = None


@dataclass(frozen=True)
class EnergyQuery:
    joules: float
    kwh: float
    cost: float | None = None


def energy_from_readings(rows: list[PowerReading], start: float, end: float, *,
                         gap_cap_s: float = 120.0,
                         price_per_kwh: float | None = None) -> EnergyQuery:
    """Per-node gap-capped integration over [start, end), summed across nodes.

    Shared by the server's query path and the offline CLI so both always
    report identical numbers for the same store.
    """
    if start > end:
        raise ValueError("start must be <= end")
    per_node: dict[int, list[tuple[float, float]]] = {}
    for r in rows:
        per_node.setdefault(r.mac, []).append((float(r.ts), r.power_w))
    joules = math.fsum(
        integrate_energy(EnergyLedger(samples, gap_cap_s=gap_cap_s), start, end)
        for samples in per_node.values()
    )
    kwh = joules_to_kwh(joules)
    cost = energy_cost(kwh, price_per_kwh) if price_per_kwh is not None else None
    return EnergyQuery(joules=joules, kwh=kwh, cost=cost)


class Server:
    """Owns node records, the reading store, the event stream, and the
    downlink queue that carries CONTROL frames back to the network."""

    def __init__(self, store: CsvStore | None = None, *,
                 gap_cap_s: float = 120.0, monitoring: bool = True) -> None:
        self._lock = threading.RLock()
        self.store = store if store is not None else CsvStore(None)
        self.gap_cap_s = gap_cap_s
        self.monitoring = monitoring
        self.records: dict[int, NodeRecord] = {}
        self.bus = EventBus()
        self.decode_errors = 0
        self.duplicates = 0
        self.ignored_frames = 0
        self._downlink: list[Frame] = []

    # -- registration ------------------------------------------------------

    def register_node(self, mac: int, label: str | None = None) -> NodeRecord:
        with self._lock:
            if mac in self.records:
                raise ValueError(f"mac {mac:016x} already registered")
            record = NodeRecord(mac=mac, label=label or f"node-{mac:x}")
            self.records[mac] = record
            self.bus.publish(ApiEvent(events.NODE_REGISTERED,
                                      {"mac": f"{mac:016x}", "label": record.label}))
            return record

    def _record(self, mac: int) -> NodeRecord:
        record = self.records.get(mac)
        if record is None:
            raise UnknownNodeError(mac)
        return record

    # -- ingestion (Fig-9-style pipeline) -----------------------------------

    def ingest(self, frame_bytes: bytes, now: float) -> IngestResult:
        """decode -> timestamp -> dedup -> standby check -> persist -> publish.

        Protocol errors are counted and dropped, never fatal; unknown macs
        auto-register. While monitoring is stopped, frames are dropped
        uncounted.
        """
        with self._lock:
            if not self.monitoring:
                return IngestResult(reason="monitoring stopped")
            try:
                frame = decode_frame(frame_bytes)
            except ProtocolError:
                self.decode_errors += 1
                return IngestResult(reason="decode error")
            if frame.kind is not FrameKind.REPORT:
                self.ignored_frames += 1
                return IngestResult(reason="not a report")
            record = self.records.get(frame.mac)
            if record is None:
                record = self.register_node(frame.mac)
            if record.last_seq is not None and frame.seq == record.last_seq:
                self.duplicates += 1
                return IngestResult(reason="duplicate")

            power_w = decode_count(frame.count)
            reading = PowerReading(ts=int(now), mac=frame.mac, power_w=power_w,
                                   seq=frame.seq, saturated=frame.saturated)
            previous_phase = record.standby.phase
            record.standby, action = standby_step(record.standby, power_w)

            self.store.append(reading)
            record.last_reading = reading
            record.last_seq = frame.seq
            if frame.relay_on != record.relay_believed_on:
                record.relay_believed_on = frame.relay_on
                self._publish_relay(record, reason="report")
            if previous_phase is StandbyPhase.CALIBRATING and record.standby.phase is StandbyPhase.ARMED:
                self.bus.publish(ApiEvent(events.STANDBY_ARMED, {
                    "mac": f"{record.mac:016x}",
                    "ts": format_timestamp(reading.ts),
                    "threshold_w": record.standby.threshold_w,
                }))
            self.bus.publish(ApiEvent(events.READING, {
                "mac": f"{record.mac:016x}",
                "ts": format_timestamp(reading.ts),
                "power_w": reading.power_w,
                "seq": reading.seq,
                "relay_on": frame.relay_on,
                "saturated": reading.saturated,
            }))

            control = None
            if action is StandbyAction.SEND_OFF:
                control = self._queue_control(record, Command.OFF, reason="standby")
                self.bus.publish(ApiEvent(events.STANDBY_SHUTOFF, {
                    "mac": f"{record.mac:016x}",
                    "ts": format_timestamp(reading.ts),
                }))
            return IngestResult(accepted=True, reading=reading, control=control)

    # -- user commands -------------------------------------------------------

    def set_monitoring(self, running: bool) -> None:
        with self._lock:
            self.monitoring = running

    def enable_power_save(self, mac: int, *,
                          samples_needed: int = DEFAULT_CALIBRATION_SAMPLES,
                          multiplier: float = DEFAULT_THRESHOLD_MULTIPLIER,
                          consecutive_required: int = DEFAULT_CONSECUTIVE_REQUIRED) -> None:
        """(Re)start calibration from scratch with the given parameters."""
        if samples_needed < 1 or consecutive_required < 1 or multiplier <= 0:
            raise ValueError("power-save parameters must be positive")
        with self._lock:
            record = self._record(mac)
            record.standby = StandbyState(
                phase=StandbyPhase.CALIBRATING,
                samples_needed=samples_needed,
                multiplier=multiplier,
                consecutive_required=consecutive_required,
            )

    def disable_power_save(self, mac: int) -> None:
        with self._lock:
            record = self._record(mac)
            record.standby = replace(record.standby, phase=StandbyPhase.DISABLED,
                                     samples=(), threshold_w=None, below_count=0)

    def set_power(self, mac: int, on: bool) -> Frame:
        """Queue a CONTROL frame; belief is optimistic and corrected by the
        next report's relay flag."""
        with self._lock:
            record = self._record(mac)
            return self._queue_control(record, Command.ON if on else Command.OFF,
                                       reason="user")

    def _queue_control(self, record: NodeRecord, command: Command, *, reason: str) -> Frame:
        frame = control_frame(record.mac, command)
        self._downlink.append(frame)
        wants_on = command is Command.ON
        if record.relay_believed_on != wants_on:
            record.relay_believed_on = wants_on
            self._publish_relay(record, reason=reason)
        return frame

    def _publish_relay(self, record: NodeRecord, *, reason: str) -> None:
        self.bus.publish(ApiEvent(events.RELAY_CHANGED, {
            "mac": f"{record.mac:016x}",
            "relay_on": record.relay_believed_on,
            "reason": reason,
        }))

    def take_downlink(self) -> list[Frame]:
        with self._lock:
            frames, self._downlink = self._downlink, []
            return frames

    # -- timed control -------------------------------------------------------

    def configure_timed_windows(self, mac: int, windows: list[TimedWindow]) -> None:
        for i, a in enumerate(windows):
            for b in windows[i + 1:]:
                if windows_overlap(a, b):
                    raise ValueError(f"windows overlap: {a} and {b}")
        with self._lock:
            record = self._record(mac)
            record.timed_windows = list(windows)

    def check_timed_control(self, now: float) -> list[Frame]:
        """Evaluate every node's windows against the server clock; queue and
        return the boundary CONTROL frames."""
        with self._lock:
            emitted: list[Frame] = []
            for record in self.records.values():
                for action in apply_timed_windows(record, now):
                    emitted.append(self._queue_control(record, action.command, reason="timed"))
            return emitted

    # -- queries -------------------------------------------------------------

    def energy_over_period(self, start: float, end: float, *,
                           mac: int | None = None,
                           price_per_kwh: float | None = None) -> EnergyQuery:
        """Integrate stored readings per node over [start, end) and sum."""
        with self._lock:
            if mac is not None and mac not in self.records:
                raise UnknownNodeError(mac)
            rows = self.store.select(mac=mac, start=start, end=end)
        return energy_from_readings(rows, start, end, gap_cap_s=self.gap_cap_s,
                                    price_per_kwh=price_per_kwh)

    def readings(self, *, mac: int | None = None, start: float | None = None,
                 end: float | None = None) -> list[PowerReading]:
        with self._lock:
            return self.store.select(mac=mac, start=start, end=end)

    def clear_history(self) -> None:
        """Drop persisted readings; per-node last readings stay for display."""
        with self._lock:
            self.store.clear()

    def node_snapshot(self, mac: int) -> dict[str, Any]:
        with self._lock:
            return self._snapshot(self._record(mac))

    def nodes_snapshot(self) -> list[dict[str, Any]]:
        with self._lock:
            return [self._snapshot(r) for r in sorted(self.records.values(), key=lambda r: r.mac)]

    def _snapshot(self, record: NodeRecord) -> dict[str, Any]:
        last = record.last_reading
        return {
            "mac": f"{record.mac:016x}",
            "label": record.label,
            "relay_on": record.relay_believed_on,
            "last_power_w": last.power_w if last else None,
            "last_seen": format_timestamp(last.ts) if last else None,
            "standby": {
                "phase": record.standby.phase.value,
                "samples_collected": len(record.standby.samples),
                "samples_needed": record.standby.samples_needed,
                "multiplier": record.standby.multiplier,
                "threshold_w": record.standby.threshold_w,
                "consecutive_required": record.standby.consecutive_required,
                "below_count": record.standby.below_count,
            },
            "windows": [
                {"off_at": w.off_at, "on_at": w.on_at} for w in record.timed_windows
            ],
        }

    def status(self) -> dict[str, Any]:
        with self._lock:
            return {
                "monitoring": self.monitoring,
                "nodes": len(self.records),
                "readings": len(self.store),
                "decode_errors": self.decode_errors,
                "duplicates": self.duplicates,
            }
