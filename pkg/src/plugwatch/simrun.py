"""Deterministic simulation loop wiring nodes, channel, and server core.

The runner owns the logical clock: each step advances one slot, applies
timed control, delivers queued downlink CONTROL frames, and moves uplink
traffic through the channel into the server's ingestion pipeline. Identical
(scenario, seed) inputs produce identical stores.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import events
from .channel import Channel, ChannelConfig, ChannelMode, jittered_offset
from .metering import MeterModel, joules_to_kwh
from .nodesim import (
    NODE_SELF_DRAW_W,
    ApplianceMode,
    ApplianceProfile,
    ModePower,
    NodeState,
    handle_control,
    node_tick,
    poll_response,
    press_reset,
)
from .protocol import Frame, FrameKind, encode_frame
from .scenario import Scenario, ScenarioNode
from .servercore import Server
from .storage import CsvStore, PowerReading, format_timestamp, parse_timestamp


@dataclass
class SimNode:
    state: NodeState
    appliance: ApplianceProfile
    meter: MeterModel
    rng: random.Random


@dataclass
class RunStats:
    duration_s: float
    readings: int
    delivered: int
    collided: int
    lost: int
    decode_errors: int
    duplicates: int
    node_overhead_j: float
    store_path: Path | None

    def summary_lines(self) -> list[str]:
        lines = [
            f"simulated {self.duration_s:.0f} s",
            f"readings persisted: {self.readings}",
            f"uplink delivered={self.delivered} collided={self.collided} lost={self.lost}",
            f"node self-draw overhead: {joules_to_kwh(self.node_overhead_j):.4f} kWh (unmetered)",
        ]
        if self.decode_errors or self.duplicates:
            lines.append(f"decode errors={self.decode_errors} duplicates={self.duplicates}")
        if self.store_path is not None:
            lines.append(f"store: {self.store_path}")
        return lines


class SimulationRunner:
    def __init__(self, scenario: Scenario, out_path: str | Path | None = None) -> None:
        scenario.validate()
        self.scenario = scenario
        self.out_path = Path(out_path) if out_path is not None else None
        self.server = Server(CsvStore(self.out_path, fresh=True))
        self.channel = Channel(ChannelConfig(
            mode=scenario.mode, slot_s=scenario.slot_s,
            loss_prob=scenario.loss_prob, rng_seed=scenario.seed,
        ))
        self.nodes: dict[int, SimNode] = {}
        self._positions: dict[int, int] = {}
        for spec in scenario.nodes:
            self._add_node(spec)
        for position, mac in enumerate(sorted(self.nodes)):
            self._positions[mac] = position
        self.now = float(scenario.epoch)
        self._next_poll_at = scenario.epoch + scenario.poll_interval_s

    def _add_node(self, spec: ScenarioNode) -> None:
        scenario = self.scenario
        state = NodeState(
            mac=spec.mac,
            report_interval_s=spec.report_interval_s,
            adaptive=spec.adaptive,
            active_hint_w=spec.active_hint_w,
        )
        if scenario.jitter and scenario.mode is ChannelMode.CONTENTION:
            offset = jittered_offset(spec.mac, spec.report_interval_s, scenario.seed)
            state.next_report_at = scenario.epoch + offset
        else:
            state.next_report_at = scenario.epoch + spec.report_interval_s
        # Scenario schedules are written relative to the run start; the clock
        # is absolute, so rebase the switch points onto the epoch.
        profile = scenario.profiles[spec.profile]
        profile = ApplianceProfile(
            label=profile.label,
            modes=dict(profile.modes),
            schedule=[(at + scenario.epoch, mode) for at, mode in profile.schedule],
        )
        self.nodes[spec.mac] = SimNode(
            state=state,
            appliance=profile,
            meter=MeterModel(noise_stddev_w=spec.meter_noise_w, gate_s=spec.report_interval_s),
            rng=random.Random(f"{scenario.seed}:node:{spec.mac:016x}"),
        )
        self.channel.register(spec.mac)
        self.server.register_node(spec.mac, spec.label)

    def _deliver_downlink(self) -> None:
        for frame in self.server.take_downlink():
            frame = self.channel.deliver_downlink(frame)
            sim = self.nodes.get(frame.mac)
            if sim is not None and frame.kind is FrameKind.CONTROL:
                handle_control(sim.state, frame.command)

    def step(self) -> None:
        """Advance the clock one slot and move that slot's traffic."""
        self.now += self.scenario.slot_s
        now = self.now
        self.server.check_timed_control(now)
        self._deliver_downlink()
        if self.scenario.mode is ChannelMode.CONTENTION:
            offered: list[tuple[int, Frame]] = []
            for mac in sorted(self.nodes):
                sim = self.nodes[mac]
                frame = node_tick(sim.state, sim.appliance, now, sim.meter, sim.rng)
                if frame is not None:
                    offered.append((mac, frame))
            for frame in self.channel.step_contention(offered):
                self.server.ingest(encode_frame(frame), now)
        elif now >= self._next_poll_at:
            round_start = now

            def respond(mac: int, _poll: Frame) -> Frame:
                sim = self.nodes[mac]
                return poll_response(sim.state, sim.appliance, round_start, sim.meter, sim.rng)

            for frame in self.channel.run_polled_round(list(self.nodes), respond):
                reply_at = round_start + (2 * self._positions[frame.mac] + 1) * self.scenario.slot_s
                self.server.ingest(encode_frame(frame), reply_at)
            self._next_poll_at += self.scenario.poll_interval_s
        # Standby or timed OFFs raised by this slot's ingestion land before the next report.
        self._deliver_downlink()

    def run(self, speed_factor: float = 0.0) -> RunStats:
        """Run the whole scenario. speed_factor scales simulated seconds per
        wall second; 0 means as fast as possible."""
        if speed_factor < 0:
            raise ValueError("speed_factor must be >= 0")
        total_slots = int(round(self.scenario.duration_s / self.scenario.slot_s))
        wall_per_slot = self.scenario.slot_s / speed_factor if speed_factor > 0 else 0.0
        for _ in range(total_slots):
            started = time.monotonic()
            self.step()
            if wall_per_slot > 0:
                remaining = wall_per_slot - (time.monotonic() - started)
                if remaining > 0:
                    time.sleep(remaining)
        return self.stats()

    def stats(self) -> RunStats:
        link = self.channel.stats
        elapsed = self.now - self.scenario.epoch
        return RunStats(
            duration_s=elapsed,
            readings=len(self.server.store),
            delivered=link.delivered,
            collided=link.collided,
            lost=link.lost,
            decode_errors=self.server.decode_errors,
            duplicates=self.server.duplicates,
            node_overhead_j=NODE_SELF_DRAW_W * len(self.nodes) * elapsed,
            store_path=self.out_path,
        )

    def close(self) -> None:
        self.server.store.close()


# -- canned standby demo -----------------------------------------------------

DEMO_MAC = 0x0C
DEMO_INTERVAL_S = 60.0
DEMO_STANDBY_W = 20.0
DEMO_ACTIVE_W = 67.5
DEMO_CALIBRATION_SAMPLES = 10
DEMO_ACTIVE_REPORTS = 8
DEMO_OFF_REPORTS = 3


@dataclass
class DemoReport:
    k: int
    mac: int
    threshold_w: float | None
    armed_ts: int | None
    shutoff_ts: int | None
    reset_ts: int
    readings: list[PowerReading]
    events: list[tuple[int, str]] = field(default_factory=list)
    elapsed_s: float = 0.0
    store_path: Path | None = None

    def timeline_lines(self) -> list[str]:
        return [f"[{format_timestamp(ts)}] {text}" for ts, text in self.events]


def build_demo_scenario(k: int = 5, seed: int = 7) -> tuple[Scenario, dict[str, int]]:
    """The computer fixture: exact 20 W standby, 67.5 W active, one node."""
    interval = int(DEMO_INTERVAL_S)
    calibration_end = DEMO_CALIBRATION_SAMPLES * interval
    active_start = calibration_end + interval // 2
    standby_return = active_start + DEMO_ACTIVE_REPORTS * interval
    shutoff_report = calibration_end + (DEMO_ACTIVE_REPORTS + k) * interval
    reset_at = shutoff_report + DEMO_OFF_REPORTS * interval + interval // 2
    duration = reset_at + 3 * interval + interval // 2

    profile = ApplianceProfile(
        label="computer",
        modes={
            ApplianceMode.STANDBY: ModePower(DEMO_STANDBY_W),
            ApplianceMode.ACTIVE: ModePower(DEMO_ACTIVE_W),
        },
        schedule=[
            (0.0, ApplianceMode.STANDBY),
            (float(active_start), ApplianceMode.ACTIVE),
            (float(standby_return), ApplianceMode.STANDBY),
        ],
    )
    scenario = Scenario(seed=seed, duration_s=float(duration))
    scenario.profiles["computer"] = profile
    scenario.nodes.append(ScenarioNode(
        mac=DEMO_MAC, label="computer", profile="computer",
        report_interval_s=DEMO_INTERVAL_S,
    ))
    marks = {
        "active_start": active_start,
        "standby_return": standby_return,
        "expected_shutoff": shutoff_report,
        "reset_at": reset_at,
    }
    return scenario, marks


def demo_standby(k: int = 5, out_path: str | Path | None = None,
                 speed_factor: float = 0.0) -> DemoReport:
    """Reproduce the standby power-save run end to end.

    Calibrates on 10 standby readings (threshold 24.0 W at 20 W standby),
    rides through the active phase without a shutoff, cuts power on the k-th
    consecutive below-threshold reading after the return to standby, then
    restores it with the node's reset button.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    scenario, marks = build_demo_scenario(k)
    runner = SimulationRunner(scenario, out_path=out_path)
    server = runner.server
    epoch = scenario.epoch
    sub = server.bus.subscribe(maxsize=4096)

    server.enable_power_save(DEMO_MAC, consecutive_required=k)
    log: list[tuple[int, str]] = [(epoch, (
        f"power-save enabled: samples=10 multiplier=1.2 consecutive={k}"
    ))]
    log.append((epoch, "phase: standby (calibration)"))
    for name, offset in (("active", marks["active_start"]),
                         ("standby", marks["standby_return"])):
        log.append((epoch + offset, f"phase: {name}"))

    started = time.monotonic()
    total_slots = int(round(scenario.duration_s / scenario.slot_s))
    reset_ts = epoch + marks["reset_at"]
    for _ in range(total_slots):
        runner.step()
        if runner.now == reset_ts:
            press_reset(runner.nodes[DEMO_MAC].state)
            log.append((int(runner.now), "reset button pressed at node"))
    elapsed = time.monotonic() - started
    runner.close()

    threshold = None
    armed_ts = None
    shutoff_ts = None
    for event in sub.drain():
        if event.kind == events.STANDBY_ARMED:
            threshold = event.data["threshold_w"]
            armed_ts = parse_timestamp(event.data["ts"])
            log.append((armed_ts, f"calibration complete: threshold {threshold:.2f} W, armed"))
        elif event.kind == events.STANDBY_SHUTOFF:
            shutoff_ts = parse_timestamp(event.data["ts"])
            log.append((shutoff_ts,
                        f"standby detected ({k} consecutive below threshold): CONTROL OFF sent"))
    server.bus.unsubscribe(sub)

    return DemoReport(
        k=k, mac=DEMO_MAC, threshold_w=threshold, armed_ts=armed_ts,
        shutoff_ts=shutoff_ts, reset_ts=reset_ts,
        readings=list(server.store.rows), events=sorted(log), elapsed_s=elapsed,
        store_path=runner.out_path,
    )
