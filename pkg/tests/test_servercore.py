"""Server core: standby engine, ingestion pipeline, timed control, queries."""

import random

import pytest

from plugwatch import events
from plugwatch.protocol import Command, FrameKind, encode_frame, report_frame
from plugwatch.servercore import (
    Server,
    StandbyAction,
    StandbyPhase,
    StandbyState,
    TimedWindow,
    UnknownNodeError,
    apply_timed_windows,
    standby_step,
    windows_overlap,
)
from plugwatch.storage import CsvStore

EPOCH = 1704067200  # 2024-01-01T00:00:00Z, a midnight
MAC = 0x11


def wire_report(mac, seq, count, relay_on=True, saturated=False):
    return encode_frame(report_frame(mac, seq, count, relay_on=relay_on, saturated=saturated))


def calibrating(samples_needed=10, multiplier=1.2, k=30) -> StandbyState:
    return StandbyState(phase=StandbyPhase.CALIBRATING, samples_needed=samples_needed,
                        multiplier=multiplier, consecutive_required=k)


class TestStandbyStep:
    def test_disabled_is_inert(self):
        state = StandbyState()
        assert standby_step(state, 500.0) == (state, StandbyAction.NONE)

    def test_tenth_sample_arms_at_120_percent_of_mean(self):
        state = calibrating()
        for _ in range(9):
            state, action = standby_step(state, 20.0)
            assert state.phase is StandbyPhase.CALIBRATING
            assert action is StandbyAction.NONE
        state, action = standby_step(state, 20.0)
        assert action is StandbyAction.NONE
        assert state.phase is StandbyPhase.ARMED
        assert state.threshold_w == 24.0  # 20.0 * 1.2, exact
        assert state.below_count == 0

    def test_fifth_below_fires_shutoff(self):
        state = StandbyState(phase=StandbyPhase.ARMED, threshold_w=24.0,
                             consecutive_required=5, below_count=4)
        state, action = standby_step(state, 23.0)
        assert action is StandbyAction.SEND_OFF
        assert state.phase is StandbyPhase.DISABLED

    def test_reading_at_threshold_resets_count(self):
        state = StandbyState(phase=StandbyPhase.ARMED, threshold_w=24.0,
                             consecutive_required=5, below_count=4)
        state, action = standby_step(state, 25.0)
        assert action is StandbyAction.NONE
        assert state.below_count == 0
        state, action = standby_step(state, 24.0)  # >= threshold also resets
        assert state.below_count == 0

    def test_negative_power_rejected(self):
        with pytest.raises(ValueError):
            standby_step(StandbyState(), -1.0)

    def test_threshold_invariant_under_sample_permutation(self):
        rng = random.Random(3)
        for _ in range(100):
            samples = [rng.uniform(0.5, 80.0) for _ in range(10)]
            thresholds = set()
            for _ in range(5):
                rng.shuffle(samples)
                state = calibrating()
                for watts in samples:
                    state, _ = standby_step(state, watts)
                thresholds.add(state.threshold_w)
            assert len(thresholds) == 1

    def test_random_sequences_respect_invariants(self):
        rng = random.Random(20_24)
        for _ in range(2000):
            k = rng.randint(1, 6)
            state = calibrating(samples_needed=rng.randint(1, 5), k=k)
            for _ in range(rng.randint(1, 40)):
                before = state
                watts = rng.choice([0.0, 5.0, 20.0, 23.9, 24.0, 60.0, 500.0])
                state, action = standby_step(state, watts)
                assert state.below_count <= k
                if action is StandbyAction.SEND_OFF:
                    assert before.phase is StandbyPhase.ARMED
                    assert before.below_count == k - 1
                    assert watts < before.threshold_w
                    assert state.phase is StandbyPhase.DISABLED
                if before.phase is StandbyPhase.ARMED and watts >= before.threshold_w:
                    assert state.below_count == 0


class TestIngestion:
    def make_server(self):
        server = Server(CsvStore(None))
        server.register_node(MAC, "computer")
        return server

    def test_valid_report_persists_without_control(self):
        server = self.make_server()
        result = server.ingest(wire_report(MAC, 0, 1000), EPOCH)
        assert result.accepted
        assert result.control is None
        assert result.reading.power_w == 20.0
        assert result.reading.ts == EPOCH
        assert len(server.store) == 1

    def test_duplicate_seq_dropped(self):
        server = self.make_server()
        frame = wire_report(MAC, 7, 1000)
        assert server.ingest(frame, EPOCH).accepted
        repeat = server.ingest(frame, EPOCH + 1)
        assert not repeat.accepted
        assert repeat.reason == "duplicate"
        assert len(server.store) == 1
        assert server.duplicates == 1

    def test_decode_errors_counted_not_fatal(self):
        server = self.make_server()
        assert not server.ingest(b"\x01garbage", EPOCH).accepted
        assert server.decode_errors == 1
        assert server.ingest(wire_report(MAC, 0, 5), EPOCH).accepted

    def test_unknown_mac_auto_registers(self):
        server = self.make_server()
        sub = server.bus.subscribe()
        assert server.ingest(wire_report(0x99, 0, 100), EPOCH).accepted
        assert 0x99 in server.records
        assert server.records[0x99].label == "node-99"
        kinds = [e.kind for e in sub.drain()]
        assert kinds == [events.NODE_REGISTERED, events.READING]

    def test_monitoring_stopped_drops_uncounted(self):
        server = self.make_server()
        server.set_monitoring(False)
        assert not server.ingest(b"junk", EPOCH).accepted
        assert not server.ingest(wire_report(MAC, 0, 1000), EPOCH).accepted
        assert server.decode_errors == 0
        assert len(server.store) == 0
        server.set_monitoring(True)
        assert server.ingest(wire_report(MAC, 0, 1000), EPOCH).accepted

    def test_non_report_frames_ignored(self):
        from plugwatch.protocol import control_frame
        server = self.make_server()
        result = server.ingest(encode_frame(control_frame(MAC, Command.ON)), EPOCH)
        assert not result.accepted
        assert server.ignored_frames == 1

    def test_shutoff_on_kth_below_threshold(self):
        server = self.make_server()
        server.enable_power_save(MAC, samples_needed=3, consecutive_required=5)
        seq = 0
        for _ in range(3):  # calibration at 20 W
            server.ingest(wire_report(MAC, seq, 1000), EPOCH + 60 * seq)
            seq += 1
        assert server.records[MAC].standby.phase is StandbyPhase.ARMED
        assert server.records[MAC].standby.threshold_w == 24.0
        for i in range(4):
            result = server.ingest(wire_report(MAC, seq, 1000), EPOCH + 60 * seq)
            assert result.control is None
            seq += 1
        result = server.ingest(wire_report(MAC, seq, 1000), EPOCH + 60 * seq)
        assert result.accepted  # the triggering reading is still persisted
        assert result.control is not None
        assert result.control.kind is FrameKind.CONTROL
        assert result.control.command is Command.OFF
        assert server.records[MAC].standby.phase is StandbyPhase.DISABLED
        assert server.take_downlink() == [result.control]

    def test_reading_events_in_ingestion_order(self):
        server = self.make_server()
        sub = server.bus.subscribe()
        for seq in range(3):
            server.ingest(wire_report(MAC, seq, 100 + seq), EPOCH + seq)
        seqs = [e.data["seq"] for e in sub.drain() if e.kind == events.READING]
        assert seqs == [0, 1, 2]

    def test_armed_event_precedes_shutoff_event(self):
        server = self.make_server()
        sub = server.bus.subscribe()
        server.enable_power_save(MAC, samples_needed=2, consecutive_required=1)
        for seq in range(3):
            server.ingest(wire_report(MAC, seq, 1000), EPOCH + seq)
        kinds = [e.kind for e in sub.drain()]
        assert kinds.index(events.STANDBY_ARMED) < kinds.index(events.STANDBY_SHUTOFF)


class TestPowerSaveCommands:
    def test_defaults(self):
        server = Server()
        server.register_node(MAC)
        server.enable_power_save(MAC)
        standby = server.records[MAC].standby
        assert standby.phase is StandbyPhase.CALIBRATING
        assert (standby.samples_needed, standby.multiplier, standby.consecutive_required) == (10, 1.2, 30)

    def test_demo_configuration(self):
        server = Server()
        server.register_node(MAC)
        server.enable_power_save(MAC, consecutive_required=5)
        assert server.records[MAC].standby.consecutive_required == 5

    def test_reenable_restarts_calibration(self):
        server = Server()
        server.register_node(MAC)
        server.enable_power_save(MAC, samples_needed=2)
        server.ingest(wire_report(MAC, 0, 1000), EPOCH)
        assert len(server.records[MAC].standby.samples) == 1
        server.enable_power_save(MAC, samples_needed=2)
        assert server.records[MAC].standby.samples == ()

    def test_disable(self):
        server = Server()
        server.register_node(MAC)
        server.enable_power_save(MAC)
        server.disable_power_save(MAC)
        assert server.records[MAC].standby.phase is StandbyPhase.DISABLED

    def test_unknown_mac(self):
        server = Server()
        with pytest.raises(UnknownNodeError):
            server.enable_power_save(0xDEAD)
        with pytest.raises(UnknownNodeError):
            server.set_power(0xDEAD, on=False)

    def test_invalid_parameters(self):
        server = Server()
        server.register_node(MAC)
        with pytest.raises(ValueError):
            server.enable_power_save(MAC, consecutive_required=0)


class TestSetPower:
    def test_queues_control_and_updates_belief(self):
        server = Server()
        server.register_node(MAC)
        frame = server.set_power(MAC, on=False)
        assert frame.command is Command.OFF
        assert not server.records[MAC].relay_believed_on
        assert server.take_downlink() == [frame]
        assert server.take_downlink() == []

    def test_belief_corrected_by_report_flags(self):
        server = Server()
        server.register_node(MAC)
        server.set_power(MAC, on=False)
        sub = server.bus.subscribe()
        server.ingest(wire_report(MAC, 0, 500, relay_on=True), EPOCH)
        assert server.records[MAC].relay_believed_on
        changed = [e for e in sub.drain() if e.kind == events.RELAY_CHANGED]
        assert changed and changed[0].data["reason"] == "report"


class TestTimedWindows:
    def overnight(self):
        return TimedWindow(off_at=22 * 3600, on_at=6 * 3600)

    def test_window_validation(self):
        with pytest.raises(ValueError):
            TimedWindow(off_at=0, on_at=0)
        with pytest.raises(ValueError):
            TimedWindow(off_at=90000, on_at=100)

    def test_overlap_detection(self):
        overnight = self.overnight()
        assert windows_overlap(overnight, TimedWindow(off_at=5 * 3600, on_at=7 * 3600))
        assert windows_overlap(overnight, TimedWindow(off_at=23 * 3600, on_at=1800))
        assert not windows_overlap(overnight, TimedWindow(off_at=8 * 3600, on_at=9 * 3600))

    def test_overlapping_configuration_rejected(self):
        server = Server()
        server.register_node(MAC)
        with pytest.raises(ValueError):
            server.configure_timed_windows(MAC, [
                self.overnight(), TimedWindow(off_at=5 * 3600, on_at=7 * 3600),
            ])

    def test_one_off_and_one_on_per_day_with_wrap(self):
        server = Server()
        server.register_node(MAC)
        server.configure_timed_windows(MAC, [self.overnight()])
        fired = []
        for now in range(EPOCH, EPOCH + 2 * 86400 + 60, 60):
            for frame in server.check_timed_control(now):
                fired.append((now, frame.command))
        assert fired == [
            (EPOCH + 6 * 3600, Command.ON),
            (EPOCH + 22 * 3600, Command.OFF),
            (EPOCH + 86400 + 6 * 3600, Command.ON),
            (EPOCH + 86400 + 22 * 3600, Command.OFF),
        ]

    def test_inside_window_is_not_retriggered(self):
        server = Server()
        server.register_node(MAC)
        server.configure_timed_windows(MAC, [self.overnight()])
        server.check_timed_control(EPOCH + 23 * 3600)          # baseline, inside window
        assert server.check_timed_control(EPOCH + 23 * 3600 + 60) == []

    def test_large_step_reports_each_boundary_once(self):
        record = Server().register_node(MAC)
        record.timed_windows = [self.overnight()]
        apply_timed_windows(record, EPOCH)  # baseline
        actions = apply_timed_windows(record, EPOCH + 2 * 86400)
        assert [(a.at - EPOCH, a.command) for a in actions] == [
            (6 * 3600, Command.ON),
            (22 * 3600, Command.OFF),
            (86400 + 6 * 3600, Command.ON),
            (86400 + 22 * 3600, Command.OFF),
        ]


class TestQueries:
    def server_with_hour_of_sixty_watts(self, macs=(0x1, 0x2)):
        server = Server(CsvStore(None))
        for mac in macs:
            server.register_node(mac)
        for i in range(60):
            for mac in macs:
                server.ingest(wire_report(mac, i, 3000), EPOCH + 60 * i)
        return server

    def test_two_nodes_one_hour(self):
        server = self.server_with_hour_of_sixty_watts()
        result = server.energy_over_period(EPOCH, EPOCH + 3600)
        assert result.kwh == 0.12  # 2 x 0.06

    def test_single_node_filter(self):
        server = self.server_with_hour_of_sixty_watts()
        result = server.energy_over_period(EPOCH, EPOCH + 3600, mac=0x1)
        assert result.kwh == 0.06

    def test_empty_window(self):
        server = self.server_with_hour_of_sixty_watts()
        assert server.energy_over_period(EPOCH, EPOCH).kwh == 0.0

    def test_cost(self):
        server = self.server_with_hour_of_sixty_watts(macs=(0x1,))
        result = server.energy_over_period(EPOCH, EPOCH + 3600, price_per_kwh=0.12)
        assert result.cost == 0.0072

    def test_unknown_mac_filter(self):
        server = self.server_with_hour_of_sixty_watts()
        with pytest.raises(UnknownNodeError):
            server.energy_over_period(EPOCH, EPOCH + 3600, mac=0x77)

    def test_clear_history(self):
        server = self.server_with_hour_of_sixty_watts()
        assert server.records[0x1].last_reading is not None
        server.clear_history()
        assert server.energy_over_period(EPOCH, EPOCH + 3600).kwh == 0.0
        assert server.records[0x1].last_reading is not None  # display continuity
        assert server.ingest(wire_report(0x1, 200, 3000), EPOCH + 7200).accepted
        assert len(server.store) == 1

    def test_energy_matches_brute_force_row_sum(self):
        server = self.server_with_hour_of_sixty_watts()
        rows = server.readings()
        # independent oracle: walk raw rows per node, credit capped durations
        total = 0.0
        for mac in {r.mac for r in rows}:
            node_rows = [r for r in rows if r.mac == mac]
            for i, row in enumerate(node_rows):
                if not EPOCH <= row.ts < EPOCH + 3600:
                    continue
                nxt = node_rows[i + 1].ts if i + 1 < len(node_rows) else float("inf")
                total += row.power_w * min(nxt - row.ts, EPOCH + 3600 - row.ts, 120.0)
        result = server.energy_over_period(EPOCH, EPOCH + 3600)
        assert result.joules == pytest.approx(total, rel=1e-9)

    def test_node_snapshot_shape(self):
        server = self.server_with_hour_of_sixty_watts(macs=(0x1,))
        snap = server.node_snapshot(0x1)
        assert snap["mac"] == "0000000000000001"
        assert snap["last_power_w"] == 60.0
        assert snap["standby"]["phase"] == "disabled"
        assert server.status()["readings"] == 60
