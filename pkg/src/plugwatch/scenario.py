"""Line-oriented scenario files for the runner.

One directive per line; blank lines and lines starting with ``#`` are
ignored. Directives:

    seed 42
    duration 600
    epoch 2024-01-01T00:00:00Z
    channel mode=contention slot=1 loss=0 jitter=on poll=60
    profile computer standby=20 active=67.5~0.5 schedule=0:standby,630:active
    node mac=0x01 label=computer profile=computer interval=60 adaptive=off hint=50 noise=0

Mode powers take ``mean`` or ``mean~stddev``. Schedules are comma-separated
``seconds:mode`` switch points (modes: off, standby, active). Node macs are
hex with 0x prefix or decimal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .channel import MAX_NODES, ChannelMode
from .nodesim import ApplianceMode, ApplianceProfile, ModePower
from .storage import parse_timestamp

DEFAULT_EPOCH = parse_timestamp("2024-01-01T00:00:00Z")


class ScenarioError(ValueError):
    def __init__(self, line_no: int, message: str) -> None:
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


@dataclass
class ScenarioNode:
    mac: int
    label: str
    profile: str
    report_interval_s: float = 60.0
    adaptive: bool = False
    active_hint_w: float = 50.0
    meter_noise_w: float = 0.0


@dataclass
class Scenario:
    seed: int = 0
    duration_s: float = 600.0
    epoch: int = DEFAULT_EPOCH
    mode: ChannelMode = ChannelMode.CONTENTION
    slot_s: float = 1.0
    loss_prob: float = 0.0
    jitter: bool = False
    poll_interval_s: float = 60.0
    profiles: dict[str, ApplianceProfile] = field(default_factory=dict)
    nodes: list[ScenarioNode] = field(default_factory=list)

    def validate(self) -> None:
        if self.duration_s <= 0:
            raise ValueError("duration must be positive")
        if not self.nodes:
            raise ValueError("scenario defines no nodes")
        if len(self.nodes) > MAX_NODES:
            raise ValueError(f"star supports at most {MAX_NODES} nodes")
        seen: set[int] = set()
        for node in self.nodes:
            if node.mac in seen:
                raise ValueError(f"duplicate mac {node.mac:#x}")
            seen.add(node.mac)
            if node.profile not in self.profiles:
                raise ValueError(f"node {node.label!r} references unknown profile {node.profile!r}")


def _parse_kv(tokens: list[str], line_no: int) -> dict[str, str]:
    pairs = {}
    for token in tokens:
        if "=" not in token:
            raise ScenarioError(line_no, f"expected key=value, got {token!r}")
        key, value = token.split("=", 1)
        if key in pairs:
            raise ScenarioError(line_no, f"duplicate key {key!r}")
        pairs[key] = value
    return pairs


def _parse_mode_power(value: str, line_no: int, key: str) -> ModePower:
    mean_text, _, jitter_text = value.partition("~")
    try:
        mean = float(mean_text)
        jitter = float(jitter_text) if jitter_text else 0.0
    except ValueError:
        raise ScenarioError(line_no, f"field {key!r}: expected mean or mean~stddev, got {value!r}") from None
    return ModePower(mean_w=mean, jitter_stddev_w=jitter)


def _parse_schedule(value: str, line_no: int) -> list[tuple[float, ApplianceMode]]:
    entries = []
    for part in value.split(","):
        at_text, _, mode_text = part.partition(":")
        try:
            at = float(at_text)
            mode = ApplianceMode(mode_text)
        except ValueError:
            raise ScenarioError(line_no, f"bad schedule entry {part!r} (want seconds:mode)") from None
        entries.append((at, mode))
    return entries


def _parse_flag(value: str, line_no: int, key: str) -> bool:
    if value in ("on", "true", "yes", "1"):
        return True
    if value in ("off", "false", "no", "0"):
        return False
    raise ScenarioError(line_no, f"field {key!r}: expected on/off, got {value!r}")


def _parse_float(value: str, line_no: int, key: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise ScenarioError(line_no, f"field {key!r}: expected a number, got {value!r}") from None


def parse_scenario(text: str) -> Scenario:
    scenario = Scenario()
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        directive, args = tokens[0], tokens[1:]

        if directive == "seed":
            if len(args) != 1:
                raise ScenarioError(line_no, "seed takes one integer")
            try:
                scenario.seed = int(args[0])
            except ValueError:
                raise ScenarioError(line_no, f"bad seed {args[0]!r}") from None

        elif directive == "duration":
            if len(args) != 1:
                raise ScenarioError(line_no, "duration takes seconds")
            scenario.duration_s = _parse_float(args[0], line_no, "duration")

        elif directive == "epoch":
            if len(args) != 1:
                raise ScenarioError(line_no, "epoch takes an ISO timestamp")
            try:
                scenario.epoch = parse_timestamp(args[0])
            except ValueError:
                raise ScenarioError(line_no, f"bad epoch {args[0]!r} (want 2024-01-01T00:00:00Z form)") from None

        elif directive == "channel":
            pairs = _parse_kv(args, line_no)
            for key, value in pairs.items():
                if key == "mode":
                    try:
                        scenario.mode = ChannelMode(value)
                    except ValueError:
                        raise ScenarioError(line_no, f"unknown channel mode {value!r}") from None
                elif key == "slot":
                    scenario.slot_s = _parse_float(value, line_no, key)
                elif key == "loss":
                    scenario.loss_prob = _parse_float(value, line_no, key)
                elif key == "jitter":
                    scenario.jitter = _parse_flag(value, line_no, key)
                elif key == "poll":
                    scenario.poll_interval_s = _parse_float(value, line_no, key)
                else:
                    raise ScenarioError(line_no, f"unknown channel field {key!r}")

        elif directive == "profile":
            if not args:
                raise ScenarioError(line_no, "profile needs a name")
            name = args[0]
            if name in scenario.profiles:
                raise ScenarioError(line_no, f"duplicate profile {name!r}")
            pairs = _parse_kv(args[1:], line_no)
            modes: dict[ApplianceMode, ModePower] = {}
            schedule: list[tuple[float, ApplianceMode]] = []
            for key, value in pairs.items():
                if key in ("standby", "active"):
                    modes[ApplianceMode(key)] = _parse_mode_power(value, line_no, key)
                elif key == "schedule":
                    schedule = _parse_schedule(value, line_no)
                else:
                    raise ScenarioError(line_no, f"unknown profile field {key!r}")
            try:
                scenario.profiles[name] = ApplianceProfile(label=name, modes=modes, schedule=schedule)
            except ValueError as exc:
                raise ScenarioError(line_no, str(exc)) from None

        elif directive == "node":
            pairs = _parse_kv(args, line_no)
            if "mac" not in pairs:
                raise ScenarioError(line_no, "node needs mac=")
            if "profile" not in pairs:
                raise ScenarioError(line_no, "node needs profile=")
            try:
                mac = int(pairs["mac"], 0)
            except ValueError:
                raise ScenarioError(line_no, f"bad mac {pairs['mac']!r}") from None
            if not 0 < mac <= 0xFFFF_FFFF_FFFF_FFFF:
                raise ScenarioError(line_no, f"mac out of range: {pairs['mac']}")
            node = ScenarioNode(mac=mac, label=pairs.get("label", f"node-{mac:x}"),
                                profile=pairs["profile"])
            if "interval" in pairs:
                node.report_interval_s = _parse_float(pairs["interval"], line_no, "interval")
                if node.report_interval_s <= 0:
                    raise ScenarioError(line_no, "interval must be positive")
            if "adaptive" in pairs:
                node.adaptive = _parse_flag(pairs["adaptive"], line_no, "adaptive")
            if "hint" in pairs:
                node.active_hint_w = _parse_float(pairs["hint"], line_no, "hint")
            if "noise" in pairs:
                node.meter_noise_w = _parse_float(pairs["noise"], line_no, "noise")
            for key in pairs:
                if key not in ("mac", "label", "profile", "interval", "adaptive", "hint", "noise"):
                    raise ScenarioError(line_no, f"unknown node field {key!r}")
            scenario.nodes.append(node)

        else:
            raise ScenarioError(line_no, f"unknown directive {directive!r}")

    try:
        scenario.validate()
    except ValueError as exc:
        raise ScenarioError(0, str(exc)) from None
    return scenario


def load_scenario(path: str | Path) -> Scenario:
    return parse_scenario(Path(path).read_text(encoding="utf-8"))
