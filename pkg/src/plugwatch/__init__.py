"""plugwatch: a simulated wireless energy monitoring and control network.

Measurement nodes meter scripted appliances and report power counts over a
modeled star WPAN; the central server persists readings, detects standby
operation and cuts power remotely, and answers energy/cost queries through
an HTTP gateway, a CLI, and a web dashboard.
"""

from .channel import Channel, ChannelConfig, ChannelMode, LinkStats, jittered_offset
from .metering import (
    CODEC,
    CountCodec,
    EnergyLedger,
    MeterModel,
    decode_count,
    encode_power,
    energy_cost,
    integrate_energy,
    joules_to_kwh,
    meter_sample,
)
from .nodesim import (
    ApplianceMode,
    ApplianceProfile,
    ModePower,
    NodeState,
    adaptive_report_interval,
    handle_control,
    node_tick,
    press_reset,
)
from .protocol import (
    Command,
    Frame,
    FrameKind,
    ProtocolError,
    control_frame,
    decode_frame,
    encode_frame,
    poll_frame,
    report_frame,
)
from .servercore import (
    Server,
    StandbyAction,
    StandbyPhase,
    StandbyState,
    TimedWindow,
    UnknownNodeError,
    standby_step,
)
from .storage import CsvStore, PowerReading, load_history

__version__ = "0.1.0"
