"""Binary wire frames between measurement nodes and the server.

Three fixed layouts, all big-endian, all ending in a one-byte XOR checksum
over every preceding byte:

    REPORT  [0x01][mac 8][seq 1][count 2][flags 1][checksum 1]   14 bytes
    CONTROL [0x02][mac 8][command 1][checksum 1]                 11 bytes
    POLL    [0x03][mac 8][checksum 1]                            10 bytes

flags bit0 = relay closed, bit1 = count saturated.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import IntEnum


class FrameKind(IntEnum):
    REPORT = 0x01
    CONTROL = 0x02
    POLL = 0x03


class Command(IntEnum):
    OFF = 0x00
    ON = 0x01


FLAG_RELAY_ON = 0x01
FLAG_SATURATED = 0x02

FRAME_LENGTHS = {FrameKind.REPORT: 14, FrameKind.CONTROL: 11, FrameKind.POLL: 10}
MAX_MAC = 0xFFFF_FFFF_FFFF_FFFF


class ProtocolError(ValueError):
    """Base for every frame encode/decode failure."""


class FrameLengthError(ProtocolError):
    """Buffer empty or not the exact length its type byte demands."""


class FrameTypeError(ProtocolError):
    """Leading byte is not a known frame type."""


class FrameChecksumError(ProtocolError):
    """Trailing checksum does not match the frame body."""


class FrameFieldError(ProtocolError):
    """A field value is outside its domain for the frame kind."""


@dataclass(frozen=True)
class Frame:
    kind: FrameKind
    mac: int
    seq: int | None = None
    count: int | None = None
    flags: int | None = None
    command: Command | None = None

    @property
    def relay_on(self) -> bool:
        if self.flags is None:
            raise FrameFieldError("flags only present on REPORT frames")
        return bool(self.flags & FLAG_RELAY_ON)

    @property
    def saturated(self) -> bool:
        if self.flags is None:
            raise FrameFieldError("flags only present on REPORT frames")
        return bool(self.flags & FLAG_SATURATED)


def report_frame(
    mac: int, seq: int, count: int, *, relay_on: bool, saturated: bool = False
) -> Frame:
    flags = (FLAG_RELAY_ON if relay_on else 0) | (FLAG_SATURATED if saturated else 0)
    return Frame(FrameKind.REPORT, mac, seq=seq, count=count, flags=flags)


def control_frame(mac: int, command: Command) -> Frame:
    return Frame(FrameKind.CONTROL, mac, command=command)


def poll_frame(mac: int) -> Frame:
    return Frame(FrameKind.POLL, mac)


def xor_checksum(data: bytes) -> int:
    check = 0
    for b in data:
        check ^= b
    return check


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise FrameFieldError(message)


def encode_frame(frame: Frame) -> bytes:
    _require(0 < frame.mac <= MAX_MAC, f"mac out of range: {frame.mac!r}")
    if frame.kind is FrameKind.REPORT:
        _require(frame.command is None, "REPORT carries no command")
        _require(frame.seq is not None and 0 <= frame.seq <= 0xFF, "bad seq")
        _require(frame.count is not None and 0 <= frame.count <= 0xFFFF, "bad count")
        _require(frame.flags is not None and 0 <= frame.flags <= 0xFF, "bad flags")
        body = struct.pack(">BQBHB", frame.kind, frame.mac, frame.seq, frame.count, frame.flags)
    elif frame.kind is FrameKind.CONTROL:
        _require(
            frame.seq is None and frame.count is None and frame.flags is None,
            "CONTROL carries only a command",
        )
        _require(frame.command in (Command.OFF, Command.ON), f"unknown command: {frame.command!r}")
        body = struct.pack(">BQB", frame.kind, frame.mac, frame.command)
    elif frame.kind is FrameKind.POLL:
        _require(
            frame.seq is None and frame.count is None and frame.flags is None and frame.command is None,
            "POLL carries no payload",
        )
        body = struct.pack(">BQ", frame.kind, frame.mac)
    else:
        raise FrameFieldError(f"unknown frame kind: {frame.kind!r}")
    return body + bytes([xor_checksum(body)])


def decode_frame(data: bytes) -> Frame:
    """Parse a wire buffer; total over arbitrary bytes, raising only ProtocolError.

    Distinguishable failures: FrameLengthError (empty/truncated/overlong),
    FrameTypeError (unknown type byte), FrameChecksumError, FrameFieldError
    (valid checksum but a field outside its domain).
    """
    if len(data) == 0:
        raise FrameLengthError("empty buffer")
    try:
        kind = FrameKind(data[0])
    except ValueError:
        raise FrameTypeError(f"unknown frame type byte 0x{data[0]:02x}") from None
    expected = FRAME_LENGTHS[kind]
    if len(data) != expected:
        raise FrameLengthError(f"{kind.name} frame must be {expected} bytes, got {len(data)}")
    if xor_checksum(data[:-1]) != data[-1]:
        raise FrameChecksumError("checksum mismatch")
    if kind is FrameKind.REPORT:
        _, mac, seq, count, flags = struct.unpack(">BQBHB", data[:-1])
        frame = Frame(kind, mac, seq=seq, count=count, flags=flags)
    elif kind is FrameKind.CONTROL:
        _, mac, command = struct.unpack(">BQB", data[:-1])
        if command not in (Command.OFF, Command.ON):
            raise FrameFieldError(f"unknown command byte 0x{command:02x}")
        frame = Frame(kind, mac, command=Command(command))
    else:
        _, mac = struct.unpack(">BQ", data[:-1])
        frame = Frame(kind, mac)
    if frame.mac == 0:
        raise FrameFieldError("mac must be nonzero")
    return frame
