"""Append-only CSV persistence for power readings.

Store format, bit-exact: UTF-8, header ``timestamp,mac,power_w,seq``,
ISO-8601 UTC second timestamps (``YYYY-MM-DDTHH:MM:SSZ``), mac as 16
lowercase hex digits, power with exactly 2 decimals, seq decimal 0-255.
One file per run.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from .metering import decode_count

log = logging.getLogger(__name__)

CSV_HEADER = "timestamp,mac,power_w,seq"
TIMESTAMP_FORMAT = "%Y-%m-%dT%H:%M:%SZ"


@dataclass(frozen=True)
class PowerReading:
    """One timestamped, decoded power sample; the unit of persistence."""

    ts: int
    mac: int
    power_w: float
    seq: int
    saturated: bool = False


def format_timestamp(ts: int) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).strftime(TIMESTAMP_FORMAT)


def parse_timestamp(text: str) -> int:
    dt = datetime.strptime(text, TIMESTAMP_FORMAT).replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def format_row(reading: PowerReading) -> str:
    return f"{format_timestamp(reading.ts)},{reading.mac:016x},{reading.power_w:.2f},{reading.seq}"


def parse_row(line: str) -> PowerReading:
    fields = line.split(",")
    if len(fields) != 4:
        raise ValueError(f"expected 4 fields, got {len(fields)}")
    ts = parse_timestamp(fields[0])
    mac = int(fields[1], 16)
    if mac <= 0:
        raise ValueError("mac must be nonzero")
    watts = float(fields[2])
    if watts < 0:
        raise ValueError("power must be >= 0")
    seq = int(fields[3])
    if not 0 <= seq <= 255:
        raise ValueError("seq out of range")
    # Re-quantize so a loaded reading is float-identical to the decoded wire count.
    return PowerReading(ts=ts, mac=mac, power_w=decode_count(round(watts * 50)), seq=seq)


class CsvStore:
    """Reading store with an in-memory mirror and an optional CSV file behind it.

    fresh=True truncates the file to its header (one file per run);
    otherwise existing rows are loaded and appended to.
    """

    def __init__(self, path: str | Path | None = None, *, fresh: bool = False) -> None:
        self.path = Path(path) if path is not None else None
        self.rows: list[PowerReading] = []
        self.skipped_rows = 0
        self._file = None
        if self.path is None:
            return
        if fresh or not self.path.exists() or self.path.stat().st_size == 0:
            self.path.write_text(CSV_HEADER + "\n", encoding="utf-8")
        else:
            self.rows, self.skipped_rows = load_history(self.path)
        self._file = self.path.open("a", encoding="utf-8", newline="")

    def append(self, reading: PowerReading) -> None:
        self.rows.append(reading)
        if self._file is not None:
            self._file.write(format_row(reading) + "\n")
            self._file.flush()

    def clear(self) -> None:
        self.rows = []
        if self.path is not None:
            if self._file is not None:
                self._file.close()
            self.path.write_text(CSV_HEADER + "\n", encoding="utf-8")
            self._file = self.path.open("a", encoding="utf-8", newline="")

    def select(self, mac: int | None = None, start: float | None = None,
               end: float | None = None) -> list[PowerReading]:
        out = []
        for r in self.rows:
            if mac is not None and r.mac != mac:
                continue
            if start is not None and r.ts < start:
                continue
            if end is not None and r.ts >= end:
                continue
            out.append(r)
        return out

    def close(self) -> None:
        if self._file is not None:
            self._file.close()
            self._file = None

    def __len__(self) -> int:
        return len(self.rows)


def load_history(path: str | Path) -> tuple[list[PowerReading], int]:
    """Read a store file back. Malformed rows are skipped and counted, never fatal."""
    rows: list[PowerReading] = []
    skipped = 0
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if lineno == 1 and line == CSV_HEADER:
                continue
            if not line:
                continue
            try:
                rows.append(parse_row(line))
            except ValueError as exc:
                skipped += 1
                log.warning("%s:%d: skipping malformed row (%s)", path, lineno, exc)
    return rows, skipped
