"""HTTP + live-stream surface over the server core.

Menu-to-endpoint mapping: Monitor -> POST /api/monitor, Node -> POST
/api/nodes/{mac}/power and /powersave (plus the timed-window editor),
Display -> GET /api/energy and DELETE /api/history. The stream at
/api/stream is Server-Sent Events, one JSON event document per message.
"""

from __future__ import annotations

import threading
from typing import Iterator, Literal

from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import StreamingResponse
from pydantic import BaseModel, Field

from . import events
from .servercore import Server, TimedWindow
from .storage import format_timestamp, parse_timestamp


class StandbyModel(BaseModel):
    phase: str
    samples_collected: int
    samples_needed: int
    multiplier: float
    threshold_w: float | None
    consecutive_required: int
    below_count: int


class WindowModel(BaseModel):
    off_at: str
    on_at: str


class NodeModel(BaseModel):
    mac: str
    label: str
    relay_on: bool
    last_power_w: float | None
    last_seen: str | None
    standby: StandbyModel
    windows: list[WindowModel]


class StatusModel(BaseModel):
    monitoring: bool
    nodes: int
    readings: int
    decode_errors: int
    duplicates: int


class MonitorRequest(BaseModel):
    running: bool


class PowerRequest(BaseModel):
    state: Literal["on", "off"]


class PowerSaveRequest(BaseModel):
    enabled: bool = True
    samples: int = Field(default=10, ge=1)
    multiplier: float = Field(default=1.2, gt=0)
    consecutive: int = Field(default=30, ge=1)


class WindowsRequest(BaseModel):
    windows: list[WindowModel]


class ReadingModel(BaseModel):
    ts: str
    mac: str
    power_w: float
    seq: int


class EnergyModel(BaseModel):
    start: str
    end: str
    mac: str | None
    joules: float
    kwh: float
    cost: float | None


def _bad_request(code: str, message: str) -> HTTPException:
    return HTTPException(status_code=400, detail={"code": code, "message": message})


def _parse_mac(text: str) -> int:
    try:
        mac = int(text, 16)
    except ValueError:
        raise _bad_request("invalid_mac", f"not a hex mac: {text!r}") from None
    if not 0 < mac <= 0xFFFF_FFFF_FFFF_FFFF:
        raise _bad_request("invalid_mac", f"mac out of range: {text!r}")
    return mac


def _parse_ts(text: str, name: str) -> int:
    try:
        return parse_timestamp(text)
    except ValueError:
        raise _bad_request("invalid_timestamp",
                           f"{name} must look like 2024-01-01T00:00:00Z, got {text!r}") from None


def _parse_time_of_day(text: str) -> int:
    parts = text.split(":")
    if len(parts) not in (2, 3):
        raise _bad_request("invalid_time", f"expected HH:MM or HH:MM:SS, got {text!r}")
    try:
        h, m = int(parts[0]), int(parts[1])
        s = int(parts[2]) if len(parts) == 3 else 0
    except ValueError:
        raise _bad_request("invalid_time", f"expected HH:MM or HH:MM:SS, got {text!r}") from None
    total = h * 3600 + m * 60 + s
    if not (0 <= h < 24 and 0 <= m < 60 and 0 <= s < 60):
        raise _bad_request("invalid_time", f"time of day out of range: {text!r}")
    return total


def _format_time_of_day(seconds: int) -> str:
    h, rest = divmod(seconds, 3600)
    m, s = divmod(rest, 60)
    return f"{h:02d}:{m:02d}" if s == 0 else f"{h:02d}:{m:02d}:{s:02d}"


def _node_model(snapshot: dict) -> NodeModel:
    windows = [
        WindowModel(off_at=_format_time_of_day(w["off_at"]),
                    on_at=_format_time_of_day(w["on_at"]))
        for w in snapshot["windows"]
    ]
    return NodeModel(**{**snapshot, "windows": windows})


def create_app(server: Server) -> FastAPI:
    app = FastAPI(title="plugwatch gateway", version="0.1.0")

    def _lookup(mac_text: str) -> int:
        mac = _parse_mac(mac_text)
        if mac not in server.records:
            raise HTTPException(status_code=404, detail={
                "code": "unknown_node", "message": f"no node {mac:016x}"})
        return mac

    @app.get("/api/status", response_model=StatusModel)
    def get_status():
        return server.status()

    @app.post("/api/monitor", response_model=StatusModel)
    def set_monitor(req: MonitorRequest):
        server.set_monitoring(req.running)
        return server.status()

    @app.get("/api/nodes", response_model=list[NodeModel])
    def list_nodes():
        return [_node_model(s) for s in server.nodes_snapshot()]

    @app.get("/api/nodes/{mac}", response_model=NodeModel)
    def get_node(mac: str):
        return _node_model(server.node_snapshot(_lookup(mac)))

    @app.post("/api/nodes/{mac}/power", response_model=NodeModel)
    def set_power(mac: str, req: PowerRequest):
        mac_int = _lookup(mac)
        server.set_power(mac_int, on=req.state == "on")
        return _node_model(server.node_snapshot(mac_int))

    @app.post("/api/nodes/{mac}/powersave", response_model=NodeModel)
    def set_powersave(mac: str, req: PowerSaveRequest):
        mac_int = _lookup(mac)
        if req.enabled:
            server.enable_power_save(mac_int, samples_needed=req.samples,
                                     multiplier=req.multiplier,
                                     consecutive_required=req.consecutive)
        else:
            server.disable_power_save(mac_int)
        return _node_model(server.node_snapshot(mac_int))

    @app.get("/api/nodes/{mac}/windows", response_model=list[WindowModel])
    def get_windows(mac: str):
        return _node_model(server.node_snapshot(_lookup(mac))).windows

    @app.put("/api/nodes/{mac}/windows", response_model=NodeModel)
    def put_windows(mac: str, req: WindowsRequest):
        mac_int = _lookup(mac)
        try:
            windows = [
                TimedWindow(off_at=_parse_time_of_day(w.off_at),
                            on_at=_parse_time_of_day(w.on_at))
                for w in req.windows
            ]
            server.configure_timed_windows(mac_int, windows)
        except ValueError as exc:
            raise _bad_request("invalid_windows", str(exc)) from None
        return _node_model(server.node_snapshot(mac_int))

    @app.get("/api/energy", response_model=EnergyModel)
    def get_energy(start: str, end: str, mac: str | None = None,
                   price: float | None = Query(default=None, ge=0)):
        start_ts = _parse_ts(start, "start")
        end_ts = _parse_ts(end, "end")
        if start_ts > end_ts:
            raise _bad_request("invalid_range", "start must be <= end")
        mac_int = _lookup(mac) if mac is not None else None
        result = server.energy_over_period(start_ts, end_ts, mac=mac_int,
                                           price_per_kwh=price)
        return EnergyModel(start=start, end=end, mac=mac,
                           joules=result.joules, kwh=result.kwh, cost=result.cost)

    @app.get("/api/readings", response_model=list[ReadingModel])
    def get_readings(mac: str | None = None, start: str | None = None,
                     end: str | None = None):
        mac_int = _lookup(mac) if mac is not None else None
        start_ts = _parse_ts(start, "start") if start is not None else None
        end_ts = _parse_ts(end, "end") if end is not None else None
        rows = server.readings(mac=mac_int, start=start_ts, end=end_ts)
        return [
            ReadingModel(ts=format_timestamp(r.ts), mac=f"{r.mac:016x}",
                         power_w=r.power_w, seq=r.seq)
            for r in rows
        ]

    @app.delete("/api/history", response_model=StatusModel)
    def delete_history():
        server.clear_history()
        return server.status()

    @app.get("/api/stream")
    def stream(limit: int | None = Query(default=None, ge=1)):
        sub = server.bus.subscribe()

        def event_lines() -> Iterator[str]:
            sent = 0
            try:
                yield ": connected\n\n"
                while limit is None or sent < limit:
                    event = sub.get(timeout=1.0)
                    if event is None:
                        if sub.closed:
                            break
                        yield ": keepalive\n\n"
                        continue
                    yield f"data: {event.to_json()}\n\n"
                    sent += 1
                    if event.kind == events.SUBSCRIBER_DROPPED:
                        break
            finally:
                server.bus.unsubscribe(sub)

        return StreamingResponse(event_lines(), media_type="text/event-stream",
                                 headers={"Cache-Control": "no-cache"})

    return app


class GatewayThread:
    """Run the gateway in a daemon thread beside the simulation loop."""

    def __init__(self, server: Server, host: str = "127.0.0.1", port: int = 8000) -> None:
        import uvicorn

        config = uvicorn.Config(create_app(server), host=host, port=port,
                                log_level="warning")
        self._uvicorn = uvicorn.Server(config)
        self._thread = threading.Thread(target=self._uvicorn.run, daemon=True)
        self.host = host
        self.port = port

    def start(self) -> None:
        self._thread.start()

    @property
    def started(self) -> bool:
        return self._uvicorn.started

    def stop(self) -> None:
        self._uvicorn.should_exit = True
        self._thread.join(timeout=5)


def serve(server: Server, host: str = "127.0.0.1", port: int = 8000) -> None:
    """Blocking variant: serve the gateway until interrupted."""
    import uvicorn

    uvicorn.run(create_app(server), host=host, port=port, log_level="info")
