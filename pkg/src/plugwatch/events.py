"""In-process event bus behind the live stream.

Publishing never blocks ingestion: each subscriber has a bounded queue and a
subscriber that falls behind is dropped with a final marker event.
"""

from __future__ import annotations

import json
import queue
import threading
from dataclasses import dataclass, field
from typing import Any, Iterator

READING = "reading"
RELAY_CHANGED = "relay_changed"
STANDBY_ARMED = "standby_armed"
STANDBY_SHUTOFF = "standby_shutoff"
NODE_REGISTERED = "node_registered"
SUBSCRIBER_DROPPED = "subscriber_dropped"


@dataclass(frozen=True)
class ApiEvent:
    kind: str
    data: dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({"kind": self.kind, **self.data}, separators=(",", ":"))


class Subscription:
    def __init__(self, maxsize: int) -> None:
        self._queue: queue.Queue[ApiEvent] = queue.Queue(maxsize=maxsize)
        self.dropped = False
        self.closed = False

    def offer(self, event: ApiEvent) -> bool:
        try:
            self._queue.put_nowait(event)
            return True
        except queue.Full:
            self.dropped = True
            return False

    def get(self, timeout: float | None = None) -> ApiEvent | None:
        """Next event, or None on timeout / after the drop marker."""
        if self.closed:
            return None
        try:
            return self._queue.get(timeout=timeout)
        except queue.Empty:
            if self.dropped:
                self.closed = True
                return ApiEvent(SUBSCRIBER_DROPPED)
            return None

    def drain(self) -> Iterator[ApiEvent]:
        while True:
            try:
                yield self._queue.get_nowait()
            except queue.Empty:
                return


class EventBus:
    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._subs: list[Subscription] = []

    def subscribe(self, maxsize: int = 1024) -> Subscription:
        sub = Subscription(maxsize)
        with self._lock:
            self._subs.append(sub)
        return sub

    def unsubscribe(self, sub: Subscription) -> None:
        with self._lock:
            if sub in self._subs:
                self._subs.remove(sub)

    def publish(self, event: ApiEvent) -> None:
        with self._lock:
            keep = []
            for sub in self._subs:
                if sub.offer(event):
                    keep.append(sub)
            self._subs = keep

    def subscriber_count(self) -> int:
        with self._lock:
            return len(self._subs)
