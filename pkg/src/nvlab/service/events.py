"""Per-session event fan-out with bounded buffering.

Every connected session gets its own subscriber with a strictly
increasing sequence number and a bounded queue. Publishers never block
on consumers: a subscriber whose queue overflows is marked dead and its
connection is closed, so a slow client can never stall the instrument.
"""

import queue
import threading
from typing import List

EVENT_KINDS = ("state_changed", "experiment_started", "progress",
               "point_ready", "experiment_done", "error")

DEFAULT_BUFFER = 4096


class Subscriber:
    """One session's ordered event queue."""

    def __init__(self, maxsize: int = DEFAULT_BUFFER):
        self.queue: "queue.Queue[dict]" = queue.Queue(maxsize)
        self.alive = True
        self._seq = 0
        self._lock = threading.Lock()

    def push(self, kind: str, payload: dict) -> None:
        with self._lock:
            if not self.alive:
                return
            self._seq += 1
            event = {"seq": self._seq, "kind": kind, "payload": payload}
            try:
                self.queue.put_nowait(event)
            except queue.Full:
                # slow consumer: drop it rather than block the instrument
                self.alive = False


class EventBus:
    """Thread-safe broadcast of SessionEvents to all subscribers."""

    def __init__(self, buffer_size: int = DEFAULT_BUFFER):
        self._subscribers: List[Subscriber] = []
        self._lock = threading.Lock()
        self._buffer_size = buffer_size

    def subscribe(self) -> Subscriber:
        sub = Subscriber(self._buffer_size)
        with self._lock:
            self._subscribers.append(sub)
        return sub

    def unsubscribe(self, sub: Subscriber) -> None:
        sub.alive = False
        with self._lock:
            if sub in self._subscribers:
                self._subscribers.remove(sub)

    def publish(self, kind: str, payload: dict) -> None:
        if kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {kind!r}")
        with self._lock:
            subs = list(self._subscribers)
        for sub in subs:
            sub.push(kind, payload)
