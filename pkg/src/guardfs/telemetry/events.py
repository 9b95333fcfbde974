"""Per-call telemetry events and their newline-delimited wire format.

One record per line::

    <ts_ms> <pid> <op> <percent-encoded path> <bytes> [<entropy>]

The entropy field is present only for writes and is written with ``repr`` so
replaying a log reproduces the floats bit for bit.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator
from urllib.parse import quote, unquote

from guardfs.calls import CallKind

log = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class FsEvent:
    ts: int  # unix ms
    pid: int
    op: CallKind
    path: str
    bytes: int = 0
    entropy: float | None = None

    def __post_init__(self):
        if self.bytes < 0:
            raise ValueError("negative byte count")
        if self.entropy is not None and not 0.0 <= self.entropy <= 8.0:
            raise ValueError(f"entropy out of range: {self.entropy}")

    def to_line(self) -> str:
        line = f"{self.ts} {self.pid} {self.op.value} {quote(self.path, safe='/')} {self.bytes}"
        if self.entropy is not None:
            line += f" {self.entropy!r}"
        return line

    @classmethod
    def from_line(cls, line: str) -> "FsEvent":
        parts = line.split()
        if len(parts) not in (5, 6):
            raise ValueError(f"malformed event record: {line!r}")
        ts, pid, op, path, nbytes = parts[:5]
        entropy = float(parts[5]) if len(parts) == 6 else None
        return cls(int(ts), int(pid), CallKind(op), unquote(path), int(nbytes), entropy)


class EventLog:
    """Append-only event sequence, optionally persisted to a file.

    Write failures (e.g. a full device) drop the event from the persistent
    copy and bump ``dropped``; the in-memory sequence is unaffected.
    """

    def __init__(self, path: str | Path | None = None, keep: bool = True):
        self.path = Path(path) if path is not None else None
        self.keep = keep
        self.events: list[FsEvent] = []
        self.dropped = 0
        self._lock = threading.Lock()
        self._fh = open(self.path, "a", encoding="utf-8") if self.path is not None else None

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self) -> Iterator[FsEvent]:
        return iter(list(self.events))

    def append(self, event: FsEvent) -> None:
        with self._lock:
            if self.keep:
                self.events.append(event)
            if self._fh is not None:
                try:
                    self._fh.write(event.to_line() + "\n")
                except OSError as exc:
                    self.dropped += 1
                    if self.dropped == 1:
                        log.warning("event log write failed, dropping events: %s", exc)

    def flush(self) -> None:
        with self._lock:
            if self._fh is not None:
                try:
                    self._fh.flush()
                except OSError:
                    pass

    def close(self) -> None:
        with self._lock:
            if self._fh is not None:
                try:
                    self._fh.close()
                except OSError:
                    pass
                self._fh = None

    @classmethod
    def load(cls, path: str | Path) -> "EventLog":
        out = cls()
        out.events = list(read_events(path))
        return out


def read_events(path: str | Path) -> Iterator[FsEvent]:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield FsEvent.from_line(line)


def write_events(events: Iterable[FsEvent], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ev in events:
            fh.write(ev.to_line() + "\n")
