"""Windowing of the event stream and per-PID feature aggregation."""

from __future__ import annotations

import threading
from dataclasses import dataclass, field, fields
from typing import Iterable, Iterator

from guardfs.calls import CallKind
from guardfs.telemetry.events import EventLog, FsEvent

# Order of the numeric columns fed to classifiers.
FEATURE_NAMES = ("writes", "reads", "renames", "unlinks", "creates", "e_min", "e_mean", "e_max")

_COUNTED = {
    CallKind.WRITE: "writes",
    CallKind.READ: "reads",
    CallKind.RENAME: "renames",
    CallKind.UNLINK: "unlinks",
    CallKind.CREATE: "creates",
}


@dataclass
class Window:
    start: int  # unix ms, a multiple of the window length
    length: int  # seconds
    events: list[FsEvent] = field(default_factory=list)

    @property
    def end(self) -> int:
        return self.start + self.length * 1000

    def contains(self, ts: int) -> bool:
        return self.start <= ts < self.end


@dataclass(frozen=True)
class FeatureVector:
    window_start: int
    pid: int
    writes: int = 0
    reads: int = 0
    renames: int = 0
    unlinks: int = 0
    creates: int = 0
    e_min: float = 0.0
    e_mean: float = 0.0
    e_max: float = 0.0

    def features(self) -> tuple[float, ...]:
        return tuple(float(getattr(self, name)) for name in FEATURE_NAMES)


CSV_COLUMNS = tuple(f.name for f in fields(FeatureVector))


def window_start(ts_ms: int, length: int) -> int:
    span = length * 1000
    return ts_ms - ts_ms % span


def aggregate(window: Window) -> list[FeatureVector]:
    """One feature vector per PID with at least one event in the window,
    ordered by PID."""
    counts: dict[int, dict[str, int]] = {}
    entropies: dict[int, list[float]] = {}
    for ev in window.events:
        c = counts.setdefault(ev.pid, {})
        name = _COUNTED.get(ev.op)
        if name is not None:
            c[name] = c.get(name, 0) + 1
        if ev.op is CallKind.WRITE:
            entropies.setdefault(ev.pid, []).append(ev.entropy if ev.entropy is not None else 0.0)
    out = []
    for pid in sorted(counts):
        es = entropies.get(pid)
        if es:
            e_min, e_max, e_mean = min(es), max(es), sum(es) / len(es)
            # summation rounding can push the mean a ulp outside [min, max]
            e_mean = min(max(e_mean, e_min), e_max)
        else:
            e_min = e_mean = e_max = 0.0
        out.append(FeatureVector(window.start, pid, e_min=e_min, e_mean=e_mean, e_max=e_max, **counts[pid]))
    return out


def window_stream(events: EventLog | Iterable[FsEvent], length: int) -> Iterator[Window]:
    """Contiguous, epoch-aligned windows covering the time span of the events.

    Events are assumed to be in non-decreasing timestamp order, as recorded.
    """
    if length <= 0:
        raise ValueError("window length must be positive")
    span = length * 1000
    current: Window | None = None
    for ev in events:
        if current is None:
            current = Window(window_start(ev.ts, length), length)
        while ev.ts >= current.end:
            yield current
            current = Window(current.end, length)
        current.events.append(ev)
    if current is not None:
        yield current


class WindowRecorder:
    """Live recorder: appends events to the open window and the persistent log,
    and hands out closed windows.

    Events stamped before the open window's start are kept in the open window
    (windows never overlap) and counted in ``clock_skew``.
    """

    def __init__(self, length: int, log: EventLog | None = None, start_ms: int | None = None):
        if length <= 0:
            raise ValueError("window length must be positive")
        self.length = length
        self.log = log if log is not None else EventLog()
        self.clock_skew = 0
        self.recorded = 0
        self._open: Window | None = None
        self._pending: list[Window] = []
        self._lock = threading.Lock()
        if start_ms is not None:
            self._open = Window(window_start(start_ms, length), length)

    def record(self, event: FsEvent) -> None:
        with self._lock:
            w = self._open
            if w is None:
                w = self._open = Window(window_start(event.ts, self.length), self.length)
            if event.ts < w.start:
                self.clock_skew += 1
                event = FsEvent(w.start, event.pid, event.op, event.path, event.bytes, event.entropy)
            elif event.ts >= w.end:
                # The timer has not closed the window yet; keep events in
                # their own window by stashing the finished one.
                self._roll(event.ts)
                w = self._open
            w.events.append(event)
            self.recorded += 1
            self.log.append(event)

    def _roll(self, ts: int) -> None:
        # caller holds the lock
        w = self._open
        while ts >= w.end:
            self._pending.append(w)
            w = Window(w.end, self.length)
        self._open = w

    def close_until(self, now_ms: int) -> list[Window]:
        """Close and return every window whose end is at or before `now_ms`."""
        with self._lock:
            closed, self._pending = self._pending, []
            w = self._open
            if w is None:
                w = self._open = Window(window_start(now_ms, self.length), self.length)
            while w.end <= now_ms:
                closed.append(w)
                w = Window(w.end, self.length)
            self._open = w
        if closed:
            self.log.flush()
        return closed

    @property
    def open_window_start(self) -> int | None:
        return self._open.start if self._open is not None else None
