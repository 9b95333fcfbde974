"""Time sources shared by the live runtime and the discrete-event simulator."""

from __future__ import annotations

import threading
import time


class SystemClock:
    """Wall-clock time (unix epoch)."""

    def now(self) -> float:
        return time.time()

    def now_ns(self) -> int:
        return time.time_ns()

    def now_ms(self) -> int:
        return time.time_ns() // 1_000_000


class VirtualClock:
    """Manually advanced clock used by the simulator and unit tests."""

    def __init__(self, start: float = 0.0):
        self._ns = int(round(start * 1e9))
        self._lock = threading.Lock()

    def now(self) -> float:
        return self._ns / 1e9

    def now_ns(self) -> int:
        return self._ns

    def now_ms(self) -> int:
        return self._ns // 1_000_000

    def set(self, t: float) -> None:
        ns = int(round(t * 1e9))
        with self._lock:
            if ns < self._ns:
                raise ValueError("virtual clock cannot run backwards")
            self._ns = ns

    def advance(self, dt: float) -> None:
        if dt < 0:
            raise ValueError("negative advance")
        with self._lock:
            self._ns += int(round(dt * 1e9))
