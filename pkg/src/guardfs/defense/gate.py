"""Delay gates: calls held until a deadline so classification can finish
before their payload reaches the underlay."""

from __future__ import annotations

import threading
from collections import OrderedDict, deque
from dataclasses import dataclass, field
from typing import Any, Callable


@dataclass
class Waiter:
    call_id: int
    pid: int
    nbytes: int  # write payload length, 0 for other kinds
    payload: Any = None  # whatever the owner needs to resume the call


@dataclass
class PendingGate:
    deadline: float
    waiters: deque = field(default_factory=deque)
    buffered_bytes: int = 0
    # per-PID gates (TRACK first contact) carry their PID
    pid: int | None = None

    def add(self, waiter: Waiter) -> None:
        self.waiters.append(waiter)
        self.buffered_bytes += waiter.nbytes

    def __len__(self) -> int:
        return len(self.waiters)


def gate_release(gate: PendingGate, now: float) -> list[Waiter]:
    """Release every waiter once, in submission order, if the deadline passed.

    Before the deadline this is a no-op and returns an empty list.
    """
    if now < gate.deadline:
        return []
    out = list(gate.waiters)
    gate.waiters.clear()
    gate.buffered_bytes = 0
    return out


class GateBook:
    """All open gates of a mount.

    A gate becomes releasable at its deadline once the detection plane has
    had its say: for the global gates (DEL+OBF) that means the classification
    watermark reached the deadline; for per-PID gates (TRACK) a verdict for
    the PID suffices. `grace` bounds the extra wait if the detector is slow
    or absent.
    """

    def __init__(self, grace: float = 1.0):
        self.grace = grace
        self.watermark = float("-inf")  # classified through this instant
        self._global: "OrderedDict[float, PendingGate]" = OrderedDict()
        self._per_pid: dict[tuple[int, float], PendingGate] = {}
        self._lock = threading.Lock()
        self._ids = 0

    def next_id(self) -> int:
        with self._lock:
            self._ids += 1
            return self._ids

    def park(self, deadline: float, waiter: Waiter, pid_gate: bool = False) -> PendingGate:
        with self._lock:
            if pid_gate:
                key = (waiter.pid, deadline)
                gate = self._per_pid.get(key)
                if gate is None:
                    gate = self._per_pid[key] = PendingGate(deadline, pid=waiter.pid)
            else:
                gate = self._global.get(deadline)
                if gate is None:
                    gate = self._global[deadline] = PendingGate(deadline)
            gate.add(waiter)
            return gate

    def mark_classified(self, through: float) -> None:
        with self._lock:
            if through > self.watermark:
                self.watermark = through

    def buffered_bytes(self) -> int:
        with self._lock:
            return sum(g.buffered_bytes for g in self._global.values()) + sum(
                g.buffered_bytes for g in self._per_pid.values()
            )

    def waiting(self) -> int:
        with self._lock:
            return sum(len(g) for g in self._global.values()) + sum(len(g) for g in self._per_pid.values())

    def next_deadline(self) -> float | None:
        with self._lock:
            ds = [g.deadline for g in self._global.values()] + [g.deadline for g in self._per_pid.values()]
        return min(ds) if ds else None

    def due(self, now: float, has_verdict: Callable[[int], bool]) -> list[Waiter]:
        """Release and return the waiters of every gate that is ready at `now`."""
        out: list[Waiter] = []
        with self._lock:
            for deadline in list(self._global):
                if deadline > now:
                    break
                if self.watermark >= deadline or now >= deadline + self.grace:
                    out.extend(gate_release(self._global.pop(deadline), now))
            for key in sorted(self._per_pid, key=lambda k: k[1]):
                gate = self._per_pid[key]
                if gate.deadline > now:
                    continue
                if has_verdict(gate.pid) or self.watermark >= gate.deadline or now >= gate.deadline + self.grace:
                    out.extend(gate_release(self._per_pid.pop(key), now))
        return out

    def drain(self) -> list[Waiter]:
        """Release everything regardless of deadlines (detach)."""
        with self._lock:
            gates = list(self._global.values()) + sorted(self._per_pid.values(), key=lambda g: g.deadline)
            self._global.clear()
            self._per_pid.clear()
        out = []
        for g in sorted(gates, key=lambda g: g.deadline):
            out.extend(gate_release(g, g.deadline))
        return out
