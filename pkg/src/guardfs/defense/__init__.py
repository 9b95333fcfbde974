"""Reactive defense strategies (PKILL, OBF, DEL+OBF, TRACK+OBF)."""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass

from guardfs.calls import CallContext, CallKind
from guardfs.clock import SystemClock
from guardfs.defense.actions import (
    KillResult,
    Killer,
    fabricate_response,
    fabrication_delay,
    kill_process,
)
from guardfs.defense.audit import AuditLog, AuditRecord, read_audit
from guardfs.defense.engine import (
    FABRICATE,
    FORWARD,
    KILL,
    Action,
    ActionKind,
    DefenseMode,
    ModeKind,
    Verdict,
    VerdictRecord,
    VerdictStore,
    decide,
    gate_deadline,
)
from guardfs.defense.gate import GateBook, PendingGate, Waiter, gate_release

log = logging.getLogger(__name__)


@dataclass
class KillEvent:
    pid: int
    verdict_at: float
    result: KillResult
    confirmed_at: float | None


class DefenseEngine:
    """Mode + verdict store + gates for one mount."""

    def __init__(self, mode: DefenseMode, store: VerdictStore | None = None,
                 killer: Killer | None = None, grace: float = 1.0, clock=None):
        self.mode = mode
        self.clock = clock if clock is not None else SystemClock()
        self.store = store if store is not None else VerdictStore()
        self.killer = killer if killer is not None else kill_process
        self.gates = GateBook(grace)
        self.kills: list[KillEvent] = []
        self._killed: set[int] = set()
        self._kill_lock = threading.Lock()

    def decide(self, ctx: CallContext, kind: CallKind, now: float, released: bool = False) -> Action:
        self.store.touch(ctx.pid, now)
        return decide(ctx, kind, self.mode, self.store, now=now, released=released)

    def on_verdict(self, pid: int, verdict: Verdict, now: float | None = None) -> bool:
        """Apply a verdict; without `now` it is stamped from the engine clock
        once the new state is visible."""
        applied = self.store.set(pid, verdict, self.clock.now if now is None else now)
        if applied and verdict is Verdict.MALICIOUS and self.mode.kind is ModeKind.PKILL:
            self.ensure_killed(pid, self.store.get(pid).decided_at)
        return applied

    def ensure_killed(self, pid: int, now: float) -> KillResult | None:
        with self._kill_lock:
            if pid in self._killed:
                return None
            self._killed.add(pid)
        result = self.killer(pid)
        confirmed = self.clock.now() if result.ok else None
        self.kills.append(KillEvent(pid, now, result, confirmed))
        if not result.ok:
            log.warning("kill of pid %d failed: %s", pid, result.reason)
        return result

    def mark_classified(self, through: float) -> None:
        self.gates.mark_classified(through)

    def has_verdict(self, pid: int) -> bool:
        return self.store.effective(pid).state is not Verdict.UNKNOWN


__all__ = [
    "Action",
    "ActionKind",
    "AuditLog",
    "AuditRecord",
    "DefenseEngine",
    "DefenseMode",
    "FABRICATE",
    "FORWARD",
    "GateBook",
    "KILL",
    "KillEvent",
    "KillResult",
    "ModeKind",
    "PendingGate",
    "Verdict",
    "VerdictRecord",
    "VerdictStore",
    "Waiter",
    "decide",
    "fabricate_response",
    "fabrication_delay",
    "gate_deadline",
    "gate_release",
    "kill_process",
    "read_audit",
]
