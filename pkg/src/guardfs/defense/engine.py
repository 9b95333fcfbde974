"""Defense strategies as a per-call decision over shared verdict state."""

from __future__ import annotations

import enum
import logging
import math
import os
import threading
from dataclasses import dataclass
from typing import Callable, Iterable

from guardfs.calls import CallContext, CallKind

log = logging.getLogger(__name__)


class ModeKind(enum.Enum):
    NONE = "none"
    PKILL = "pkill"
    OBF = "obf"
    DELOBF = "delobf"
    TRACKOBF = "trackobf"


@dataclass(frozen=True)
class DefenseMode:
    kind: ModeKind
    T: float = 0.0  # gate duration in seconds (DelObf / TrackObf)
    # Gate only namespace/content-changing calls (default) or every call.
    gate_all_calls: bool = False

    def __post_init__(self):
        if self.kind in (ModeKind.DELOBF, ModeKind.TRACKOBF) and not self.T > 0:
            raise ValueError(f"{self.kind.value} needs a positive T")

    @classmethod
    def none(cls) -> "DefenseMode":
        return cls(ModeKind.NONE)

    @classmethod
    def pkill(cls) -> "DefenseMode":
        return cls(ModeKind.PKILL)

    @classmethod
    def obf(cls) -> "DefenseMode":
        return cls(ModeKind.OBF)

    @classmethod
    def delobf(cls, T: float, gate_all_calls: bool = False) -> "DefenseMode":
        return cls(ModeKind.DELOBF, T, gate_all_calls)

    @classmethod
    def trackobf(cls, T: float, gate_all_calls: bool = False) -> "DefenseMode":
        return cls(ModeKind.TRACKOBF, T, gate_all_calls)

    @classmethod
    def parse(cls, text: str, T: float | None = None) -> "DefenseMode":
        """Parse ``none``, ``pkill``, ``obf``, ``delobf:5`` or ``trackobf:5``
        (case-insensitive, ``+``/``_`` separators tolerated)."""
        name, _, t = text.strip().lower().replace("+", "").replace("_", "").partition(":")
        aliases = {"nodefense": "none", "no": "none", "kill": "pkill", "delobf": "delobf",
                   "del": "delobf", "track": "trackobf", "trackobf": "trackobf"}
        name = aliases.get(name, name)
        try:
            kind = ModeKind(name)
        except ValueError:
            raise ValueError(f"unknown defense mode {text!r}") from None
        if t:
            T = float(t)
        if kind in (ModeKind.DELOBF, ModeKind.TRACKOBF):
            return cls(kind, float(T if T is not None else 5.0))
        return cls(kind)

    def label(self) -> str:
        if self.kind in (ModeKind.DELOBF, ModeKind.TRACKOBF):
            return f"{self.kind.value}:{self.T:g}"
        return self.kind.value

    @property
    def obfuscating(self) -> bool:
        return self.kind in (ModeKind.OBF, ModeKind.DELOBF, ModeKind.TRACKOBF)


class Verdict(enum.Enum):
    UNKNOWN = "unknown"
    BENIGN = "benign"
    MALICIOUS = "malicious"


@dataclass(frozen=True)
class VerdictRecord:
    state: Verdict
    decided_at: float | None = None  # seconds, when the overlay applied it


UNKNOWN = VerdictRecord(Verdict.UNKNOWN)


class VerdictStore:
    """pid -> verdict table shared by the file-system and detection planes.

    Reads take no lock (dict lookups are atomic); writes are serialized.
    With ``propagate`` set, a PID whose ancestor is malicious is treated as
    malicious too, so worker children of a flagged process cannot reopen the
    loss window.
    """

    EXPIRY_S = 60.0

    def __init__(self, propagate: bool = True, ancestry: Callable[[int], Iterable[int]] | None = None):
        self.propagate = propagate
        self.ancestry = ancestry if ancestry is not None else proc_ancestry
        self._table: dict[int, VerdictRecord] = {}
        self._first_seen: dict[int, float] = {}
        self._died_at: dict[int, float] = {}
        self._n_malicious = 0
        self._lock = threading.Lock()

    def __contains__(self, pid: int) -> bool:
        return pid in self._table

    def get(self, pid: int) -> VerdictRecord:
        return self._table.get(pid, UNKNOWN)

    def effective(self, pid: int) -> VerdictRecord:
        rec = self._table.get(pid, UNKNOWN)
        if rec.state is Verdict.MALICIOUS or not self.propagate or self._n_malicious == 0:
            return rec
        for anc in self.ancestry(pid):
            arec = self._table.get(anc)
            if arec is not None and arec.state is Verdict.MALICIOUS:
                return arec
        return rec

    def first_seen(self, pid: int) -> float | None:
        return self._first_seen.get(pid)

    def touch(self, pid: int, now: float) -> float:
        """Register the first time a PID was seen; returns that time."""
        t = self._first_seen.get(pid)
        if t is None:
            with self._lock:
                t = self._first_seen.setdefault(pid, now)
        return t

    def set(self, pid: int, verdict: Verdict, now: float | Callable[[], float]) -> bool:
        """Apply a transition; returns False when it is not permitted.

        `now` may be a clock function; it is then read after the new state is
        visible, so decided_at never precedes the moment readers can see it.
        """
        if verdict is Verdict.UNKNOWN:
            raise ValueError("cannot publish an Unknown verdict")
        with self._lock:
            cur = self._table.get(pid, UNKNOWN)
            if cur.state is Verdict.MALICIOUS:
                if verdict is Verdict.BENIGN:
                    log.warning("ignoring Malicious->Benign transition for pid %d", pid)
                    return False
                return True
            if cur.state is verdict:
                return True
            if verdict is Verdict.MALICIOUS:
                self._n_malicious += 1
            if callable(now):
                self._table[pid] = VerdictRecord(verdict, None)
                self._table[pid] = VerdictRecord(verdict, now())
            else:
                self._table[pid] = VerdictRecord(verdict, now)
            return True

    def malicious_pids(self) -> list[int]:
        return [p for p, r in self._table.items() if r.state is Verdict.MALICIOUS]

    def items(self) -> list[tuple[int, VerdictRecord]]:
        return list(self._table.items())

    def gc(self, now: float, is_alive: Callable[[int], bool] = None) -> list[int]:
        """Drop entries whose PID has been dead for EXPIRY_S seconds."""
        is_alive = is_alive or pid_alive
        removed = []
        with self._lock:
            for pid in list(set(self._table) | set(self._first_seen)):
                if is_alive(pid):
                    self._died_at.pop(pid, None)
                    continue
                died = self._died_at.setdefault(pid, now)
                if now - died >= self.EXPIRY_S:
                    rec = self._table.pop(pid, None)
                    if rec is not None and rec.state is Verdict.MALICIOUS:
                        self._n_malicious -= 1
                    self._first_seen.pop(pid, None)
                    self._died_at.pop(pid, None)
                    removed.append(pid)
        return removed


class ActionKind(enum.Enum):
    FORWARD = "forward"
    FABRICATE = "fabricate"
    DELAY = "delay"
    KILL = "kill"


@dataclass(frozen=True)
class Action:
    kind: ActionKind
    deadline: float | None = None  # seconds, for DELAY

    def __str__(self) -> str:
        return self.kind.value


FORWARD = Action(ActionKind.FORWARD)
FABRICATE = Action(ActionKind.FABRICATE)
KILL = Action(ActionKind.KILL)


def gate_deadline(now: float, T: float) -> float:
    """End of the wall-clock-aligned gate window containing `now`."""
    return (math.floor(now / T) + 1) * T


def decide(ctx: CallContext, kind: CallKind, mode: DefenseMode, store: VerdictStore,
           now: float | None = None, released: bool = False) -> Action:
    """Decision table for one call.

    `released` marks the re-decision of a call that already waited out its
    gate; it then gets the post-gate treatment instead of a new delay.
    """
    if now is None:
        now = ctx.timestamp / 1e9
    mk = mode.kind
    if mk is ModeKind.NONE:
        return FORWARD
    state = store.effective(ctx.pid).state
    if mk is ModeKind.PKILL:
        return KILL if state is Verdict.MALICIOUS else FORWARD
    obfuscate = state is Verdict.MALICIOUS and kind.fabricable
    gated_kind = mode.gate_all_calls or kind.fabricable
    if mk is ModeKind.OBF or released:
        return FABRICATE if obfuscate else FORWARD
    if mk is ModeKind.DELOBF:
        if gated_kind:
            return Action(ActionKind.DELAY, gate_deadline(now, mode.T))
        return FABRICATE if obfuscate else FORWARD
    if mk is ModeKind.TRACKOBF:
        if state is Verdict.UNKNOWN and gated_kind:
            first = store.first_seen(ctx.pid)
            if first is None:
                first = now
            deadline = first + mode.T
            if now < deadline:
                return Action(ActionKind.DELAY, deadline)
        return FABRICATE if obfuscate else FORWARD
    raise AssertionError(mk)


def proc_ancestry(pid: int, limit: int = 64) -> list[int]:
    """Parent chain of `pid` from /proc, nearest first (excluding pid 0)."""
    out = []
    cur = pid
    for _ in range(limit):
        ppid = proc_ppid(cur)
        if ppid is None or ppid <= 0 or ppid in out:
            break
        out.append(ppid)
        if ppid == 1:
            break
        cur = ppid
    return out


def proc_ppid(pid: int) -> int | None:
    try:
        with open(f"/proc/{pid}/stat", "rb") as fh:
            data = fh.read()
    except OSError:
        return None
    # comm may contain spaces/parens; fields resume after the last ')'
    rest = data[data.rfind(b")") + 2:].split()
    return int(rest[1]) if len(rest) > 1 else None


def proc_state(pid: int) -> str | None:
    try:
        with open(f"/proc/{pid}/stat", "rb") as fh:
            data = fh.read()
    except OSError:
        return None
    rest = data[data.rfind(b")") + 2:].split()
    return rest[0].decode() if rest else None


def pid_alive(pid: int) -> bool:
    """True unless the PID is gone or a zombie."""
    state = proc_state(pid)
    return state is not None and state not in ("Z", "X")


def proc_tgid(tid: int) -> int:
    """Thread-group id for a thread id; FUSE reports the calling thread."""
    try:
        with open(f"/proc/{tid}/status", "rb") as fh:
            for line in fh:
                if line.startswith(b"Tgid:"):
                    return int(line.split()[1])
    except OSError:
        pass
    return tid


def proc_descendants(pid: int) -> list[int]:
    """All descendants of `pid`, breadth-first, from one /proc scan."""
    parent: dict[int, list[int]] = {}
    for e in os.listdir("/proc"):
        if e.isdigit():
            pp = proc_ppid(int(e))
            if pp is not None:
                parent.setdefault(pp, []).append(int(e))
    out, frontier = [], [pid]
    while frontier:
        nxt = []
        for p in frontier:
            for c in parent.get(p, ()):
                if c not in out:
                    out.append(c)
                    nxt.append(c)
        frontier = nxt
    return out
