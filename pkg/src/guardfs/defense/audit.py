"""Defense audit log: ``action <ts_ms> <pid> <kind> <forward|fabricate|delay|kill>``."""

from __future__ import annotations

import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

from guardfs.calls import CallKind
from guardfs.defense.engine import ActionKind


@dataclass(frozen=True)
class AuditRecord:
    ts: int
    pid: int
    kind: CallKind
    action: ActionKind

    def to_line(self) -> str:
        return f"action {self.ts} {self.pid} {self.kind.value} {self.action.value}"

    @classmethod
    def from_line(cls, line: str) -> "AuditRecord":
        parts = line.split()
        if len(parts) != 5 or parts[0] != "action":
            raise ValueError(f"malformed audit record: {line!r}")
        return cls(int(parts[1]), int(parts[2]), CallKind(parts[3]), ActionKind(parts[4]))


class AuditLog:
    def __init__(self, path: str | Path | None = None, keep: bool = True):
        self.path = Path(path) if path is not None else None
        self.keep = keep
        self.records: list[AuditRecord] = []
        self._lock = threading.Lock()
        self._fh = open(self.path, "a", encoding="utf-8") if self.path is not None else None

    def record(self, ts_ms: int, pid: int, kind: CallKind, action: ActionKind) -> None:
        rec = AuditRecord(ts_ms, pid, kind, action)
        with self._lock:
            if self.keep:
                self.records.append(rec)
            if self._fh is not None:
                try:
                    self._fh.write(rec.to_line() + "\n")
                except OSError:
                    pass

    def flush(self) -> None:
        with self._lock:
            if self._fh is not None:
                self._fh.flush()

    def close(self) -> None:
        with self._lock:
            if self._fh is not None:
                self._fh.close()
                self._fh = None


def read_audit(path: str | Path) -> Iterator[AuditRecord]:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                yield AuditRecord.from_line(line)
