"""Fabricated responses and process termination."""

from __future__ import annotations

import errno
import logging
import os
import signal
import stat
import time
from dataclasses import dataclass
from typing import Callable

from guardfs.calls import Attr, CallKind, SyscallRequest, SyscallResponse
from guardfs.defense.engine import pid_alive, proc_descendants

log = logging.getLogger(__name__)

MIN_FABRICATION_DELAY = 50e-6
DEFAULT_NOMINAL_THROUGHPUT = 200e6  # bytes/s


def fabrication_delay(nbytes: int, nominal_throughput: float = DEFAULT_NOMINAL_THROUGHPUT) -> float:
    """How long a fabricated call waits so its latency tracks a genuine one."""
    return max(MIN_FABRICATION_DELAY, nbytes / nominal_throughput)


def fabricate_response(req: SyscallRequest, fh: int | None = None, now_ns: int | None = None) -> SyscallResponse:
    """Success response for a modifying call that never reaches the underlay.

    A write reports the full buffer length. Creates get a handle (`fh`, issued
    by the caller's handle table) and plausible attributes.
    """
    kind = req.kind
    if not kind.fabricable:
        raise AssertionError(f"refusing to fabricate a non-modifying call: {kind.value}")
    if kind is CallKind.WRITE:
        return SyscallResponse(count=len(req.data))
    if kind in (CallKind.CREATE, CallKind.MKDIR):
        t = now_ns if now_ns is not None else time.time_ns()
        is_dir = kind is CallKind.MKDIR
        mode = (stat.S_IFDIR if is_dir else stat.S_IFREG) | (req.mode & 0o7777)
        attr = Attr(0, mode, 2 if is_dir else 1, os.getuid(), os.getgid(), 4096 if is_dir else 0,
                    8 if is_dir else 0, t, t, t)
        return SyscallResponse(attr=attr, fh=fh if kind is CallKind.CREATE else None)
    return SyscallResponse()


@dataclass(frozen=True)
class KillResult:
    ok: bool
    reason: str = ""

    def __bool__(self) -> bool:
        return self.ok


def kill_process(pid: int, timeout: float = 1.0, descendants: bool = True) -> KillResult:
    """SIGKILL `pid` (and its descendants) and wait for the OS to confirm.

    A zombie counts as terminated. PID 1 and the calling process are refused
    without sending a signal.
    """
    if pid <= 0:
        raise ValueError("pid must be positive")
    if pid == 1 or pid == os.getpid():
        return KillResult(False, "permission")
    if not pid_alive(pid):
        return KillResult(False, "already dead")
    targets = [pid] + (proc_descendants(pid) if descendants else [])
    for p in targets:
        try:
            os.kill(p, signal.SIGKILL)
        except ProcessLookupError:
            if p == pid:
                return KillResult(False, "already dead")
        except PermissionError:
            if p == pid:
                return KillResult(False, "permission")
    deadline = time.monotonic() + timeout
    while any(pid_alive(p) for p in targets):
        if time.monotonic() > deadline:
            return KillResult(False, "still alive after SIGKILL")
        time.sleep(0.002)
    return KillResult(True)


Killer = Callable[[int], KillResult]

EINTR = errno.EINTR
