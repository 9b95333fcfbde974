"""In-process call driver: issue file-system calls directly into a session."""

from __future__ import annotations

import os

from guardfs.calls import CallContext, CallKind, SyscallRequest, SyscallResponse
from guardfs.clock import SystemClock


class ScriptedDriver:
    """Drives a session from Python code instead of a kernel mount.

    Calls are timestamped from `clock`, so with a virtual clock a scripted
    scenario is fully deterministic.
    """

    def __init__(self, clock=None):
        self.clock = clock if clock is not None else SystemClock()
        self.session = None

    def start(self, session) -> None:
        self.session = session

    def stop(self) -> None:
        pass

    def request(self, pid: int, kind: CallKind, **payload) -> SyscallRequest:
        return SyscallRequest(CallContext(pid, self.clock.now_ns(), kind), **payload)

    def submit(self, pid: int, kind: CallKind, **payload):
        """Submit without waiting; returns the PendingCall."""
        if self.session is None:
            raise RuntimeError("driver not attached")
        return self.session.submit(self.request(pid, kind, **payload))

    def call(self, pid: int, kind: CallKind, timeout: float | None = None, **payload) -> SyscallResponse:
        return self.submit(pid, kind, **payload).wait(timeout)

    def process(self, pid: int) -> "ScriptedProcess":
        return ScriptedProcess(self, pid)


class ScriptedProcess:
    """POSIX-flavoured helpers for one PID; every helper is a single call."""

    def __init__(self, driver: ScriptedDriver, pid: int, timeout: float | None = None):
        self.driver = driver
        self.pid = pid
        self.timeout = timeout

    def _call(self, kind: CallKind, **payload) -> SyscallResponse:
        return self.driver.call(self.pid, kind, self.timeout, **payload)

    def open(self, path: str, flags: int = os.O_RDONLY) -> SyscallResponse:
        return self._call(CallKind.OPEN, path=path, flags=flags)

    def create(self, path: str, flags: int = os.O_WRONLY, mode: int = 0o644) -> SyscallResponse:
        return self._call(CallKind.CREATE, path=path, flags=flags, mode=mode)

    def read(self, fh: int, size: int, offset: int = 0) -> SyscallResponse:
        return self._call(CallKind.READ, fh=fh, size=size, offset=offset)

    def write(self, fh: int, data: bytes, offset: int = 0) -> SyscallResponse:
        return self._call(CallKind.WRITE, fh=fh, data=data, offset=offset)

    def release(self, fh: int) -> SyscallResponse:
        return self._call(CallKind.RELEASE, fh=fh)

    def rename(self, old: str, new: str) -> SyscallResponse:
        return self._call(CallKind.RENAME, path=old, new_path=new)

    def unlink(self, path: str) -> SyscallResponse:
        return self._call(CallKind.UNLINK, path=path)

    def mkdir(self, path: str, mode: int = 0o755) -> SyscallResponse:
        return self._call(CallKind.MKDIR, path=path, mode=mode)

    def rmdir(self, path: str) -> SyscallResponse:
        return self._call(CallKind.RMDIR, path=path)

    def truncate(self, path: str, length: int, fh: int | None = None) -> SyscallResponse:
        return self._call(CallKind.TRUNCATE, path=path, length=length, fh=fh)

    def listdir(self, path: str = "/") -> SyscallResponse:
        return self._call(CallKind.READDIR, path=path)

    def stat(self, path: str) -> SyscallResponse:
        return self._call(CallKind.GETATTR, path=path)
