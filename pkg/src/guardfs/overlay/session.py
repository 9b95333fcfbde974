"""Mount session: the per-call gateway between callers and the underlay."""

from __future__ import annotations

import errno
import logging
import threading
import time
from collections import Counter
from typing import Callable, Protocol

from guardfs.calls import CallKind, SyscallRequest, SyscallResponse
from guardfs.clock import SystemClock
from guardfs.defense import (
    FABRICATE,
    FORWARD,
    Action,
    ActionKind,
    AuditLog,
    DefenseEngine,
    ModeKind,
    Waiter,
    fabricate_response,
    fabrication_delay,
)
from guardfs.defense.actions import DEFAULT_NOMINAL_THROUGHPUT
from guardfs.overlay.paths import MountConfig
from guardfs.overlay.underlay import Underlay
from guardfs.telemetry import FsEvent, WindowRecorder, shannon_entropy

log = logging.getLogger(__name__)


class PendingCall:
    """A submitted call; completes immediately or when its gate releases."""

    __slots__ = ("req", "call_id", "response", "latency", "actions", "_event", "_callbacks", "_lock")

    def __init__(self, req: SyscallRequest, call_id: int):
        self.req = req
        self.call_id = call_id
        self.response: SyscallResponse | None = None
        self.latency = 0.0  # heuristic delay applied to fabricated answers
        self.actions: list[ActionKind] = []
        self._event = threading.Event()
        self._callbacks: list[Callable[["PendingCall"], None]] = []
        self._lock = threading.Lock()

    @property
    def done(self) -> bool:
        return self._event.is_set()

    def wait(self, timeout: float | None = None) -> SyscallResponse:
        if not self._event.wait(timeout):
            raise TimeoutError(f"call {self.call_id} still pending")
        return self.response

    def add_done_callback(self, fn: Callable[["PendingCall"], None]) -> None:
        with self._lock:
            if not self._event.is_set():
                self._callbacks.append(fn)
                return
        fn(self)

    def _complete(self, response: SyscallResponse) -> None:
        with self._lock:
            self.response = response
            self._event.set()
            callbacks, self._callbacks = self._callbacks, []
        for fn in callbacks:
            try:
                fn(self)
            except Exception:
                log.exception("completion callback failed")


class CallDriver(Protocol):
    """Feeds calls into a session: a kernel mount adapter or an in-process script."""

    def start(self, session: "MountSession") -> None: ...

    def stop(self) -> None: ...


class MountSession:
    """Routes every call through the defense engine, the underlay and telemetry.

    Exactly one telemetry event is recorded per submitted call, at submission,
    so held calls are visible to the detector while they wait.
    """

    def __init__(self, cfg: MountConfig, engine: DefenseEngine | None = None,
                 recorder: WindowRecorder | None = None, clock=None, audit: AuditLog | None = None,
                 *, fail_closed: bool = False, nominal_throughput: float = DEFAULT_NOMINAL_THROUGHPUT,
                 realtime: bool = True):
        self.cfg = cfg
        self.clock = clock if clock is not None else SystemClock()
        self.engine = engine if engine is not None else DefenseEngine(cfg.mode, clock=self.clock)
        self.recorder = recorder if recorder is not None else WindowRecorder(cfg.window_seconds)
        self.audit = audit if audit is not None else AuditLog()
        self.underlay = Underlay(cfg.underlay_root)
        self.handles = self.underlay.handles
        self.fail_closed = fail_closed
        self.nominal_throughput = nominal_throughput
        self.realtime = realtime
        self.stats: Counter = Counter()
        self.driver: CallDriver | None = None
        self.active = True
        self._ids = 0
        self._id_lock = threading.Lock()

    @property
    def mode(self):
        return self.engine.mode if self.engine is not None else self.cfg.mode

    # -- submission ---------------------------------------------------------

    def submit(self, req: SyscallRequest, on_done: Callable[[PendingCall], None] | None = None) -> PendingCall:
        with self._id_lock:
            self._ids += 1
            pending = PendingCall(req, self._ids)
        if on_done is not None:
            pending.add_done_callback(on_done)
        self._emit(req)
        # decision time is taken before the verdict store is read, so any
        # forward decided on a stale verdict is stamped before that verdict
        now = self.clock.now()
        action = self._decide(req, now, released=False)
        if action.kind is ActionKind.DELAY:
            self._audit(now, req, action)
            pending.actions.append(action.kind)
            nbytes = len(req.data) if req.kind is CallKind.WRITE else 0
            per_pid = self.mode.kind is ModeKind.TRACKOBF
            self.engine.gates.park(action.deadline, Waiter(pending.call_id, req.pid, nbytes, pending), per_pid)
            self.stats["delayed"] += 1
        else:
            self._execute(pending, action, now)
        return pending

    def dispatch(self, req: SyscallRequest, timeout: float | None = None) -> SyscallResponse:
        """Submit and block until the call completes."""
        return self.submit(req).wait(timeout)

    def _emit(self, req: SyscallRequest) -> None:
        k = req.kind
        path = req.path
        if req.fh is not None and k in (CallKind.READ, CallKind.WRITE, CallKind.RELEASE, CallKind.TRUNCATE):
            e = self.handles.get(req.fh)
            if e is not None:
                path = e.path
        if k is CallKind.WRITE:
            nbytes, ent = len(req.data), shannon_entropy(req.data)
        elif k is CallKind.READ:
            nbytes, ent = req.size, None
        else:
            nbytes, ent = 0, None
        self.recorder.record(FsEvent(req.ctx.timestamp // 1_000_000, req.pid, k, path, nbytes, ent))
        self.stats["events"] += 1

    def _decide(self, req: SyscallRequest, now: float, released: bool) -> Action:
        if self.engine is None:
            return FORWARD
        try:
            return self.engine.decide(req.ctx, req.kind, now, released=released)
        except Exception:
            log.warning("defense engine failed; %s", "failing closed" if self.fail_closed else "failing open",
                        exc_info=True)
            self.stats["engine_errors"] += 1
            if self.fail_closed and req.kind.fabricable:
                return FABRICATE
            return FORWARD

    def _audit(self, now: float, req: SyscallRequest, action: Action) -> None:
        self.audit.record(int(now * 1000), req.pid, req.kind, action.kind)

    def _execute(self, pending: PendingCall, action: Action, now: float) -> None:
        req = pending.req
        self._audit(now, req, action)
        pending.actions.append(action.kind)
        kind = action.kind
        if kind is ActionKind.FORWARD:
            resp = self.underlay.execute(req)
            self.stats["forwarded"] += 1
        elif kind is ActionKind.FABRICATE:
            resp = self._fabricate(req)
            pending.latency = fabrication_delay(len(req.data), self.nominal_throughput)
            if self.realtime:
                time.sleep(pending.latency)
            self.stats["fabricated"] += 1
        elif kind is ActionKind.KILL:
            # answer first: a caller blocked on this very call cannot die
            # until the kernel has its reply
            self.stats["killed"] += 1
            pending._complete(SyscallResponse(error=errno.EINTR))
            self.engine.ensure_killed(req.pid, now)
            return
        else:
            raise AssertionError(f"cannot execute {kind}")
        pending._complete(resp)

    def _fabricate(self, req: SyscallRequest) -> SyscallResponse:
        if req.kind is CallKind.CREATE:
            resp = fabricate_response(req, now_ns=req.ctx.timestamp)
            resp.fh = self.handles.add(None, req.path, req.pid, resp.attr)
            return resp
        if req.kind is CallKind.WRITE and req.fh is not None:
            e = self.handles.get(req.fh)
            if e is not None and e.ufd is None and e.attr is not None:
                end = req.offset + len(req.data)
                if end > e.attr.size:
                    e.attr = e.attr._replace(size=end, blocks=(end + 511) // 512)
        return fabricate_response(req, now_ns=req.ctx.timestamp)

    # -- gates ----------------------------------------------------------------

    def tick(self, now: float | None = None) -> int:
        """Release gates that are due; returns the number of calls released."""
        if now is None:
            now = self.clock.now()
        waiters = self.engine.gates.due(now, self.engine.has_verdict)
        for w in waiters:
            self._resume(w, now)
        return len(waiters)

    def _resume(self, w: Waiter, now: float) -> None:
        pending: PendingCall = w.payload
        action = self._decide(pending.req, now, released=True)
        self._execute(pending, action, now)

    def flush_gates(self, now: float | None = None) -> int:
        """Release every held call: genuine forwarding unless malicious."""
        if now is None:
            now = self.clock.now()
        waiters = self.engine.gates.drain()
        for w in waiters:
            self._resume(w, now)
        return len(waiters)


_ACTIVE: dict[str, MountSession] = {}
_ACTIVE_LOCK = threading.Lock()


class AlreadyAttached(RuntimeError):
    pass


def attach(cfg: MountConfig, driver: CallDriver | None = None, **session_kw) -> MountSession:
    """Create a session for `cfg` and start `driver` feeding it."""
    key = cfg.overlay_root.rstrip("/") or "/"
    with _ACTIVE_LOCK:
        if key in _ACTIVE:
            raise AlreadyAttached(f"{cfg.overlay_root} is already attached")
        session = MountSession(cfg, **session_kw)
        _ACTIVE[key] = session
    session.driver = driver
    if driver is not None:
        try:
            driver.start(session)
        except BaseException:
            with _ACTIVE_LOCK:
                _ACTIVE.pop(key, None)
            raise
    return session


def detach(session: MountSession) -> None:
    """Release held callers, stop the driver and telemetry, close handles."""
    if not session.active:
        return
    session.flush_gates()
    if session.driver is not None:
        session.driver.stop()
    session.flush_gates()
    session.active = False
    session.recorder.log.flush()
    session.audit.flush()
    session.underlay.close_all()
    key = session.cfg.overlay_root.rstrip("/") or "/"
    with _ACTIVE_LOCK:
        if _ACTIVE.get(key) is session:
            del _ACTIVE[key]
