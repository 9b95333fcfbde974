"""Run workload programs: as real OS processes, or inside a discrete-event
simulation that feeds a mount session directly."""

from __future__ import annotations

import errno
import heapq
import itertools
import json
import logging
import mmap
import os
import signal
import stat
import subprocess
import sys
import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from guardfs.adversary import ops
from guardfs.calls import CallContext, CallKind, SyscallRequest
from guardfs.defense.actions import KillResult
from guardfs.defense.engine import pid_alive, proc_descendants

log = logging.getLogger(__name__)

STAT_KEYS = ("bytes_attempted", "files_touched")


# -- real processes -----------------------------------------------------------


class RealRunner:
    """Interprets a program with real system calls below `root`.

    Runs inside the workload process. Spawn forks; the program runs in a
    fresh interpreter, so forking is safe.
    """

    def __init__(self, root: str, stats_path: str | None = None, pids_path: str | None = None):
        self.root = root
        self.stats_path = stats_path
        self.pids_path = pids_path
        self.counters: Counter = Counter()
        self.children: set[int] = set()
        self.role = "leader"

    def _full(self, rel: str) -> str:
        return os.path.join(self.root, rel.lstrip("/"))

    def _note_pid(self, pid: int) -> None:
        if self.pids_path:
            fd = os.open(self.pids_path, os.O_WRONLY | os.O_APPEND | os.O_CREAT, 0o644)
            try:
                os.write(fd, f"{pid}\n".encode())
            finally:
                os.close(fd)

    def _write_stats(self, started: float, code: int) -> None:
        if not self.stats_path:
            return
        fields = " ".join(f"{k}={self.counters[k]}" for k in sorted(self.counters))
        line = (f"pid={os.getpid()} role={self.role} exit={code} "
                f"duration_ms={int((time.time() - started) * 1000)} {fields}").rstrip() + "\n"
        fd = os.open(self.stats_path, os.O_WRONLY | os.O_APPEND | os.O_CREAT, 0o644)
        try:
            os.write(fd, line.encode())
        finally:
            os.close(fd)

    def run(self, program) -> int:
        started = time.time()
        self._note_pid(os.getpid())
        code = 0
        try:
            self._drive(program)
        except OSError as exc:
            log.error("workload failed: %s", exc)
            code = 1
        # wait for children so their stats land before ours
        for pid in list(self.children):
            try:
                os.waitpid(pid, 0)
            except ChildProcessError:
                pass
        self._write_stats(started, code)
        return code

    def _drive(self, gen) -> None:
        value, exc = None, None
        while True:
            try:
                op = gen.throw(exc) if exc is not None else gen.send(value)
            except StopIteration:
                return
            value, exc = None, None
            try:
                value = self._do(op)
            except OSError as e:
                exc = e

    def _do(self, op):
        t = type(op)
        if t is ops.Read:
            return os.pread(op.handle, op.size, op.offset)
        if t is ops.Write:
            return os.pwrite(op.handle, op.data, op.offset)
        if t is ops.Now:
            return time.time()
        if t is ops.Sleep:
            if op.seconds > 0:
                time.sleep(op.seconds)
            return None
        if t is ops.Count:
            self.counters[op.key] += op.amount
            return None
        if t is ops.Open:
            return os.open(self._full(op.path), (os.O_RDWR if op.write else os.O_RDONLY) | os.O_CLOEXEC)
        if t is ops.Create:
            return os.open(self._full(op.path), os.O_WRONLY | os.O_CREAT | os.O_TRUNC | os.O_CLOEXEC, 0o644)
        if t is ops.Close:
            os.close(op.handle)
            return None
        if t is ops.Stat:
            st = os.stat(self._full(op.path))
            return stat.S_ISDIR(st.st_mode), st.st_size
        if t is ops.ListDir:
            return sorted(os.listdir(self._full(op.path)))
        if t is ops.Rename:
            os.rename(self._full(op.src), self._full(op.dst))
            return None
        if t is ops.Unlink:
            os.unlink(self._full(op.path))
            return None
        if t is ops.Mkdir:
            os.mkdir(self._full(op.path))
            return None
        if t is ops.Truncate:
            os.truncate(self._full(op.path), op.length)
            return None
        if t is ops.Compute:
            return None
        if t is ops.Shared:
            buf = mmap.mmap(-1, 8 * max(1, op.size))
            return memoryview(buf).cast("q")
        if t is ops.Spawn:
            return self._spawn(op.program)
        if t is ops.Reap:
            return self._reap()
        raise TypeError(f"unknown op {op!r}")

    def _spawn(self, program: Callable) -> int:
        pid = os.fork()
        if pid == 0:
            code = 1
            try:
                self.counters = Counter()
                self.children = set()
                self.role = "worker"
                code = self.run(program())
            finally:
                os._exit(code)
        self.children.add(pid)
        return pid

    def _reap(self) -> list[int]:
        out = []
        for pid in list(self.children):
            try:
                done, _ = os.waitpid(pid, os.WNOHANG)
            except ChildProcessError:
                done = pid
            if done:
                self.children.discard(pid)
                out.append(pid)
        return out


@dataclass
class RunHandle:
    """A workload running as a tree of real OS processes."""

    proc: subprocess.Popen
    label: str
    stats_path: Path
    pids_path: Path
    started_at: float

    @property
    def pid(self) -> int:
        return self.proc.pid

    def pids(self) -> list[int]:
        """Leader and every worker it ever started, in start order."""
        try:
            text = self.pids_path.read_text()
        except FileNotFoundError:
            return [self.pid]
        out = [self.pid]
        for line in text.split():
            p = int(line)
            if p not in out:
                out.append(p)
        return out

    def poll(self) -> int | None:
        return self.proc.poll()

    def wait(self, timeout: float | None = None) -> int:
        return self.proc.wait(timeout)

    @property
    def returncode(self) -> int | None:
        return self.proc.returncode

    def alive_pids(self) -> list[int]:
        self.proc.poll()
        return [p for p in self.pids() if pid_alive(p)]

    def tree_gone(self) -> bool:
        return not self.alive_pids()

    def kill(self) -> None:
        for p in [self.pid] + proc_descendants(self.pid):
            try:
                os.kill(p, signal.SIGKILL)
            except ProcessLookupError:
                pass
        for p in self.pids():
            try:
                os.kill(p, signal.SIGKILL)
            except ProcessLookupError:
                pass
        try:
            self.proc.wait(5)
        except subprocess.TimeoutExpired:
            pass

    def stats(self) -> dict:
        """Totals over every process of the run that got to write stats."""
        out = {"processes": 0, "duration_ms": 0, **{k: 0 for k in STAT_KEYS}}
        try:
            lines = self.stats_path.read_text().splitlines()
        except FileNotFoundError:
            lines = []
        for line in lines:
            kv = dict(f.split("=", 1) for f in line.split())
            out["processes"] += 1
            for k, v in kv.items():
                if k in ("pid", "role", "exit"):
                    continue
                if k == "duration_ms":
                    if kv.get("role") == "leader":
                        out["duration_ms"] = int(v)
                    continue
                out[k] = out.get(k, 0) + int(v)
        return out

    def write_summary(self, path: str | Path) -> None:
        s = self.stats()
        s["exit"] = self.returncode
        s["label"] = self.label
        Path(path).write_text("".join(f"{k}={v}\n" for k, v in s.items()))


def launch(kind: str, spec, root: str | Path, workdir: str | Path, label: str | None = None) -> RunHandle:
    """Start a workload as a separate OS process tree targeting `root`."""
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    label = label or getattr(spec, "family", None) or getattr(spec, "workload", kind)
    stats = workdir / f"{label}.stats"
    pids = workdir / f"{label}.pids"
    for p in (stats, pids):
        p.unlink(missing_ok=True)
    payload = json.dumps({"kind": kind, "spec": spec.to_dict()})
    cmd = [sys.executable, "-m", "guardfs.adversary.runner", "--root", str(root),
           "--stats", str(stats), "--pids", str(pids), "--program", payload]
    proc = subprocess.Popen(cmd, start_new_session=True, stdin=subprocess.DEVNULL)
    return RunHandle(proc, label, stats, pids, time.time())


def program_for(kind: str, spec):
    from guardfs.adversary.benign import benign_program
    from guardfs.adversary.ransomware import ransomware_program

    if kind == "ransomware":
        return ransomware_program(spec)
    if kind == "benign":
        return benign_program(spec)
    raise ValueError(f"unknown program kind {kind!r}")


# -- simulation ------------------------------------------------------------------


@dataclass
class SimProc:
    pid: int
    parent: int | None
    gen: object
    label: str
    started: float
    alive: bool = True
    ended: float | None = None
    exit_code: int | None = None
    killed: bool = False
    counters: Counter = field(default_factory=Counter)
    reaped: list = field(default_factory=list)
    children: set = field(default_factory=set)


_OP_KIND = {
    ops.Read: CallKind.READ,
    ops.Write: CallKind.WRITE,
    ops.Open: CallKind.OPEN,
    ops.Create: CallKind.CREATE,
    ops.Close: CallKind.RELEASE,
    ops.Stat: CallKind.GETATTR,
    ops.ListDir: CallKind.READDIR,
    ops.Rename: CallKind.RENAME,
    ops.Unlink: CallKind.UNLINK,
    ops.Mkdir: CallKind.MKDIR,
    ops.Truncate: CallKind.TRUNCATE,
}


class SimExecutor:
    """Discrete-event scheduler for workload programs on a virtual clock.

    File-system ops become session calls stamped with the virtual time; a
    call held by a gate blocks only its own process. Window boundaries run
    the bound detector, then release due gates.
    """

    def __init__(self, clock, delta: float = 200e6, op_overhead: float = 20e-6, first_pid: int = 10_000):
        self.clock = clock
        self.delta = delta
        self.op_overhead = op_overhead
        self.procs: dict[int, SimProc] = {}
        self.session = None
        self.detector = None
        self.window = 5
        self._pids = itertools.count(first_pid)
        self._seq = itertools.count()
        self._heap: list = []

    def bind(self, session, detector=None, window: int = 5) -> None:
        self.session = session
        self.detector = detector
        self.window = window

    # process table ---------------------------------------------------------

    def spawn(self, program, label: str = "", parent: int | None = None, at: float | None = None) -> int:
        pid = next(self._pids)
        gen = program() if callable(program) else program
        now = self.clock.now()
        self.procs[pid] = SimProc(pid, parent, gen, label or (self.procs[parent].label if parent else ""), now)
        if parent is not None:
            self.procs[parent].children.add(pid)
        self._push(now if at is None else max(at, now), "proc", (pid, None, None))
        return pid

    def ancestry(self, pid: int) -> list[int]:
        out = []
        p = self.procs.get(pid)
        while p is not None and p.parent is not None:
            out.append(p.parent)
            p = self.procs.get(p.parent)
        return out

    def descendants(self, pid: int) -> list[int]:
        out, frontier = [], [pid]
        while frontier:
            nxt = []
            for p in frontier:
                for c in sorted(self.procs[p].children):
                    out.append(c)
                    nxt.append(c)
            frontier = nxt
        return out

    def kill(self, pid: int) -> KillResult:
        p = self.procs.get(pid)
        if p is None or not p.alive:
            return KillResult(False, "already dead")
        for q in [pid] + self.descendants(pid):
            self._end(self.procs[q], code=-signal.SIGKILL, killed=True)
        return KillResult(True)

    def _end(self, p: SimProc, code: int, killed: bool = False) -> None:
        if not p.alive:
            return
        p.alive = False
        p.ended = self.clock.now()
        p.exit_code = code
        p.killed = killed
        if p.parent is not None and p.parent in self.procs:
            self.procs[p.parent].reaped.append(p.pid)

    def alive(self) -> list[int]:
        return [p.pid for p in self.procs.values() if p.alive]

    def pids(self, label: str) -> list[int]:
        return [p.pid for p in self.procs.values() if p.label == label]

    def stats(self, label: str) -> dict:
        c = Counter()
        for p in self.procs.values():
            if p.label == label:
                c.update(p.counters)
        return dict(c)

    # scheduling ------------------------------------------------------------

    def _push(self, t: float, kind: str, payload) -> None:
        heapq.heappush(self._heap, (t, next(self._seq), kind, payload))

    def run(self, until: float) -> None:
        """Advance until `until` or until every process has ended."""
        W = self.window
        next_boundary = (int(self.clock.now() // W) + 1) * W
        while self.alive():
            t_evt = self._heap[0][0] if self._heap else float("inf")
            t = min(t_evt, next_boundary)
            if t > until:
                break
            self.clock.set(max(t, self.clock.now()))
            if t == next_boundary and t <= t_evt:
                if self.detector is not None:
                    self.detector.step(self.clock.now_ms())
                self.session.tick(t)
                next_boundary += W
                continue
            _, _, kind, payload = heapq.heappop(self._heap)
            if kind == "tick":
                self.session.tick(self.clock.now())
                continue
            pid, value, exc = payload
            p = self.procs[pid]
            if p.alive:
                self._step(p, value, exc)
        if self.clock.now() < until and not self.alive():
            return
        self.clock.set(max(self.clock.now(), until))

    def _step(self, p: SimProc, value, exc) -> None:
        while True:
            try:
                op = p.gen.throw(exc) if exc is not None else p.gen.send(value)
            except StopIteration:
                self._end(p, 0)
                return
            except OSError as e:
                log.debug("sim pid %d failed: %s", p.pid, e)
                self._end(p, 1)
                return
            value, exc = None, None
            t = type(op)
            now = self.clock.now()
            if t is ops.Now:
                value = now
            elif t is ops.Count:
                p.counters[op.key] += op.amount
            elif t is ops.Shared:
                value = [0] * op.size
            elif t is ops.Spawn:
                value = self.spawn(op.program, parent=p.pid)
            elif t is ops.Reap:
                value, p.reaped = p.reaped, []
            elif t in (ops.Sleep, ops.Compute):
                self._push(now + max(0.0, op.seconds), "proc", (p.pid, None, None))
                return
            elif t in _OP_KIND:
                self._call(p, op, now)
                return
            else:
                raise TypeError(f"unknown op {op!r}")

    def _request(self, p: SimProc, op, now_ns: int) -> SyscallRequest:
        kind = _OP_KIND[type(op)]
        ctx = CallContext(p.pid, now_ns, kind)
        t = type(op)
        if t is ops.Read:
            return SyscallRequest(ctx, fh=op.handle, size=op.size, offset=op.offset)
        if t is ops.Write:
            return SyscallRequest(ctx, fh=op.handle, data=op.data, offset=op.offset)
        if t is ops.Open:
            return SyscallRequest(ctx, path=op.path, flags=os.O_RDWR if op.write else os.O_RDONLY)
        if t is ops.Create:
            return SyscallRequest(ctx, path=op.path, flags=os.O_WRONLY, mode=0o644)
        if t is ops.Close:
            return SyscallRequest(ctx, fh=op.handle)
        if t is ops.Rename:
            return SyscallRequest(ctx, path=op.src, new_path=op.dst)
        if t is ops.Truncate:
            return SyscallRequest(ctx, path=op.path, length=op.length)
        if t is ops.Mkdir:
            return SyscallRequest(ctx, path=op.path, mode=0o755)
        return SyscallRequest(ctx, path=op.path)

    def _call(self, p: SimProc, op, now: float) -> None:
        req = self._request(p, op, self.clock.now_ns())
        pending = self.session.submit(req)
        if pending.done:
            self._finish(p, op, pending)
        else:
            pending.add_done_callback(lambda pc: self._finish(p, op, pc))
            d = self.session.engine.gates.next_deadline()
            if d is not None:
                self._push(d, "tick", None)
                self._push(d + self.session.engine.gates.grace, "tick", None)

    def _finish(self, p: SimProc, op, pending) -> None:
        if not p.alive:
            return
        resp = pending.response
        now = self.clock.now()
        if resp.error:
            if resp.error == errno.EINTR and not p.alive:
                return
            exc = OSError(resp.error, os.strerror(resp.error))
            self._push(now + self.op_overhead, "proc", (p.pid, None, exc))
            return
        t = type(op)
        cost = self.op_overhead
        fabricated = pending.latency > 0
        if t is ops.Read:
            value = resp.data
            cost += len(resp.data) / self.delta
        elif t is ops.Write:
            value = resp.count
            cost = pending.latency if fabricated else cost + len(op.data) / self.delta
        elif t in (ops.Open, ops.Create):
            value = resp.fh
        elif t is ops.Stat:
            value = (stat.S_ISDIR(resp.attr.mode), resp.attr.size)
        elif t is ops.ListDir:
            value = list(resp.entries)
        else:
            value = None
        self._push(now + cost, "proc", (p.pid, value, None))
