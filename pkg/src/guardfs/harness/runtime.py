"""Runtimes that host one experiment: a discrete-event simulation or a live mount."""

from __future__ import annotations

import logging
import os
import threading
import time
from pathlib import Path

from guardfs.adversary.executors import SimExecutor, launch, program_for
from guardfs.clock import SystemClock, VirtualClock
from guardfs.defense import AuditLog, DefenseEngine, VerdictStore
from guardfs.defense.engine import pid_alive, proc_ancestry, proc_descendants
from guardfs.detector.live import DetectorLoop, LiveDetector, OracleDetector, engine_sink
from guardfs.harness.experiment import RANSOM_LABEL, SIM_EPOCH, ExperimentPlan, sim_phase
from guardfs.harness.resources import ResourceSampler
from guardfs.overlay.paths import MountConfig
from guardfs.overlay.session import MountSession, attach, detach
from guardfs.telemetry import EventLog, WindowRecorder

log = logging.getLogger(__name__)


def _detector(model, oracle: bool, is_malicious, recorder, engine):
    sink = engine_sink(engine)
    if oracle:
        return OracleDetector(is_malicious, recorder, sink, on_classified=engine.mark_classified)
    if model is not None:
        return LiveDetector(model, recorder, sink, on_classified=engine.mark_classified)
    return None


class SimRuntime:
    """Everything in one process on a virtual clock; the underlay is real."""

    def __init__(self, plan: ExperimentPlan, underlay: Path, work: Path, model=None, oracle: bool = False):
        self.plan = plan
        self.clock = VirtualClock(SIM_EPOCH + sim_phase(plan))
        self.sim = SimExecutor(self.clock, delta=plan.delta)
        store = VerdictStore(propagate=True, ancestry=self.sim.ancestry)
        self.engine = DefenseEngine(plan.mode, store, killer=self.sim.kill, clock=self.clock)
        self.log = EventLog(work / "events.log")
        recorder = WindowRecorder(plan.window, self.log, start_ms=self.clock.now_ms())
        self.recorder = recorder
        cfg = MountConfig(str(work / "mnt"), str(underlay), plan.mode, plan.window)
        self.session = MountSession(cfg, self.engine, recorder, self.clock, AuditLog(work / "audit.log"),
                                    realtime=False)
        self.detector = _detector(model, oracle, self._is_malicious, recorder, self.engine)
        self.sim.bind(self.session, self.detector, plan.window)
        self.capped = False

    def _is_malicious(self, pid: int) -> bool:
        p = self.sim.procs.get(pid)
        return p is not None and p.label == RANSOM_LABEL

    def start(self) -> None:
        pass

    def launch(self, kind: str, spec, label: str) -> None:
        self.sim.spawn(program_for(kind, spec), label=label)

    def wait(self, cap: float) -> None:
        self.sim.run(self.clock.now() + cap)
        self.capped = bool(self.sim.alive())

    def stop(self) -> None:
        if self.detector is not None:
            # judge the open window too, as a live detector would at its close
            start = self.recorder.open_window_start
            if start is not None:
                end = start + self.plan.window * 1000
                self.clock.set(max(self.clock.now(), end / 1000.0))
                self.detector.step(end)
        self.session.flush_gates()
        self.session.underlay.close_all()
        self.session.audit.close()
        self.log.close()

    def labels(self) -> dict[int, str]:
        return {pid: p.label for pid, p in self.sim.procs.items()}

    def events(self):
        return iter(self.log)

    def ancestry(self, pid: int) -> list[int]:
        return self.sim.ancestry(pid) if pid in self.sim.procs else []

    def tree_gone(self, pid: int) -> bool:
        if pid not in self.sim.procs:
            return True
        return not any(self.sim.procs[p].alive for p in [pid] + self.sim.descendants(pid))

    def durations(self) -> dict[str, float]:
        spans: dict[str, list[float]] = {}
        now = self.clock.now()
        for p in self.sim.procs.values():
            s = spans.setdefault(p.label, [p.started, p.started])
            s[0] = min(s[0], p.started)
            s[1] = max(s[1], p.ended if p.ended is not None else now)
        return {k: v[1] - v[0] for k, v in spans.items()}

    def resources(self):
        return []

    def partial(self) -> tuple[bool, list[str]]:
        notes = []
        crashed = [p.pid for p in self.sim.procs.values() if p.exit_code not in (None, 0) and not p.killed]
        if crashed:
            notes.append(f"crashed: {crashed}")
        if self.capped:
            notes.append("duration cap reached")
        return bool(crashed), notes

    def delta(self) -> float:
        return self.plan.delta


class LiveRuntime:
    """A real kernel mount over the underlay, with workloads as OS processes."""

    def __init__(self, plan: ExperimentPlan, underlay: Path, work: Path, model=None, oracle: bool = False,
                 sample_resources: bool = True, cadence_ms: int = 200):
        from guardfs.overlay.fuse import FuseDriver

        self.plan = plan
        self.work = work
        self.clock = SystemClock()
        self.mountpoint = work / "mnt"
        self.mountpoint.mkdir(exist_ok=True)
        store = VerdictStore(propagate=True, ancestry=proc_ancestry)
        self.engine = DefenseEngine(plan.mode, store, clock=self.clock)
        self.log = EventLog(work / "events.log")
        recorder = WindowRecorder(plan.window, self.log)
        self.cfg = MountConfig(str(self.mountpoint), str(underlay), plan.mode, plan.window)
        self._session_kw = dict(engine=self.engine, recorder=recorder, clock=self.clock,
                                audit=AuditLog(work / "audit.log"))
        self.recorder = recorder
        self.driver = FuseDriver(str(self.mountpoint))
        self.session: MountSession | None = None
        self.handles = []
        self.detector = _detector(model, oracle, self._is_malicious, recorder, self.engine)
        self.loop = DetectorLoop(self.detector, 0.02, self.clock) if self.detector is not None else None
        self.sampler = ResourceSampler([os.getpid()], cadence_ms, tag="guard") if sample_resources else None
        self._pid_labels: dict[int, str] = {}
        self._ancestry: dict[int, list[int]] = {}
        self._stop = threading.Event()
        self._ticker: threading.Thread | None = None
        self._watch: threading.Thread | None = None
        self._ended: dict[str, float] = {}
        self.capped = False

    def _is_malicious(self, pid: int) -> bool:
        return self._label_of(pid) == RANSOM_LABEL

    def _label_of(self, pid: int) -> str:
        lab = self._pid_labels.get(pid)
        if lab is not None:
            return lab
        self._refresh_pids()
        if pid in self._pid_labels:
            return self._pid_labels[pid]
        for a in proc_ancestry(pid):
            if a in self._pid_labels:
                return self._pid_labels[a]
        return ""

    def _refresh_pids(self) -> None:
        for h in self.handles:
            for p in h.pids():
                if p not in self._pid_labels:
                    self._pid_labels[p] = h.label
                    if p != h.pid and self.sampler is not None:
                        self.sampler.add(p)

    def start(self) -> None:
        self.session = attach(self.cfg, self.driver, **self._session_kw)
        if self.loop is not None:
            self.loop.start()
        self._ticker = threading.Thread(target=self._tick_loop, name="gate-ticker", daemon=True)
        self._ticker.start()
        self._watch = threading.Thread(target=self._watch_loop, name="pid-watch", daemon=True)
        self._watch.start()
        if self.sampler is not None:
            self.sampler.start()

    def _tick_loop(self) -> None:
        while not self._stop.wait(0.01):
            try:
                self.session.tick()
            except Exception:
                log.exception("gate tick failed")

    def _watch_loop(self) -> None:
        # Record process trees while they are alive, for labels and ancestry.
        while not self._stop.wait(0.05):
            self._refresh_pids()
            for p in list(self._pid_labels):
                if p not in self._ancestry and pid_alive(p):
                    self._ancestry[p] = proc_ancestry(p)

    def launch(self, kind: str, spec, label: str) -> None:
        h = launch(kind, spec, self.mountpoint, self.work / "runs", label)
        self.handles.append(h)
        self._pid_labels[h.pid] = label
        if self.sampler is not None:
            self.sampler.add(h.pid)

    def wait(self, cap: float) -> None:
        deadline = time.monotonic() + cap
        pending = list(self.handles)
        while pending and time.monotonic() < deadline:
            for h in list(pending):
                if h.poll() is not None:
                    self._ended[h.label] = time.time()
                    pending.remove(h)
            time.sleep(0.02)
        if pending:
            self.capped = True
            for h in pending:
                h.kill()
                self._ended[h.label] = time.time()

    def stop(self) -> None:
        self._refresh_pids()
        for h in self.handles:
            if h.poll() is None:
                h.kill()
        if self.loop is not None:
            self.loop.stop()
            # classify the tail so the timeline is complete
            self.detector.step(self.clock.now_ms() + self.plan.window * 1000)
        self._stop.set()
        for t in (self._ticker, self._watch):
            if t is not None:
                t.join(timeout=2)
        if self.sampler is not None:
            self.sampler.stop()
        if self.session is not None:
            detach(self.session)
        self.log.close()
        self.session.audit.close()

    def labels(self) -> dict[int, str]:
        self._refresh_pids()
        return dict(self._pid_labels)

    def events(self):
        return iter(self.log)

    def ancestry(self, pid: int) -> list[int]:
        return self._ancestry.get(pid) or proc_ancestry(pid)

    def tree_gone(self, pid: int) -> bool:
        return not pid_alive(pid) and not any(pid_alive(p) for p in proc_descendants(pid))

    def durations(self) -> dict[str, float]:
        return {h.label: self._ended.get(h.label, time.time()) - h.started_at for h in self.handles}

    def resources(self):
        return list(self.sampler.samples) if self.sampler is not None else []

    def partial(self) -> tuple[bool, list[str]]:
        notes = []
        crashed = []
        for h in self.handles:
            rc = h.returncode
            if rc not in (0, None) and rc != -9:
                crashed.append(f"{h.label}:{rc}")
        if crashed:
            notes.append(f"crashed: {crashed}")
        if self.capped:
            notes.append("duration cap reached")
        return bool(crashed), notes

    def delta(self) -> float:
        return self.plan.delta
