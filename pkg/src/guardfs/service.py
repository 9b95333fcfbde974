"""A guarded mount as one long-running unit: FUSE driver, defense engine,
telemetry, live detector and gate ticker, started and stopped together."""

from __future__ import annotations

import logging
import threading
from pathlib import Path

from guardfs.clock import SystemClock
from guardfs.defense import AuditLog, DefenseEngine, DefenseMode, VerdictStore
from guardfs.defense.engine import proc_ancestry
from guardfs.detector.live import DetectorLoop, LiveDetector, engine_sink
from guardfs.overlay.fuse import FuseDriver
from guardfs.overlay.paths import MountConfig
from guardfs.overlay.session import MountSession, attach, detach
from guardfs.overlay.verdicts import open_consumer, open_producer
from guardfs.telemetry import EventLog, WindowRecorder

log = logging.getLogger(__name__)


class GuardedMount:
    """Mount `underlay` at `mountpoint` under `mode`, scoring windows with `model`.

    With `channel` set, verdicts travel through that endpoint (file or
    unix socket) instead of being applied in-process.
    """

    def __init__(self, mountpoint: str | Path, underlay: str | Path, mode: DefenseMode, model=None,
                 window: int = 5, channel: str | None = None, events: str | Path | None = None,
                 audit: str | Path | None = None, threads: int = 4, fail_closed: bool = False,
                 nominal_throughput: float = 200e6):
        self.cfg = MountConfig(str(Path(mountpoint).resolve()), str(Path(underlay).resolve()), mode, window,
                               channel)
        self.clock = SystemClock()
        self.engine = DefenseEngine(mode, VerdictStore(propagate=True, ancestry=proc_ancestry), clock=self.clock)
        # a long-lived mount keeps nothing in memory beyond the open window
        self.log = EventLog(events, keep=False)
        self.recorder = WindowRecorder(window, self.log)
        self.audit = AuditLog(audit, keep=False)
        self.driver = FuseDriver(self.cfg.overlay_root, threads=threads)
        self.model = model
        self.channel = channel
        self.fail_closed = fail_closed
        self.nominal = nominal_throughput
        self.session: MountSession | None = None
        self.detector: LiveDetector | None = None
        self._producer = None
        self._consumer = None
        self._loop: DetectorLoop | None = None
        self._stop = threading.Event()
        self._ticker: threading.Thread | None = None

    def start(self) -> MountSession:
        publish = engine_sink(self.engine)
        if self.channel:
            self._consumer = open_consumer(self.channel, lambda m: self.engine.on_verdict(m.pid, m.verdict))
            self._consumer.start()
            self._producer = open_producer(self.channel)
            publish = self._producer.publish
        self.session = attach(self.cfg, self.driver, engine=self.engine, recorder=self.recorder,
                              clock=self.clock, audit=self.audit, fail_closed=self.fail_closed,
                              nominal_throughput=self.nominal)
        if self.model is not None:
            self.detector = LiveDetector(self.model, self.recorder, publish, on_classified=self.engine.mark_classified,
                                         keep_history=False)
            self._loop = DetectorLoop(self.detector, 0.02, self.clock)
            self._loop.start()
        self._ticker = threading.Thread(target=self._tick, name="gate-ticker", daemon=True)
        self._ticker.start()
        log.info("mounted %s over %s (%s)", self.cfg.overlay_root, self.cfg.underlay_root, self.engine.mode.label())
        return self.session

    def _tick(self) -> None:
        while not self._stop.wait(0.01):
            try:
                self.session.tick()
            except Exception:
                log.exception("gate tick failed")

    def stop(self) -> None:
        self._stop.set()
        if self._loop is not None:
            self._loop.stop()
        if self._ticker is not None:
            self._ticker.join(timeout=2)
        if self.session is not None:
            detach(self.session)
        if self._producer is not None:
            self._producer.close()
        if self._consumer is not None:
            self._consumer.stop()
        self.log.close()
        self.audit.close()
        log.info("unmounted %s", self.cfg.overlay_root)
