"""Live classification of closed telemetry windows."""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass
from typing import Callable

import numpy as np

from guardfs.clock import SystemClock
from guardfs.defense.engine import Verdict
from guardfs.overlay.verdicts import VerdictMessage
from guardfs.telemetry import FeatureVector, WindowRecorder, aggregate

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Scored:
    vector: FeatureVector
    score: float
    at_ms: int


class LiveDetector:
    """Scores every closed window and publishes verdict records.

    A PID gets one Benign record the first time it is scored benign (so
    first-contact gates can open early) and one Malicious record the first
    time it is scored malicious. Benign PIDs keep being scored every window.
    `on_classified(t)` fires after a window's records were published, with
    the window end in seconds: everything before `t` has been judged.
    """

    def __init__(self, model, recorder: WindowRecorder, publish: Callable[[VerdictMessage], None],
                 on_classified: Callable[[float], None] | None = None, benign_records: bool = True,
                 keep_history: bool = True):
        self.model = model
        self.recorder = recorder
        self.publish = publish
        self.on_classified = on_classified
        self.benign_records = benign_records
        self.keep_history = keep_history
        self.history: list[Scored] = []
        self.published: list[VerdictMessage] = []
        self.publish_errors = 0
        self._malicious: set[int] = set()
        self._benign: set[int] = set()

    def step(self, now_ms: int) -> list[VerdictMessage]:
        out = []
        for w in self.recorder.close_until(now_ms):
            vecs = aggregate(w)
            if vecs:
                for v, s in zip(vecs, self.score(vecs)):
                    s = float(s)
                    if self.keep_history:
                        self.history.append(Scored(v, s, now_ms))
                    msg = None
                    if s >= 0.5:
                        if v.pid not in self._malicious:
                            self._malicious.add(v.pid)
                            msg = VerdictMessage(v.pid, Verdict.MALICIOUS, now_ms)
                    elif self.benign_records and v.pid not in self._benign and v.pid not in self._malicious:
                        self._benign.add(v.pid)
                        msg = VerdictMessage(v.pid, Verdict.BENIGN, now_ms)
                    if msg is not None:
                        self._send(msg)
                        out.append(msg)
            if self.on_classified is not None:
                self.on_classified(w.end / 1000.0)
        return out

    def score(self, vecs: list[FeatureVector]):
        return self.model.predict_proba(np.array([v.features() for v in vecs]))

    def _send(self, msg: VerdictMessage) -> None:
        try:
            self.publish(msg)
        except Exception:
            # detection carries on; the channel implementations retry themselves
            self.publish_errors += 1
            log.warning("publishing %s failed", msg.to_line(), exc_info=True)
        self.published.append(msg)

    @property
    def flagged(self) -> set[int]:
        return set(self._malicious)


class OracleDetector(LiveDetector):
    """Ground-truth stand-in for a trained model, used to generate traces.

    A window is malicious iff its PID belongs to a malicious workload and it
    modified something in that window.
    """

    def __init__(self, is_malicious_pid: Callable[[int], bool], recorder: WindowRecorder, publish, **kw):
        super().__init__(None, recorder, publish, **kw)
        self.is_malicious_pid = is_malicious_pid

    def score(self, vecs):
        return [float(self.is_malicious_pid(v.pid) and (v.writes + v.renames + v.unlinks) > 0) for v in vecs]


def engine_sink(engine) -> Callable[[VerdictMessage], None]:
    """Apply verdict records straight to an in-process defense engine."""

    def apply(msg: VerdictMessage) -> None:
        engine.on_verdict(msg.pid, msg.verdict)

    return apply


class DetectorLoop:
    """Runs `LiveDetector.step` on wall-clock time from its own thread."""

    def __init__(self, detector: LiveDetector, period: float = 0.05, clock=None):
        self.detector = detector
        self.period = period
        self.clock = clock if clock is not None else SystemClock()
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    def start(self) -> None:
        self._thread = threading.Thread(target=self._run, name="detector", daemon=True)
        self._thread.start()

    def _run(self) -> None:
        while not self._stop.wait(self.period):
            try:
                self.detector.step(self.clock.now_ms())
            except Exception:
                log.exception("detector step failed")

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5)
