"""Verdict channel between the detection plane and the overlay.

Newline-delimited UTF-8 records::

    verdict <pid> <malicious|benign> <unix_ts_ms>

Endpoints are a plain file (appended by the producer, tailed by the
consumer), a local stream socket (``unix:<path>``, the consumer listens) or
an in-memory queue for same-process wiring.
"""

from __future__ import annotations

import logging
import os
import queue
import socket
import threading
import time
from dataclasses import dataclass
from typing import Callable

from guardfs.defense.engine import Verdict

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class VerdictMessage:
    pid: int
    verdict: Verdict
    ts_ms: int

    def to_line(self) -> str:
        return f"verdict {self.pid} {self.verdict.value} {self.ts_ms}"

    @classmethod
    def from_line(cls, line: str) -> "VerdictMessage":
        parts = line.split()
        if len(parts) != 4 or parts[0] != "verdict":
            raise ValueError(f"malformed verdict record: {line!r}")
        v = Verdict(parts[2])
        if v is Verdict.UNKNOWN:
            raise ValueError("unknown is not a publishable verdict")
        pid = int(parts[1])
        if pid <= 0:
            raise ValueError(f"bad pid in verdict record: {line!r}")
        return cls(pid, v, int(parts[3]))


def parse_endpoint(desc: str) -> tuple[str, str]:
    """``unix:/p`` -> ("unix", "/p"); ``file:/p`` or a bare path -> ("file", "/p")."""
    kind, sep, rest = desc.partition(":")
    if sep and kind in ("unix", "file"):
        return kind, rest
    return "file", desc


# -- producers ---------------------------------------------------------------


class MemoryChannel:
    """Same-process channel; both producer and consumer side."""

    def __init__(self):
        self._q: "queue.Queue[VerdictMessage]" = queue.Queue()
        self.sent: list[VerdictMessage] = []

    def publish(self, msg: VerdictMessage) -> None:
        self.sent.append(msg)
        self._q.put(msg)

    def drain(self) -> list[VerdictMessage]:
        out = []
        while True:
            try:
                out.append(self._q.get_nowait())
            except queue.Empty:
                return out

    def close(self) -> None:
        pass


class FileProducer:
    def __init__(self, path: str):
        self.path = path
        self._fh = open(path, "a", encoding="utf-8")
        self._lock = threading.Lock()

    def publish(self, msg: VerdictMessage) -> None:
        with self._lock:
            self._fh.write(msg.to_line() + "\n")
            self._fh.flush()

    def close(self) -> None:
        with self._lock:
            self._fh.close()


class SocketProducer:
    """Connects lazily and reconnects with bounded backoff on failure."""

    def __init__(self, path: str, retries: int = 5, backoff: float = 0.05, max_backoff: float = 1.0):
        self.path = path
        self.retries = retries
        self.backoff = backoff
        self.max_backoff = max_backoff
        self._sock: socket.socket | None = None
        self._lock = threading.Lock()
        self.failures = 0

    def _connect(self) -> socket.socket:
        s = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
        s.connect(self.path)
        return s

    def publish(self, msg: VerdictMessage) -> None:
        data = (msg.to_line() + "\n").encode()
        delay = self.backoff
        with self._lock:
            for attempt in range(self.retries + 1):
                try:
                    if self._sock is None:
                        self._sock = self._connect()
                    self._sock.sendall(data)
                    return
                except OSError as exc:
                    self.failures += 1
                    if self._sock is not None:
                        self._sock.close()
                        self._sock = None
                    if attempt == self.retries:
                        log.warning("verdict channel %s unreachable, dropping record: %s", self.path, exc)
                        return
                    time.sleep(delay)
                    delay = min(delay * 2, self.max_backoff)

    def close(self) -> None:
        with self._lock:
            if self._sock is not None:
                self._sock.close()
                self._sock = None


def open_producer(desc: str):
    kind, path = parse_endpoint(desc)
    return SocketProducer(path) if kind == "unix" else FileProducer(path)


# -- consumers ---------------------------------------------------------------


Handler = Callable[[VerdictMessage], None]


class _LineConsumer:
    def __init__(self, handler: Handler):
        self.handler = handler
        self.malformed = 0
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    def _deliver(self, line: str) -> None:
        line = line.strip()
        if not line:
            return
        try:
            msg = VerdictMessage.from_line(line)
        except ValueError:
            self.malformed += 1
            log.warning("skipping malformed verdict record %r", line)
            return
        self.handler(msg)

    def start(self) -> None:
        self._thread = threading.Thread(target=self._run, name=type(self).__name__, daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=2)

    def _run(self) -> None:
        raise NotImplementedError


class FileTailConsumer(_LineConsumer):
    """Follows a verdict file from its start, like ``tail -F``."""

    def __init__(self, path: str, handler: Handler, poll: float = 0.02):
        super().__init__(handler)
        self.path = path
        self.poll = poll

    def _run(self) -> None:
        pos = 0
        buf = ""
        while not self._stop.is_set():
            try:
                with open(self.path, encoding="utf-8") as fh:
                    fh.seek(pos)
                    chunk = fh.read()
                    pos = fh.tell()
            except FileNotFoundError:
                chunk = ""
            if chunk:
                buf += chunk
                *lines, buf = buf.split("\n")
                for line in lines:
                    self._deliver(line)
            else:
                self._stop.wait(self.poll)


class SocketConsumer(_LineConsumer):
    """Listens on a unix stream socket; any number of producers may connect."""

    def __init__(self, path: str, handler: Handler):
        super().__init__(handler)
        self.path = path
        if os.path.exists(path):
            os.unlink(path)
        self._srv = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
        self._srv.bind(path)
        self._srv.listen(8)
        self._srv.settimeout(0.1)

    def _serve(self, conn: socket.socket) -> None:
        conn.settimeout(0.1)
        buf = b""
        with conn:
            while not self._stop.is_set():
                try:
                    chunk = conn.recv(65536)
                except socket.timeout:
                    continue
                except OSError:
                    return
                if not chunk:
                    break
                buf += chunk
                *lines, buf = buf.split(b"\n")
                for line in lines:
                    self._deliver(line.decode("utf-8", "replace"))
        if buf:
            self._deliver(buf.decode("utf-8", "replace"))

    def _run(self) -> None:
        while not self._stop.is_set():
            try:
                conn, _ = self._srv.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            threading.Thread(target=self._serve, args=(conn,), daemon=True).start()

    def stop(self) -> None:
        super().stop()
        self._srv.close()
        try:
            os.unlink(self.path)
        except OSError:
            pass


def open_consumer(desc: str, handler: Handler) -> _LineConsumer:
    kind, path = parse_endpoint(desc)
    return SocketConsumer(path, handler) if kind == "unix" else FileTailConsumer(path, handler)
