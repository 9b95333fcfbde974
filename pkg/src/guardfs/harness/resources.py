"""Per-process CPU and memory sampling from /proc."""

from __future__ import annotations

import os
import threading
import time
from dataclasses import dataclass

CLK_TCK = os.sysconf("SC_CLK_TCK")
PAGE = os.sysconf("SC_PAGE_SIZE")


@dataclass(frozen=True)
class ResourceSample:
    ts: float
    pid: int
    cpu_percent: float
    rss_bytes: int
    tag: str = ""


def _read_stat(pid: int) -> tuple[int, int, str] | None:
    """(utime+stime ticks, rss bytes, state) or None if the pid is gone."""
    try:
        with open(f"/proc/{pid}/stat", "rb") as fh:
            data = fh.read()
    except OSError:
        return None
    rest = data[data.rfind(b")") + 2:].split()
    # fields after comm: state=0 ... utime=11 stime=12 ... rss=21
    return int(rest[11]) + int(rest[12]), int(rest[21]) * PAGE, rest[0].decode()


class ResourceSampler:
    """Samples a set of PIDs at a fixed cadence on its own thread.

    Dead (or zombie) PIDs are dropped. A failed read of one PID leaves a gap
    for that tick; sampling continues.
    """

    def __init__(self, pids, cadence_ms: int = 200, tag: str = ""):
        self.pids = set(pids)
        self.cadence = cadence_ms / 1000.0
        self.tag = tag
        self.samples: list[ResourceSample] = []
        self.gaps = 0
        self._last: dict[int, tuple[float, int]] = {}
        self._lock = threading.Lock()
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    def add(self, pid: int) -> None:
        with self._lock:
            self.pids.add(pid)

    def sample_once(self) -> list[ResourceSample]:
        now = time.monotonic()
        wall = time.time()
        out = []
        with self._lock:
            pids = sorted(self.pids)
        for pid in pids:
            st = _read_stat(pid)
            if st is None or st[2] in ("Z", "X"):
                with self._lock:
                    self.pids.discard(pid)
                self._last.pop(pid, None)
                continue
            ticks, rss, _ = st
            prev = self._last.get(pid)
            self._last[pid] = (now, ticks)
            if prev is None:
                continue
            dt = now - prev[0]
            if dt <= 0:
                self.gaps += 1
                continue
            cpu = max(0.0, (ticks - prev[1]) / CLK_TCK / dt * 100.0)
            out.append(ResourceSample(wall, pid, cpu, rss, self.tag))
        self.samples.extend(out)
        return out

    def start(self) -> None:
        self.sample_once()  # prime the cpu counters
        self._thread = threading.Thread(target=self._run, name="sampler", daemon=True)
        self._thread.start()

    def _run(self) -> None:
        while not self._stop.wait(self.cadence):
            self.sample_once()

    def stop(self) -> list[ResourceSample]:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=2)
        return self.samples


def sample_resources(pids, cadence_ms: int = 200, duration: float = 1.0, tag: str = "") -> list[ResourceSample]:
    """Blocking convenience wrapper: sample for `duration` seconds."""
    s = ResourceSampler(pids, cadence_ms, tag)
    s.start()
    time.sleep(duration)
    return s.stop()


def measure_write_throughput(directory: str | os.PathLike, total_bytes: int = 64 << 20,
                             chunk: int = 128 << 10) -> float:
    """Sequential write throughput (bytes/s) of a directory, fsync included.

    The probe file is removed afterwards.
    """
    if total_bytes <= 0 or chunk <= 0:
        raise ValueError("sizes must be positive")
    path = os.path.join(directory, f".guardfs-probe-{os.getpid()}")
    buf = os.urandom(chunk)
    t0 = time.perf_counter()
    fd = os.open(path, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o600)
    try:
        written = 0
        while written < total_bytes:
            written += os.write(fd, buf[: min(chunk, total_bytes - written)])
        os.fsync(fd)
    finally:
        os.close(fd)
        elapsed = time.perf_counter() - t0
        try:
            os.unlink(path)
        except OSError:
            pass
    return total_bytes / max(elapsed, 1e-9)
