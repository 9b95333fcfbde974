"""Workload programs are generators that yield these operations.

The same program runs unchanged in a real OS process (against a directory
or mount) and inside the discrete-event simulator. Each yield returns the
operation's result; failures are thrown into the generator as OSError.
Paths are relative to the target root and start with ``/``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Generator

CHUNK = 64 * 1024  # I/O unit; below the mount's 128 KiB max write


@dataclass(frozen=True)
class ListDir:
    path: str


@dataclass(frozen=True)
class Stat:
    path: str  # -> (is_dir, size), OSError if absent


@dataclass(frozen=True)
class Open:
    path: str
    write: bool = False  # -> handle


@dataclass(frozen=True)
class Create:
    path: str  # -> handle, file truncated/created for writing


@dataclass(frozen=True)
class Read:
    handle: Any
    size: int
    offset: int  # -> bytes


@dataclass(frozen=True)
class Write:
    handle: Any
    data: bytes
    offset: int  # -> count


@dataclass(frozen=True)
class Close:
    handle: Any


@dataclass(frozen=True)
class Truncate:
    path: str
    length: int = 0


@dataclass(frozen=True)
class Unlink:
    path: str


@dataclass(frozen=True)
class Rename:
    src: str
    dst: str


@dataclass(frozen=True)
class Mkdir:
    path: str


@dataclass(frozen=True)
class Sleep:
    seconds: float


@dataclass(frozen=True)
class Now:
    pass  # -> seconds (float)


@dataclass(frozen=True)
class Compute:
    """CPU-bound work that takes time in simulation; real runs just do it."""

    seconds: float


@dataclass(frozen=True)
class Shared:
    size: int  # -> mutable int array visible to forked children


@dataclass(frozen=True)
class Spawn:
    program: Callable[[], Generator]  # -> child token


@dataclass(frozen=True)
class Reap:
    pass  # -> list of tokens of children that exited since the last Reap


@dataclass(frozen=True)
class Count:
    """Bookkeeping for run stats; no I/O."""

    key: str
    amount: int = 1


Program = Generator[Any, Any, None]


def read_file(path: str, chunk: int = CHUNK):
    """Sub-program: read a whole file in chunks, returns the bytes."""
    h = yield Open(path)
    parts = []
    off = 0
    try:
        while True:
            b = yield Read(h, chunk, off)
            if not b:
                break
            parts.append(b)
            off += len(b)
            if len(b) < chunk:
                break
    except OSError:
        yield Close(h)
        raise
    yield Close(h)
    return b"".join(parts)


def write_chunks(h, data: bytes, chunk: int = CHUNK, offset: int = 0):
    """Sub-program: write `data` at `offset` in chunks."""
    pos = 0
    while pos < len(data):
        n = yield Write(h, data[pos:pos + chunk], offset + pos)
        pos += n if n else len(data[pos:pos + chunk])
    return pos


def walk(root: str = "/", order: str = "depth-first", rng=None):
    """Sub-program: list regular files under `root` as (path, size)."""
    out = []
    pending = [root]
    while pending:
        d = pending.pop(0) if order == "breadth-first" else pending.pop()
        try:
            names = yield ListDir(d)
        except OSError:
            continue
        subdirs = []
        for name in names:
            p = d.rstrip("/") + "/" + name
            try:
                is_dir, size = yield Stat(p)
            except OSError:
                continue
            if is_dir:
                subdirs.append(p)
            else:
                out.append((p, size))
        if order == "breadth-first":
            pending.extend(subdirs)
        else:
            pending.extend(reversed(subdirs))
    if order == "shuffled" and rng is not None:
        rng.shuffle(out)
    return out


class TokenBucket:
    """Rate limiter for programs: yields Sleep ops to hold `rate` bytes/s."""

    def __init__(self, rate: float, burst: float | None = None):
        self.rate = float(rate)
        self.capacity = float(burst if burst is not None else max(rate * 0.1, CHUNK))
        self.tokens = self.capacity
        self.last: float | None = None

    def take(self, n: int):
        now = yield Now()
        if self.last is None:
            self.last = now
        self.tokens = min(self.capacity, self.tokens + (now - self.last) * self.rate)
        self.last = now
        self.tokens -= n
        if self.tokens < 0:
            wait = -self.tokens / self.rate
            yield Sleep(wait)
            now = yield Now()
            self.tokens = min(self.capacity, self.tokens + (now - self.last) * self.rate)
            self.last = now
