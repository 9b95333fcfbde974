"""Benign workload analogs: a file server, an uploader, a package installer,
a sensor logger and a backup archiver."""

from __future__ import annotations

import functools
import random
import zlib
from dataclasses import dataclass, field

from guardfs.adversary.ops import (
    CHUNK,
    Close,
    Compute,
    Count,
    Create,
    Mkdir,
    Now,
    Open,
    Read,
    Reap,
    Rename,
    Sleep,
    Spawn,
    TokenBucket,
    Unlink,
    Write,
    read_file,
    walk,
)

WORKLOADS = ("reader-server", "uploader", "installer", "sensor-logger", "archiver")
# the four analogs exercised against the defenses (reader-server is a training workload)
BENIGN_FOUR = ("installer", "sensor-logger", "archiver", "uploader")


@dataclass(frozen=True)
class BenignSpec:
    workload: str
    duration: float = 30.0  # seconds, for open-ended workloads
    rate: float = 4e6  # bytes/s for streaming workloads
    seed: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.workload not in WORKLOADS:
            raise ValueError(f"unknown workload {self.workload!r}; choose from {', '.join(WORKLOADS)}")

    def to_dict(self) -> dict:
        return {"workload": self.workload, "duration": self.duration, "rate": self.rate,
                "seed": self.seed, "params": dict(self.params)}

    @classmethod
    def from_dict(cls, d: dict) -> "BenignSpec":
        return cls(**d)

    def output_prefixes(self) -> tuple[str, ...]:
        """Mount-relative paths this workload legitimately writes."""
        return {
            "uploader": ("uploads/",),
            "installer": ("opt/",),
            "sensor-logger": ("logs/",),
            "archiver": ("backup/",),
        }.get(self.workload, ())


def benign_program(spec: BenignSpec):
    return {
        "reader-server": reader_server,
        "uploader": uploader,
        "installer": installer,
        "sensor-logger": sensor_logger,
        "archiver": archiver,
    }[spec.workload](spec)


def _ensure_dir(path: str):
    try:
        yield Mkdir(path)
    except FileExistsError:
        pass


def reader_server(spec: BenignSpec):
    """Serves random corpus files back to back at `rate`."""
    rng = random.Random(spec.seed)
    files = [p for p, _ in (yield from walk("/")) if not p.startswith("/uploads/")]
    bucket = TokenBucket(spec.rate)
    t0 = yield Now()
    while True:
        now = yield Now()
        if now - t0 >= spec.duration:
            break
        if not files:
            # everything vanished under us; look again a little later
            yield Sleep(1.0)
            files = [p for p, _ in (yield from walk("/")) if not p.startswith("/uploads/")]
            continue
        path = rng.choice(files)
        try:
            h = yield Open(path)
        except OSError:
            files.remove(path)
            continue
        off = 0
        while True:
            yield from bucket.take(CHUNK)
            b = yield Read(h, CHUNK, off)
            off += len(b)
            if len(b) < CHUNK:
                break
        yield Close(h)
        yield Count("files_touched")


def uploader(spec: BenignSpec):
    """Receives compressed blobs and stores them: high-entropy writes only."""
    rng = random.Random(spec.seed)
    size = int(spec.params.get("file_size", 2 * 1024 * 1024))
    yield from _ensure_dir("/uploads")
    bucket = TokenBucket(spec.rate)
    t0 = yield Now()
    i = 0
    while True:
        now = yield Now()
        if now - t0 >= spec.duration:
            break
        h = yield Create(f"/uploads/blob{spec.seed}_{i:04d}.gz")
        off = 0
        while off < size:
            n = min(CHUNK, size - off)
            yield from bucket.take(n)
            yield Write(h, rng.randbytes(n), off)
            yield Count("bytes_attempted", n)
            off += n
        yield Close(h)
        yield Count("files_touched")
        i += 1


def _text_block(rng: random.Random, n: int) -> bytes:
    words = ("config", "module", "return", "import", "value", "static", "install", "lib", "share", "usr")
    out = []
    size = 0
    while size < n:
        line = " ".join(rng.choice(words) for _ in range(8)) + "\n"
        out.append(line)
        size += len(line)
    return "".join(out).encode()[:n]


def installer(spec: BenignSpec):
    """Reads a package archive, then extracts many small files with
    concurrent unpack workers (mixed text and binary payloads)."""
    rng = random.Random(spec.seed)
    n_files = int(spec.params.get("files", 200))
    workers = int(spec.params.get("workers", 4))
    files = yield from walk("/")
    pkgs = [p for p, _ in files if p.endswith(".zip")] or [p for p, _ in files]
    if pkgs:
        yield from read_file(rng.choice(pkgs))
    yield from _ensure_dir("/opt")
    root = f"/opt/pkg{spec.seed}"
    yield from _ensure_dir(root)
    jobs = [(f"{root}/file{i:04d}{rng.choice(('.py', '.so', '.txt', '.dat'))}", rng.randint(2048, 48 * 1024))
            for i in range(n_files)]
    running = set()
    for k in range(workers):
        running.add((yield Spawn(functools.partial(_unpack, jobs[k::workers], spec.seed * 100 + k))))
    while running:
        yield Sleep(0.05)
        for tok in (yield Reap()):
            running.discard(tok)


def _unpack(jobs, seed: int):
    # like a package manager: write beside the target, then rename into place
    rng = random.Random(seed)
    for path, size in jobs:
        tmp = path + ".pkg-new"
        h = yield Create(tmp)
        binary = path.endswith((".so", ".dat"))
        data = rng.randbytes(size) if binary else _text_block(rng, size)
        off = 0
        while off < size:
            n = min(CHUNK, size - off)
            yield Write(h, data[off:off + n], off)
            off += n
        yield Close(h)
        yield Rename(tmp, path)
        yield Count("files_touched")
        yield Count("bytes_attempted", size)
        yield Sleep(rng.uniform(0.002, 0.02))


def _rotate(base: str, keep: int):
    try:
        yield Unlink(f"{base}.{keep}")
    except FileNotFoundError:
        pass
    for k in range(keep - 1, 0, -1):
        try:
            yield Rename(f"{base}.{k}", f"{base}.{k + 1}")
        except FileNotFoundError:
            pass
    yield Rename(base, f"{base}.1")


def sensor_logger(spec: BenignSpec):
    """Appends one short reading per period to a log file, rotating it every
    `rotate` lines and keeping `keep` old generations."""
    rng = random.Random(spec.seed)
    hz = float(spec.params.get("hz", 1.0))
    rotate = int(spec.params.get("rotate", 10))
    keep = int(spec.params.get("keep", 2))
    yield from _ensure_dir("/logs")
    base = f"/logs/sensor{spec.seed}.log"
    h = yield Create(base)
    off = 0
    t0 = yield Now()
    i = 0
    while True:
        target = t0 + i / hz
        now = yield Now()
        if target - t0 >= spec.duration:
            break
        if target > now:
            yield Sleep(target - now)
        line = f"{i} pm2.5={rng.uniform(3, 40):.1f} pm10={rng.uniform(5, 60):.1f} t={rng.uniform(15, 30):.2f}\n"
        yield Write(h, line.encode(), off)
        off += len(line)
        yield Count("appends")
        i += 1
        if rotate and i % rotate == 0:
            yield Close(h)
            yield from _rotate(base, keep)
            h = yield Create(base)
            off = 0
    yield Close(h)


def archiver(spec: BenignSpec):
    """tar | gzip: this process reads every file, a child writes the archive."""
    files = yield from walk("/")
    skip = ("/backup/", "/uploads/", "/opt/", "/logs/")
    parts = []
    for path, _ in files:
        if path.startswith(skip):
            continue
        try:
            parts.append(path.encode() + b"\0" + (yield from read_file(path)))
        except OSError:
            continue
        yield Count("files_touched")
    blob = zlib.compress(b"".join(parts), 1)
    yield Compute(len(blob) / 50e6)
    yield from _ensure_dir("/backup")
    child = yield Spawn(functools.partial(_write_archive, f"/backup/archive{spec.seed}.tar.gz", blob, spec.rate))
    while True:
        yield Sleep(0.05)
        if child in (yield Reap()):
            break


def _write_archive(path: str, blob: bytes, rate: float):
    bucket = TokenBucket(rate)
    h = yield Create(path)
    off = 0
    while off < len(blob):
        n = min(CHUNK, len(blob) - off)
        yield from bucket.take(n)
        yield Write(h, blob[off:off + n], off)
        off += n
    yield Close(h)
    yield Count("bytes_attempted", len(blob))
