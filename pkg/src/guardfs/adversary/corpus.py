"""Deterministic synthetic corpus: the data the defenses have to protect."""

from __future__ import annotations

import hashlib
import os
import random
import shutil
from dataclasses import dataclass, field
from pathlib import Path

# suffix -> entropy profile
PROFILES = {
    ".txt": "text",
    ".csv": "text",
    ".pdf": "structured",
    ".docx": "structured",
    ".jpg": "high",
    ".zip": "high",
}
DEFAULT_SUFFIXES = {".txt": 3, ".csv": 1, ".pdf": 2, ".docx": 1, ".jpg": 2, ".zip": 1}


@dataclass(frozen=True)
class CorpusSpec:
    total_bytes: int
    file_count: int
    suffixes: dict = field(default_factory=lambda: dict(DEFAULT_SUFFIXES))
    seed: int = 0
    min_size: int = 8192  # keeps every file big enough for near-8-bit ciphertext chunks
    dirs: int = 8

    def __post_init__(self):
        if self.file_count < 0 or self.total_bytes < 0:
            raise ValueError("negative corpus size")
        if self.file_count and self.total_bytes < self.file_count * self.min_size:
            raise ValueError("total_bytes too small for file_count * min_size")
        for s in self.suffixes:
            if s not in PROFILES:
                raise ValueError(f"no entropy profile for suffix {s!r}")


@dataclass(frozen=True)
class ManifestEntry:
    path: str  # relative, '/'-separated
    size: int
    sha256: str


def _sizes(spec: CorpusSpec, rng: random.Random) -> list[int]:
    n = spec.file_count
    if n == 0:
        return []
    raw = [rng.lognormvariate(0.0, 1.0) for _ in range(n)]
    spare = spec.total_bytes - n * spec.min_size
    tot = sum(raw)
    sizes = [spec.min_size + int(spare * r / tot) for r in raw]
    sizes[-1] += spec.total_bytes - sum(sizes)
    return sizes


_SYLLABLES = ["ka", "lo", "mi", "ne", "ru", "sa", "to", "vi", "de", "an", "or", "el", "th", "in", "qu", "es"]


def _text_pool(rng: random.Random, size: int = 1 << 20) -> bytes:
    words = ["".join(rng.choices(_SYLLABLES, k=rng.randint(1, 4))) for _ in range(1500)]
    out = []
    n = 0
    while n < size:
        line = " ".join(rng.choices(words, k=rng.randint(6, 14))) + ".\n"
        out.append(line)
        n += len(line)
    return "".join(out).encode()[:size]


def _content(profile: str, size: int, rng: random.Random, pool: bytes) -> bytes:
    if profile == "high":
        return rng.randbytes(size)
    if profile == "text":
        start = rng.randrange(0, max(1, len(pool) - size)) if size < len(pool) else 0
        buf = pool[start:start + size]
        while len(buf) < size:
            buf += pool[:size - len(buf)]
        return buf
    # structured: header, then alternating text and binary blocks
    parts = [b"%STRUCT-1.0\n"]
    n = len(parts[0])
    while n < size:
        blk = min(size - n, rng.randint(512, 4096))
        if rng.random() < 0.5:
            start = rng.randrange(0, len(pool) - blk)
            parts.append(pool[start:start + blk])
        else:
            parts.append(rng.randbytes(blk))
        n += blk
    return b"".join(parts)[:size]


def generate_corpus(spec: CorpusSpec, root: str | Path) -> list[ManifestEntry]:
    """Write the corpus under an empty `root`; returns the manifest sorted by path."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    if any(root.iterdir()):
        raise ValueError(f"corpus root is not empty: {root}")
    rng = random.Random(spec.seed)
    pool = _text_pool(rng)
    sizes = _sizes(spec, rng)
    suffixes = sorted(spec.suffixes)
    weights = [spec.suffixes[s] for s in suffixes]
    manifest = []
    try:
        for i, size in enumerate(sizes):
            suffix = rng.choices(suffixes, weights)[0]
            d = rng.randrange(spec.dirs) if spec.dirs else None
            sub = rng.randrange(3)
            rel = f"d{d:02d}/s{sub}/f{i:05d}{suffix}" if d is not None else f"f{i:05d}{suffix}"
            data = _content(PROFILES[suffix], size, rng, pool)
            p = root / rel
            p.parent.mkdir(parents=True, exist_ok=True)
            p.write_bytes(data)
            manifest.append(ManifestEntry(rel, size, hashlib.sha256(data).hexdigest()))
    except OSError:
        for child in root.iterdir():
            if child.is_dir():
                shutil.rmtree(child, ignore_errors=True)
            else:
                child.unlink(missing_ok=True)
        raise
    manifest.sort(key=lambda e: e.path)
    return manifest


def write_manifest(manifest: list[ManifestEntry], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in manifest:
            fh.write(f"{e.sha256}  {e.size}  {e.path}\n")


def read_manifest(path: str | Path) -> list[ManifestEntry]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                digest, size, rel = line.rstrip("\n").split("  ", 2)
                out.append(ManifestEntry(rel, int(size), digest))
    return out


def copy_corpus(src: str | Path, dst: str | Path) -> None:
    """Fresh copy of a generated corpus (cheaper than regenerating it)."""
    dst = Path(dst)
    if dst.exists():
        shutil.rmtree(dst)
    shutil.copytree(src, dst)


def eligible(path: str, suffix_filter) -> bool:
    return not suffix_filter or os.path.splitext(path)[1] in suffix_filter
