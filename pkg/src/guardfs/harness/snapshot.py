"""Checksum snapshots and pessimistic data-loss accounting."""

from __future__ import annotations

import hashlib
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

UNREADABLE = "!unreadable"  # sentinel digest; never equal to a real sha-256


@dataclass
class SnapshotManifest:
    entries: dict[str, tuple[str, int]]  # relative path -> (sha256 hex, size)
    captured_at: float = field(default_factory=time.time)

    def __len__(self) -> int:
        return len(self.entries)

    def __eq__(self, other) -> bool:
        return isinstance(other, SnapshotManifest) and self.entries == other.entries

    def total_bytes(self, paths: Iterable[str] | None = None) -> int:
        if paths is None:
            return sum(s for _, s in self.entries.values())
        return sum(self.entries[p][1] for p in paths)

    def write(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for rel in sorted(self.entries):
                d, s = self.entries[rel]
                fh.write(f"{d}  {s}  {rel}\n")

    @classmethod
    def read(cls, path: str | Path) -> "SnapshotManifest":
        entries = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    d, s, rel = line.rstrip("\n").split("  ", 2)
                    entries[rel] = (d, int(s))
        return cls(entries, os.path.getmtime(path))


def file_digest(path: str | Path, bufsize: int = 1 << 20) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        while True:
            b = fh.read(bufsize)
            if not b:
                break
            h.update(b)
    return h.hexdigest()


def snapshot(root: str | Path) -> SnapshotManifest:
    """Digest and size of every regular file under `root`."""
    root = Path(root)
    entries = {}
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames.sort()
        for name in sorted(filenames):
            full = Path(dirpath) / name
            rel = full.relative_to(root).as_posix()
            try:
                st = full.lstat()
            except OSError:
                continue
            if not full.is_file() or full.is_symlink():
                continue
            try:
                entries[rel] = (file_digest(full), st.st_size)
            except OSError:
                entries[rel] = (UNREADABLE, st.st_size)
    return SnapshotManifest(entries)


@dataclass
class LossReport:
    files_modified: list[str]
    bytes_lost: int

    @property
    def files_lost(self) -> int:
        return len(self.files_modified)


def bytes_lost(baseline: SnapshotManifest, after: SnapshotManifest,
               exclude: Iterable[str] = ()) -> LossReport:
    """A baseline file is lost iff its digest no longer occurs anywhere in
    `after`; the loss is its full original size.

    Files created after the baseline are never counted. `exclude` lists
    path prefixes a benign workload legitimately rewrites.
    """
    exclude = tuple(exclude)
    surviving = {d for d, _ in after.entries.values() if d != UNREADABLE}
    lost = []
    total = 0
    for rel in sorted(baseline.entries):
        if exclude and rel.startswith(exclude):
            continue
        digest, size = baseline.entries[rel]
        if digest == UNREADABLE or digest not in surviving:
            lost.append(rel)
            total += size
    return LossReport(lost, total)
