from __future__ import annotations

import os
import posixpath
from dataclasses import dataclass
from pathlib import Path

from guardfs.defense.engine import DefenseMode


class PathEscapeError(ValueError):
    """A path resolves outside the mount it was given for."""


@dataclass(frozen=True)
class MountConfig:
    overlay_root: str
    underlay_root: str
    mode: DefenseMode
    window_seconds: int = 5
    verdict_channel: str | None = None  # file path, "file:<path>" or "unix:<path>"

    def __post_init__(self):
        if not posixpath.isabs(self.overlay_root) or not posixpath.isabs(self.underlay_root):
            raise ValueError("overlay_root and underlay_root must be absolute")
        if posixpath.normpath(self.overlay_root) == posixpath.normpath(self.underlay_root):
            raise ValueError("overlay_root and underlay_root must differ")
        if not os.path.isdir(self.underlay_root):
            raise ValueError(f"underlay_root is not a directory: {self.underlay_root}")
        if int(self.window_seconds) != self.window_seconds or self.window_seconds <= 0:
            raise ValueError("window_seconds must be a positive integer")


def _inside(path: str, root: str) -> str:
    """Relative remainder of normalized `path` under `root`, or raise."""
    if not posixpath.isabs(path):
        raise PathEscapeError(f"not an absolute path: {path!r}")
    norm = posixpath.normpath(path)
    root = posixpath.normpath(root)
    if norm == root:
        return ""
    prefix = root.rstrip("/") + "/"
    if not norm.startswith(prefix):
        raise PathEscapeError(f"{path!r} escapes {root!r}")
    return norm[len(prefix):]


def map_path(overlay_path: str, cfg: MountConfig) -> str:
    """Underlay path for an absolute path below the overlay mountpoint."""
    rel = _inside(overlay_path, cfg.overlay_root)
    base = cfg.underlay_root.rstrip("/") or "/"
    if not rel:
        return base + "/" if overlay_path.endswith("/") else base
    out = posixpath.join(base, rel)
    return out + "/" if overlay_path.endswith("/") else out


def resolve(rel_path: str, underlay_root: str | Path) -> str:
    """Underlay path for a mount-relative path such as ``/a/b.txt``.

    Any ``..`` component is rejected outright.
    """
    parts = [p for p in rel_path.split("/") if p not in ("", ".")]
    if ".." in parts:
        raise PathEscapeError(f"{rel_path!r} contains a parent reference")
    return posixpath.join(str(underlay_root), *parts)
