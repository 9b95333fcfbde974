"""Executes calls against the underlay directory and tracks open handles."""

from __future__ import annotations

import errno
import itertools
import os
import stat
import threading
from dataclasses import dataclass

from guardfs.calls import Attr, CallKind, SyscallRequest, SyscallResponse
from guardfs.overlay.paths import PathEscapeError, resolve


@dataclass
class HandleEntry:
    ufd: int | None  # None for a handle issued by a fabricated Create
    path: str  # mount-relative
    pid: int
    attr: Attr | None = None  # phantom attributes


class FileHandleTable:
    """overlay handle -> (underlay fd, path, owning pid)."""

    def __init__(self):
        self._entries: dict[int, HandleEntry] = {}
        self._ids = itertools.count(1)
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, fh: int) -> bool:
        return fh in self._entries

    def add(self, ufd: int | None, path: str, pid: int, attr: Attr | None = None) -> int:
        with self._lock:
            fh = next(self._ids)
            self._entries[fh] = HandleEntry(ufd, path, pid, attr)
            return fh

    def get(self, fh: int) -> HandleEntry | None:
        return self._entries.get(fh)

    def pop(self, fh: int) -> HandleEntry | None:
        with self._lock:
            return self._entries.pop(fh, None)

    def owner(self, fh: int | None) -> int | None:
        e = self._entries.get(fh) if fh is not None else None
        return e.pid if e is not None else None

    def entries(self) -> list[tuple[int, HandleEntry]]:
        with self._lock:
            return list(self._entries.items())


class Underlay:
    """Genuine execution of calls on the backing directory."""

    def __init__(self, root: str, handles: FileHandleTable | None = None):
        self.root = root
        self.handles = handles if handles is not None else FileHandleTable()

    def path(self, rel: str) -> str:
        return resolve(rel, self.root)

    def execute(self, req: SyscallRequest) -> SyscallResponse:
        try:
            return self._execute(req)
        except PathEscapeError:
            return SyscallResponse(error=errno.EACCES)
        except OSError as exc:
            return SyscallResponse(error=exc.errno or errno.EIO)

    def _entry(self, fh: int | None) -> HandleEntry:
        e = self.handles.get(fh) if fh is not None else None
        if e is None:
            raise OSError(errno.EBADF, "bad overlay handle")
        return e

    def _execute(self, req: SyscallRequest) -> SyscallResponse:
        k = req.kind
        if k is CallKind.READ:
            e = self._entry(req.fh)
            if e.ufd is None:
                return SyscallResponse(count=0, data=b"")
            data = os.pread(e.ufd, req.size, req.offset)
            return SyscallResponse(count=len(data), data=data)
        if k is CallKind.WRITE:
            e = self._entry(req.fh)
            if e.ufd is None:
                return SyscallResponse(count=len(req.data))
            n = os.pwrite(e.ufd, req.data, req.offset)
            return SyscallResponse(count=n)
        if k is CallKind.OPEN:
            # truncation is delivered separately as a Truncate call
            flags = req.flags & ~(os.O_CREAT | os.O_EXCL | os.O_TRUNC)
            ufd = os.open(self.path(req.path), flags | os.O_CLOEXEC)
            return SyscallResponse(fh=self.handles.add(ufd, req.path, req.pid))
        if k is CallKind.CREATE:
            flags = (req.flags | os.O_CREAT) & ~os.O_TRUNC
            if flags & os.O_ACCMODE == os.O_RDONLY:
                flags |= os.O_WRONLY
            ufd = os.open(self.path(req.path), flags | os.O_CLOEXEC, req.mode & 0o7777)
            try:
                attr = Attr.from_stat(os.fstat(ufd))
            except OSError:
                os.close(ufd)
                raise
            return SyscallResponse(fh=self.handles.add(ufd, req.path, req.pid), attr=attr)
        if k is CallKind.RELEASE:
            e = self.handles.pop(req.fh) if req.fh is not None else None
            if e is None:
                return SyscallResponse(error=errno.EBADF)
            if e.ufd is not None:
                os.close(e.ufd)
            return SyscallResponse()
        if k is CallKind.GETATTR:
            if req.fh is not None:
                e = self._entry(req.fh)
                if e.ufd is None:
                    return SyscallResponse(attr=e.attr)
                return SyscallResponse(attr=Attr.from_stat(os.fstat(e.ufd)))
            return SyscallResponse(attr=Attr.from_stat(os.lstat(self.path(req.path))))
        if k is CallKind.READDIR:
            return SyscallResponse(entries=sorted(os.listdir(self.path(req.path))))
        if k is CallKind.RENAME:
            if req.new_path is None:
                return SyscallResponse(error=errno.EINVAL)
            os.rename(self.path(req.path), self.path(req.new_path))
            return SyscallResponse()
        if k is CallKind.UNLINK:
            os.unlink(self.path(req.path))
            return SyscallResponse()
        if k is CallKind.MKDIR:
            p = self.path(req.path)
            os.mkdir(p, req.mode & 0o7777)
            return SyscallResponse(attr=Attr.from_stat(os.lstat(p)))
        if k is CallKind.RMDIR:
            os.rmdir(self.path(req.path))
            return SyscallResponse()
        if k is CallKind.TRUNCATE:
            length = req.length or 0
            if req.fh is not None:
                e = self._entry(req.fh)
                if e.ufd is not None:
                    os.ftruncate(e.ufd, length)
                    return SyscallResponse(attr=Attr.from_stat(os.fstat(e.ufd)))
                return SyscallResponse(attr=e.attr)
            p = self.path(req.path)
            os.truncate(p, length)
            return SyscallResponse(attr=Attr.from_stat(os.lstat(p)))
        raise AssertionError(k)

    def close_all(self) -> None:
        for fh, e in self.handles.entries():
            self.handles.pop(fh)
            if e.ufd is not None:
                try:
                    os.close(e.ufd)
                except OSError:
                    pass


def is_dir_attr(attr: Attr) -> bool:
    return stat.S_ISDIR(attr.mode)
