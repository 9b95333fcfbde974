"""Kernel mount driver speaking the FUSE wire protocol over /dev/fuse.

No libfuse is involved: the device is opened, mounted with mount(2), and
requests are decoded and answered here. Every call the defense cares about
becomes a `SyscallRequest` submitted to the session; the answer is written
back whenever the session completes it, which for gated calls is later and
from another thread. Housekeeping (lookups bookkeeping, forget, statfs,
flush, directory handles) is handled locally.
"""

from __future__ import annotations

import ctypes
import ctypes.util
import errno
import logging
import os
import posixpath
import stat
import struct
import threading
import time
from dataclasses import dataclass, field

from guardfs.calls import Attr, CallContext, CallKind, SyscallRequest
from guardfs.defense import ActionKind

log = logging.getLogger(__name__)

# opcodes
LOOKUP, FORGET, GETATTR, SETATTR, READLINK = 1, 2, 3, 4, 5
MKDIR, UNLINK, RMDIR, RENAME = 9, 10, 11, 12
OPEN, READ, WRITE, STATFS, RELEASE, FSYNC = 14, 15, 16, 17, 18, 20
FLUSH, INIT, OPENDIR, READDIR, RELEASEDIR, FSYNCDIR = 25, 26, 27, 28, 29, 30
ACCESS, CREATE, INTERRUPT, DESTROY = 34, 35, 36, 38
BATCH_FORGET, READDIRPLUS, RENAME2 = 42, 44, 45

IN_HEADER = struct.Struct("<IIQQIIII")
OUT_HEADER = struct.Struct("<IiQ")
ATTR = struct.Struct("<QQQQQQIIIIIIIIII")  # 88 bytes
ENTRY_HEAD = struct.Struct("<QQQQII")  # nodeid, generation, entry_valid, attr_valid, nsecs
ATTR_OUT_HEAD = struct.Struct("<QII")
OPEN_OUT = struct.Struct("<QII")
INIT_OUT = struct.Struct("<IIIIHHIIHHI28x")
DIRENT_HEAD = struct.Struct("<QQII")
KSTATFS = struct.Struct("<QQQQQIIII24x")

KERNEL_MAJOR, KERNEL_MINOR = 7, 31
ASYNC_READ, BIG_WRITES, MAX_PAGES = 1 << 0, 1 << 5, 1 << 22
MAX_WRITE = 128 * 1024
READ_BUFFER = MAX_WRITE + 64 * 1024
FOPEN_DIRECT_IO = 1
GETATTR_FH = 1
FATTR_MODE, FATTR_UID, FATTR_GID, FATTR_SIZE = 1, 2, 4, 8
FATTR_ATIME, FATTR_MTIME, FATTR_FH, FATTR_ATIME_NOW, FATTR_MTIME_NOW = 16, 32, 64, 128, 256
RENAME_NOREPLACE, RENAME_EXCHANGE = 1, 2
ROOT_ID = 1

MS_NOSUID, MS_NODEV = 2, 4
MNT_DETACH = 2

_libc = ctypes.CDLL(ctypes.util.find_library("c") or "libc.so.6", use_errno=True)
_libc.mount.argtypes = [ctypes.c_char_p, ctypes.c_char_p, ctypes.c_char_p, ctypes.c_ulong, ctypes.c_char_p]
_libc.umount2.argtypes = [ctypes.c_char_p, ctypes.c_int]


class MountError(OSError):
    pass


def _cstr(body: bytes, start: int = 0) -> tuple[str, int]:
    end = body.index(b"\0", start)
    return os.fsdecode(body[start:end]), end + 1


def pack_attr(a: Attr) -> bytes:
    return ATTR.pack(
        a.ino or 1, max(a.size, 0), a.blocks,
        a.atime_ns // 1_000_000_000, a.mtime_ns // 1_000_000_000, a.ctime_ns // 1_000_000_000,
        a.atime_ns % 1_000_000_000, a.mtime_ns % 1_000_000_000, a.ctime_ns % 1_000_000_000,
        a.mode, a.nlink, a.uid, a.gid, 0, 4096, 0,
    )


def _dtype(mode: int) -> int:
    return stat.S_IFMT(mode) >> 12


@dataclass
class _Node:
    path: str
    lookups: int = 0


@dataclass
class _DirHandle:
    path: str
    entries: list[tuple[str, int, int]] | None = None  # name, ino, dtype
    pid: int = 0


@dataclass
class _Request:
    opcode: int
    unique: int
    nodeid: int
    pid: int
    body: bytes
    extra: dict = field(default_factory=dict)


class NodeTable:
    """Kernel node ids <-> mount-relative paths."""

    def __init__(self):
        self._lock = threading.Lock()
        self._nodes: dict[int, _Node] = {ROOT_ID: _Node("/", 1)}
        self._by_path: dict[str, int] = {"/": ROOT_ID}
        self._next = ROOT_ID + 1

    def path(self, nodeid: int) -> str | None:
        n = self._nodes.get(nodeid)
        return n.path if n is not None else None

    def child(self, parent: int, name: str) -> str | None:
        p = self.path(parent)
        return None if p is None else posixpath.join(p, name)

    def remember(self, path: str) -> int:
        with self._lock:
            nid = self._by_path.get(path)
            if nid is None:
                nid = self._next
                self._next += 1
                self._nodes[nid] = _Node(path)
                self._by_path[path] = nid
            self._nodes[nid].lookups += 1
            return nid

    def forget(self, nodeid: int, n: int) -> None:
        if nodeid == ROOT_ID:
            return
        with self._lock:
            node = self._nodes.get(nodeid)
            if node is None:
                return
            node.lookups -= n
            if node.lookups <= 0:
                del self._nodes[nodeid]
                if self._by_path.get(node.path) == nodeid:
                    del self._by_path[node.path]

    def moved(self, old: str, new: str) -> None:
        """Re-key `old` and everything below it to live under `new`."""
        with self._lock:
            prefix = old.rstrip("/") + "/"
            victim = self._by_path.pop(new, None)
            for nid, node in self._nodes.items():
                if node.path == old or node.path.startswith(prefix):
                    if nid == victim:
                        continue
                    self._by_path.pop(node.path, None)
                    node.path = new + node.path[len(old):]
                    self._by_path[node.path] = nid


class FuseDriver:
    """Serves one kernel mount of a `MountSession` from a pool of threads."""

    def __init__(self, mountpoint: str, threads: int = 4, entry_timeout: float = 0.0,
                 options: str = "allow_other"):
        self.mountpoint = os.path.abspath(mountpoint)
        self.n_threads = threads
        self.entry_timeout = entry_timeout
        self.options = options
        self.session = None
        self.fd: int | None = None
        self.nodes = NodeTable()
        self.dirs: dict[int, _DirHandle] = {}
        self._dir_ids = iter(range(1, 1 << 62))
        self._dir_lock = threading.Lock()
        self._threads: list[threading.Thread] = []
        self._stopping = threading.Event()
        self._ready = threading.Event()
        self._tgid: dict[int, int] = {}
        self.mounted = False
        self.stats = {"requests": 0, "unsupported": 0, "reply_errors": 0}

    # -- lifecycle ------------------------------------------------------------

    def start(self, session) -> None:
        self.session = session
        if os.path.ismount(self.mountpoint):
            raise MountError(errno.EBUSY, f"mountpoint busy: {self.mountpoint}")
        self.fd = os.open("/dev/fuse", os.O_RDWR | os.O_CLOEXEC)
        opts = (f"fd={self.fd},rootmode={stat.S_IFDIR:o},user_id={os.getuid()},"
                f"group_id={os.getgid()}")
        if self.options:
            opts += "," + self.options
        rc = _libc.mount(b"guardfs", os.fsencode(self.mountpoint), b"fuse.guardfs", MS_NOSUID | MS_NODEV,
                         opts.encode())
        if rc != 0:
            err = ctypes.get_errno()
            os.close(self.fd)
            self.fd = None
            raise MountError(err, f"mount {self.mountpoint}: {os.strerror(err)}")
        self.mounted = True
        for i in range(self.n_threads):
            t = threading.Thread(target=self._serve, name=f"fuse-{i}", daemon=True)
            t.start()
            self._threads.append(t)
        if not self._ready.wait(5.0):
            self.stop()
            raise MountError(errno.ETIMEDOUT, "kernel never sent INIT")

    def stop(self) -> None:
        if self._stopping.is_set():
            return
        self._stopping.set()
        if self.mounted:
            if _libc.umount2(os.fsencode(self.mountpoint), MNT_DETACH) != 0:
                err = ctypes.get_errno()
                log.warning("umount %s: %s", self.mountpoint, os.strerror(err))
            self.mounted = False
        deadline = time.monotonic() + 3.0
        for t in self._threads:
            t.join(timeout=max(0.0, deadline - time.monotonic()))
        if any(t.is_alive() for t in self._threads):
            log.warning("fuse workers still busy after unmount; leaving them to exit")
        elif self.fd is not None:
            os.close(self.fd)
            self.fd = None

    # -- request loop ---------------------------------------------------------

    def _serve(self) -> None:
        while not self._stopping.is_set() or self.mounted:
            try:
                buf = os.read(self.fd, READ_BUFFER)
            except OSError as exc:
                if exc.errno in (errno.EINTR, errno.EAGAIN, errno.ENOENT):
                    continue
                if exc.errno != errno.ENODEV:
                    log.warning("reading /dev/fuse: %s", exc)
                return
            if not buf:
                return
            try:
                self._handle(buf)
            except Exception:
                log.exception("fuse request failed")
                try:
                    _, _, unique = IN_HEADER.unpack_from(buf)[:3]
                    self._reply_error(unique, errno.EIO)
                except Exception:
                    pass

    def _send(self, data: bytes) -> None:
        try:
            os.write(self.fd, data)
        except OSError as exc:
            # ENOENT: the request was interrupted and the kernel dropped it
            self.stats["reply_errors"] += 1
            if exc.errno not in (errno.ENOENT, errno.ENODEV, errno.EBADF):
                log.warning("replying to kernel: %s", exc)

    def _reply(self, unique: int, payload: bytes = b"") -> None:
        self._send(OUT_HEADER.pack(OUT_HEADER.size + len(payload), 0, unique) + payload)

    def _reply_error(self, unique: int, err: int) -> None:
        self._send(OUT_HEADER.pack(OUT_HEADER.size, -abs(err), unique))

    def _pid(self, tid: int, fh: int | None = None) -> int:
        if tid <= 0:
            owner = self.session.handles.owner(fh) if fh is not None else None
            return owner or os.getpid()
        pid = self._tgid.get(tid)
        if pid is None:
            pid = tid
            try:
                with open(f"/proc/{tid}/status", "rb") as fh_:
                    for line in fh_:
                        if line.startswith(b"Tgid:"):
                            pid = int(line.split()[1])
                            break
            except OSError:
                pass
            if len(self._tgid) > 4096:
                self._tgid.clear()
            self._tgid[tid] = pid
        return pid

    def _submit(self, r: _Request, kind: CallKind, reply, fh: int | None = None, **payload) -> None:
        ctx = CallContext(self._pid(r.pid, fh), time.time_ns(), kind)
        req = SyscallRequest(ctx, fh=fh, **payload)

        def done(pc) -> None:
            resp = pc.response
            if resp.error:
                self._reply_error(r.unique, resp.error)
                return
            try:
                reply(pc, resp)
            except Exception:
                log.exception("building reply for opcode %d", r.opcode)
                self._reply_error(r.unique, errno.EIO)

        self.session.submit(req, on_done=done)

    def _handle(self, buf: bytes) -> None:
        length, opcode, unique, nodeid, uid, gid, pid, _ = IN_HEADER.unpack_from(buf)
        body = buf[IN_HEADER.size:length]
        self.stats["requests"] += 1
        r = _Request(opcode, unique, nodeid, pid, body)
        h = self._HANDLERS.get(opcode)
        if h is None:
            self.stats["unsupported"] += 1
            if opcode not in (FORGET, BATCH_FORGET, INTERRUPT):
                self._reply_error(unique, errno.ENOSYS)
            return
        h(self, r)

    # -- attribute helpers ----------------------------------------------------

    def _entry(self, path: str, attr: Attr) -> bytes:
        nid = self.nodes.remember(path)
        t = self.entry_timeout
        sec, nsec = int(t), int((t % 1) * 1e9)
        return ENTRY_HEAD.pack(nid, 0, sec, sec, nsec, nsec) + pack_attr(attr)

    def _attr_out(self, attr: Attr) -> bytes:
        t = self.entry_timeout
        return ATTR_OUT_HEAD.pack(int(t), int((t % 1) * 1e9), 0) + pack_attr(attr)

    def _phantom_attr(self, path: str) -> Attr | None:
        for _, e in self.session.handles.entries():
            if e.path == path and e.ufd is None and e.attr is not None:
                return e.attr
        return None

    def _need_path(self, r: _Request) -> str | None:
        p = self.nodes.path(r.nodeid)
        if p is None:
            self._reply_error(r.unique, errno.ESTALE)
        return p

    # -- handlers -------------------------------------------------------------

    def _init(self, r: _Request) -> None:
        major, minor, max_readahead, flags = struct.unpack_from("<IIII", r.body)
        if major < KERNEL_MAJOR:
            self._reply_error(r.unique, errno.EPROTO)
            return
        want = ASYNC_READ | BIG_WRITES | MAX_PAGES
        out = INIT_OUT.pack(KERNEL_MAJOR, min(minor, KERNEL_MINOR), max_readahead, flags & want,
                            16, 12, MAX_WRITE, 1, MAX_WRITE // 4096, 0, 0)
        self._reply(r.unique, out)
        self._ready.set()

    def _destroy(self, r: _Request) -> None:
        self._reply(r.unique)

    def _lookup(self, r: _Request) -> None:
        name, _ = _cstr(r.body)
        path = self.nodes.child(r.nodeid, name)
        if path is None:
            self._reply_error(r.unique, errno.ESTALE)
            return
        self._getattr_path(r, path, entry=True)

    def _getattr_path(self, r: _Request, path: str, entry: bool, fh: int | None = None) -> None:
        ctx = CallContext(self._pid(r.pid, fh), time.time_ns(), CallKind.GETATTR)

        def done(pc) -> None:
            resp = pc.response
            attr = resp.attr
            if resp.error:
                attr = self._phantom_attr(path)
                if attr is None:
                    self._reply_error(r.unique, resp.error)
                    return
            self._reply(r.unique, self._entry(path, attr) if entry else self._attr_out(attr))

        self.session.submit(SyscallRequest(ctx, path=path, fh=fh), on_done=done)

    def _getattr(self, r: _Request) -> None:
        path = self._need_path(r)
        if path is None:
            return
        flags, _, fh = struct.unpack_from("<IIQ", r.body) if len(r.body) >= 16 else (0, 0, 0)
        use_fh = fh if flags & GETATTR_FH and fh in self.session.handles else None
        self._getattr_path(r, path, entry=False, fh=use_fh)

    def _setattr(self, r: _Request) -> None:
        path = self._need_path(r)
        if path is None:
            return
        (valid, _, fh, size, _, atime, mtime, _, atimens, mtimens, _, mode, _, uid, gid, _) = struct.unpack_from(
            "<IIQQQQQQIIIIIIII", r.body)
        use_fh = fh if valid & FATTR_FH and fh in self.session.handles else None

        def finish(pc=None, resp=None) -> None:
            try:
                self._apply_meta(path, valid, mode, uid, gid, atime, atimens, mtime, mtimens)
            except OSError as exc:
                if pc is None or pc.actions[-1:] != [ActionKind.FABRICATE]:
                    self._reply_error(r.unique, exc.errno or errno.EIO)
                    return
            attr = None
            try:
                attr = Attr.from_stat(os.lstat(self.session.underlay.path(path)))
            except OSError:
                attr = self._phantom_attr(path)
            if attr is None:
                attr = resp.attr if resp is not None and resp.attr is not None else None
            if attr is None:
                self._reply_error(r.unique, errno.ENOENT)
                return
            if pc is not None and pc.actions[-1:] == [ActionKind.FABRICATE]:
                attr = attr._replace(size=size)  # what the caller asked for
            self._reply(r.unique, self._attr_out(attr))

        if valid & FATTR_SIZE:
            self._submit(r, CallKind.TRUNCATE, lambda pc, resp: finish(pc, resp), fh=use_fh, path=path,
                         length=size)
        else:
            finish()

    def _apply_meta(self, path, valid, mode, uid, gid, atime, atimens, mtime, mtimens) -> None:
        # metadata-only changes never alter file contents; applied directly
        p = self.session.underlay.path(path)
        if valid & FATTR_MODE and not os.path.islink(p):
            os.chmod(p, stat.S_IMODE(mode))
        if valid & (FATTR_UID | FATTR_GID):
            os.chown(p, uid if valid & FATTR_UID else -1, gid if valid & FATTR_GID else -1,
                     follow_symlinks=False)
        if valid & (FATTR_ATIME | FATTR_MTIME | FATTR_ATIME_NOW | FATTR_MTIME_NOW):
            st = os.lstat(p)
            now = time.time_ns()
            a = now if valid & FATTR_ATIME_NOW else (atime * 10**9 + atimens if valid & FATTR_ATIME else st.st_atime_ns)
            m = now if valid & FATTR_MTIME_NOW else (mtime * 10**9 + mtimens if valid & FATTR_MTIME else st.st_mtime_ns)
            os.utime(p, ns=(a, m), follow_symlinks=False)

    def _readlink(self, r: _Request) -> None:
        path = self._need_path(r)
        if path is None:
            return
        try:
            self._reply(r.unique, os.fsencode(os.readlink(self.session.underlay.path(path))))
        except OSError as exc:
            self._reply_error(r.unique, exc.errno or errno.EIO)

    def _mkdir(self, r: _Request) -> None:
        mode, umask = struct.unpack_from("<II", r.body)
        name, _ = _cstr(r.body, 8)
        path = self.nodes.child(r.nodeid, name)
        if path is None:
            self._reply_error(r.unique, errno.ESTALE)
            return
        self._submit(r, CallKind.MKDIR, lambda pc, resp: self._reply(r.unique, self._entry(path, resp.attr)),
                     path=path, mode=mode & ~umask)

    def _unlink(self, r: _Request, kind: CallKind = CallKind.UNLINK) -> None:
        name, _ = _cstr(r.body)
        path = self.nodes.child(r.nodeid, name)
        if path is None:
            self._reply_error(r.unique, errno.ESTALE)
            return
        self._submit(r, kind, lambda pc, resp: self._reply(r.unique), path=path)

    def _rmdir(self, r: _Request) -> None:
        self._unlink(r, CallKind.RMDIR)

    def _rename(self, r: _Request) -> None:
        if r.opcode == RENAME2:
            newdir, flags, _ = struct.unpack_from("<QII", r.body)
            off = 16
        else:
            (newdir,), flags, off = struct.unpack_from("<Q", r.body), 0, 8
        old, off = _cstr(r.body, off)
        new, _ = _cstr(r.body, off)
        src = self.nodes.child(r.nodeid, old)
        dst = self.nodes.child(newdir, new)
        if src is None or dst is None:
            self._reply_error(r.unique, errno.ESTALE)
            return
        if flags & RENAME_EXCHANGE:
            self._reply_error(r.unique, errno.EINVAL)
            return
        if flags & RENAME_NOREPLACE and os.path.lexists(self.session.underlay.path(dst)):
            self._reply_error(r.unique, errno.EEXIST)
            return

        def done(pc, resp) -> None:
            self.nodes.moved(src, dst)
            self._reply(r.unique)

        self._submit(r, CallKind.RENAME, done, path=src, new_path=dst)

    def _open(self, r: _Request) -> None:
        path = self._need_path(r)
        if path is None:
            return
        flags, _ = struct.unpack_from("<II", r.body)
        self._submit(r, CallKind.OPEN, lambda pc, resp: self._reply(r.unique, OPEN_OUT.pack(resp.fh, FOPEN_DIRECT_IO, 0)),
                     path=path, flags=flags)

    def _create(self, r: _Request) -> None:
        flags, mode, umask, _ = struct.unpack_from("<IIII", r.body)
        name, _ = _cstr(r.body, 16)
        path = self.nodes.child(r.nodeid, name)
        if path is None:
            self._reply_error(r.unique, errno.ESTALE)
            return

        def done(pc, resp) -> None:
            self._reply(r.unique, self._entry(path, resp.attr) + OPEN_OUT.pack(resp.fh, FOPEN_DIRECT_IO, 0))

        self._submit(r, CallKind.CREATE, done, path=path, flags=flags, mode=mode & ~umask)

    def _read(self, r: _Request) -> None:
        fh, offset, size = struct.unpack_from("<QQI", r.body)
        self._submit(r, CallKind.READ, lambda pc, resp: self._reply(r.unique, resp.data), fh=fh, offset=offset,
                     size=size)

    def _write(self, r: _Request) -> None:
        fh, offset, size = struct.unpack_from("<QQI", r.body)
        data = r.body[40:40 + size]
        self._submit(r, CallKind.WRITE, lambda pc, resp: self._reply(r.unique, struct.pack("<II", resp.count, 0)),
                     fh=fh, offset=offset, data=data)

    def _release(self, r: _Request) -> None:
        (fh,) = struct.unpack_from("<Q", r.body)
        self._submit(r, CallKind.RELEASE, lambda pc, resp: self._reply(r.unique), fh=fh)

    def _statfs(self, r: _Request) -> None:
        try:
            s = os.statvfs(self.session.underlay.root)
        except OSError as exc:
            self._reply_error(r.unique, exc.errno or errno.EIO)
            return
        self._reply(r.unique, KSTATFS.pack(s.f_blocks, s.f_bfree, s.f_bavail, s.f_files, s.f_ffree,
                                           s.f_bsize, s.f_namemax, s.f_frsize, 0))

    def _fsync(self, r: _Request) -> None:
        (fh,) = struct.unpack_from("<Q", r.body)
        e = self.session.handles.get(fh)
        if e is not None and e.ufd is not None:
            try:
                os.fsync(e.ufd)
            except OSError:
                pass
        self._reply(r.unique)

    def _ok(self, r: _Request) -> None:
        self._reply(r.unique)

    def _access(self, r: _Request) -> None:
        path = self._need_path(r)
        if path is None:
            return
        if os.path.lexists(self.session.underlay.path(path)) or self._phantom_attr(path) is not None:
            self._reply(r.unique)
        else:
            self._reply_error(r.unique, errno.ENOENT)

    def _opendir(self, r: _Request) -> None:
        path = self._need_path(r)
        if path is None:
            return
        with self._dir_lock:
            dh = next(self._dir_ids)
            self.dirs[dh] = _DirHandle(path, pid=r.pid)
        self._reply(r.unique, OPEN_OUT.pack(dh, 0, 0))

    def _readdir(self, r: _Request) -> None:
        fh, offset, size = struct.unpack_from("<QQI", r.body)
        d = self.dirs.get(fh)
        if d is None:
            self._reply_error(r.unique, errno.EBADF)
            return
        if d.entries is not None and offset > 0:
            self._reply(r.unique, self._dirents(d.entries, offset, size))
            return

        def done(pc, resp) -> None:
            base = self.session.underlay.path(d.path)
            entries = [(".", 1, _dtype(stat.S_IFDIR)), ("..", 1, _dtype(stat.S_IFDIR))]
            for name in resp.entries:
                try:
                    st = os.lstat(os.path.join(base, name))
                    entries.append((name, st.st_ino, _dtype(st.st_mode)))
                except OSError:
                    entries.append((name, 1, 0))
            d.entries = entries
            self._reply(r.unique, self._dirents(entries, offset, size))

        self._submit(r, CallKind.READDIR, done, path=d.path)

    @staticmethod
    def _dirents(entries, offset: int, size: int) -> bytes:
        out = bytearray()
        for i in range(offset, len(entries)):
            name, ino, dtype = entries[i]
            raw = os.fsencode(name)
            rec = DIRENT_HEAD.pack(ino or 1, i + 1, len(raw), dtype) + raw
            rec += b"\0" * (-len(rec) % 8)
            if len(out) + len(rec) > size:
                break
            out += rec
        return bytes(out)

    def _releasedir(self, r: _Request) -> None:
        (fh,) = struct.unpack_from("<Q", r.body)
        with self._dir_lock:
            self.dirs.pop(fh, None)
        self._reply(r.unique)

    def _forget(self, r: _Request) -> None:
        (n,) = struct.unpack_from("<Q", r.body)
        self.nodes.forget(r.nodeid, n)

    def _batch_forget(self, r: _Request) -> None:
        (count,) = struct.unpack_from("<I", r.body)
        for i in range(count):
            nid, n = struct.unpack_from("<QQ", r.body, 8 + 16 * i)
            self.nodes.forget(nid, n)

    def _interrupt(self, r: _Request) -> None:
        # Held calls finish when their gate opens; the kernel drops the
        # late reply if the caller is gone.
        pass

    _HANDLERS = {
        INIT: _init,
        DESTROY: _destroy,
        LOOKUP: _lookup,
        GETATTR: _getattr,
        SETATTR: _setattr,
        READLINK: _readlink,
        MKDIR: _mkdir,
        UNLINK: _unlink,
        RMDIR: _rmdir,
        RENAME: _rename,
        RENAME2: _rename,
        OPEN: _open,
        CREATE: _create,
        READ: _read,
        WRITE: _write,
        RELEASE: _release,
        STATFS: _statfs,
        FSYNC: _fsync,
        FSYNCDIR: _ok,
        FLUSH: _ok,
        ACCESS: _access,
        OPENDIR: _opendir,
        READDIR: _readdir,
        RELEASEDIR: _releasedir,
        FORGET: _forget,
        BATCH_FORGET: _batch_forget,
        INTERRUPT: _interrupt,
    }
