"""Call vocabulary shared by the overlay, the defense engine and telemetry."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import NamedTuple


class CallKind(enum.Enum):
    OPEN = "open"
    CREATE = "create"
    READ = "read"
    WRITE = "write"
    RENAME = "rename"
    UNLINK = "unlink"
    READDIR = "readdir"
    GETATTR = "getattr"
    MKDIR = "mkdir"
    RMDIR = "rmdir"
    TRUNCATE = "truncate"
    RELEASE = "release"

    @property
    def modifying(self) -> bool:
        return self in MODIFYING

    @property
    def fabricable(self) -> bool:
        return self in FABRICABLE


MODIFYING = frozenset(
    {CallKind.WRITE, CallKind.RENAME, CallKind.UNLINK, CallKind.TRUNCATE, CallKind.RMDIR}
)
NON_MODIFYING = frozenset({CallKind.READ, CallKind.READDIR, CallKind.GETATTR, CallKind.OPEN})
# Create and Mkdir mutate the namespace, so malicious callers get fabricated
# answers for them too.
FABRICABLE = MODIFYING | {CallKind.CREATE, CallKind.MKDIR}


@dataclass(frozen=True)
class CallContext:
    pid: int
    timestamp: int  # ns
    op: CallKind

    def __post_init__(self):
        if self.pid <= 0:
            raise ValueError(f"pid must be positive, got {self.pid}")

    @property
    def ts_ms(self) -> int:
        return self.timestamp // 1_000_000


@dataclass
class SyscallRequest:
    ctx: CallContext
    path: str = "/"
    new_path: str | None = None  # rename target
    fh: int | None = None
    offset: int = 0
    size: int = 0  # read size
    data: bytes = b""  # write buffer
    flags: int = 0
    mode: int = 0o644
    length: int | None = None  # truncate length

    @property
    def kind(self) -> CallKind:
        return self.ctx.op

    @property
    def pid(self) -> int:
        return self.ctx.pid


class Attr(NamedTuple):
    ino: int
    mode: int
    nlink: int
    uid: int
    gid: int
    size: int
    blocks: int
    atime_ns: int
    mtime_ns: int
    ctime_ns: int

    @classmethod
    def from_stat(cls, st) -> "Attr":
        return cls(
            st.st_ino, st.st_mode, st.st_nlink, st.st_uid, st.st_gid, st.st_size,
            st.st_blocks, st.st_atime_ns, st.st_mtime_ns, st.st_ctime_ns,
        )


@dataclass
class SyscallResponse:
    """Result of a dispatched call; `error` is 0 or a host errno value."""

    error: int = 0
    count: int = 0
    data: bytes = b""
    attr: Attr | None = None
    entries: list[str] = field(default_factory=list)
    fh: int | None = None

    @property
    def ok(self) -> bool:
        return self.error == 0
