"""File-system plane: path mapping, the call gateway and its drivers."""

from guardfs.overlay.drivers import ScriptedDriver, ScriptedProcess
from guardfs.overlay.fuse import FuseDriver, MountError
from guardfs.overlay.paths import MountConfig, PathEscapeError, map_path, resolve
from guardfs.overlay.session import (
    AlreadyAttached,
    CallDriver,
    MountSession,
    PendingCall,
    attach,
    detach,
)
from guardfs.overlay.underlay import FileHandleTable, HandleEntry, Underlay
from guardfs.overlay.verdicts import VerdictMessage

__all__ = [
    "AlreadyAttached",
    "CallDriver",
    "FileHandleTable",
    "FuseDriver",
    "HandleEntry",
    "MountConfig",
    "MountError",
    "MountSession",
    "PathEscapeError",
    "PendingCall",
    "ScriptedDriver",
    "ScriptedProcess",
    "Underlay",
    "VerdictMessage",
    "attach",
    "detach",
    "map_path",
    "resolve",
]
