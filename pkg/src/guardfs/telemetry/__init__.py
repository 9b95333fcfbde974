from guardfs.telemetry.entropy import shannon_entropy
from guardfs.telemetry.events import EventLog, FsEvent, read_events, write_events
from guardfs.telemetry.windows import (
    CSV_COLUMNS,
    FEATURE_NAMES,
    FeatureVector,
    Window,
    WindowRecorder,
    aggregate,
    window_start,
    window_stream,
)

__all__ = [
    "CSV_COLUMNS",
    "EventLog",
    "FEATURE_NAMES",
    "FeatureVector",
    "FsEvent",
    "Window",
    "WindowRecorder",
    "aggregate",
    "read_events",
    "shannon_entropy",
    "window_start",
    "window_stream",
    "write_events",
]
