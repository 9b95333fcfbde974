"""Snapshots, loss accounting, analytic bounds and experiment orchestration."""

from guardfs.harness.bounds import BufferBound, ThroughputModel, buffer_bound, expected_loss
from guardfs.harness.experiment import (
    ExperimentPlan,
    ExperimentReport,
    KillRecord,
    StealthViolation,
    VerdictRow,
    detection_delay,
    run_experiment,
    stealth_violations,
)
from guardfs.harness.resources import ResourceSample, ResourceSampler, sample_resources
from guardfs.harness.snapshot import UNREADABLE, LossReport, SnapshotManifest, bytes_lost, file_digest, snapshot

__all__ = [
    "BufferBound",
    "ExperimentPlan",
    "ExperimentReport",
    "KillRecord",
    "LossReport",
    "ResourceSample",
    "ResourceSampler",
    "SnapshotManifest",
    "StealthViolation",
    "ThroughputModel",
    "UNREADABLE",
    "VerdictRow",
    "buffer_bound",
    "bytes_lost",
    "detection_delay",
    "expected_loss",
    "file_digest",
    "run_experiment",
    "sample_resources",
    "snapshot",
    "stealth_violations",
]
