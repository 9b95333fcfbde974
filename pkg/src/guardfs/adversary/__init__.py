"""Synthetic adversaries and benign workloads, plus the corpus they work on."""

from guardfs.adversary.benign import BENIGN_FOUR, WORKLOADS, BenignSpec, benign_program
from guardfs.adversary.corpus import (
    CorpusSpec,
    ManifestEntry,
    copy_corpus,
    generate_corpus,
    read_manifest,
    write_manifest,
)
from guardfs.adversary.executors import RealRunner, RunHandle, SimExecutor, launch, program_for
from guardfs.adversary.ransomware import FAMILIES, PRESETS, RansomSpec, preset, ransomware_program, sleeper


def run_ransomware(spec: RansomSpec, target_root, workdir) -> RunHandle:
    return launch("ransomware", spec, target_root, workdir)


def run_benign(spec: BenignSpec, target_root, workdir) -> RunHandle:
    return launch("benign", spec, target_root, workdir)


__all__ = [
    "BENIGN_FOUR",
    "BenignSpec",
    "CorpusSpec",
    "FAMILIES",
    "ManifestEntry",
    "PRESETS",
    "RansomSpec",
    "RealRunner",
    "RunHandle",
    "SimExecutor",
    "WORKLOADS",
    "benign_program",
    "copy_corpus",
    "generate_corpus",
    "launch",
    "preset",
    "program_for",
    "ransomware_program",
    "read_manifest",
    "run_benign",
    "run_ransomware",
    "sleeper",
    "write_manifest",
]
