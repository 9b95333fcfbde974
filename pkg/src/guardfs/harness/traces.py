"""Labeled telemetry traces recorded from simulated workloads, for training."""

from __future__ import annotations

import itertools
import logging
import shutil
from dataclasses import dataclass
from pathlib import Path

from guardfs.adversary.benign import WORKLOADS, BenignSpec
from guardfs.adversary.corpus import CorpusSpec
from guardfs.adversary.ransomware import FAMILIES, preset, sleeper
from guardfs.defense import DefenseMode
from guardfs.detector.dataset import BENIGN, MALICIOUS, Dataset, build_dataset
from guardfs.harness.experiment import LABELS_FILE, RANSOM_LABEL, ExperimentPlan, read_labels, run_experiment
from guardfs.telemetry import FeatureVector, read_events

log = logging.getLogger(__name__)

EVENTS_FILE = "events.log"
TRAINING_MODES = ("none", "trackobf:5", "delobf:5")
TRAINING_RATES = (1.5e6, 3e6, 6e6, 10e6)


@dataclass(frozen=True)
class Trace:
    path: Path
    labels: dict[int, tuple[str, str]]  # pid -> (label, family)

    @property
    def events(self) -> Path:
        return self.path / EVENTS_FILE

    def simulated_seconds(self) -> float:
        ts = [ev.ts for ev in read_events(self.events)]
        return (max(ts) - min(ts)) / 1000.0 if ts else 0.0


def load_trace(path: str | Path) -> Trace:
    path = Path(path)
    return Trace(path, read_labels(path / LABELS_FILE))


def record_trace(name: str, plan: ExperimentPlan, out_dir: str | Path, model=None, oracle: bool = True) -> Trace:
    """Run `plan` in simulation and keep its event log and PID labels."""
    work = Path(out_dir) / name
    if work.exists():
        shutil.rmtree(work)
    run_experiment(plan, work, model=model, oracle=oracle)
    return load_trace(work)


def training_plans(seeds=(0, 1), families=FAMILIES, benign=WORKLOADS, modes=TRAINING_MODES,
                   corpus_mb: int = 24) -> list[tuple[str, ExperimentPlan]]:
    """A campaign covering every family under gated and ungated modes, each
    alongside a concurrent reader, plus every benign workload on its own."""
    plans = []
    rates = itertools.cycle(TRAINING_RATES)
    for seed in seeds:
        corpus = CorpusSpec(total_bytes=corpus_mb << 20, file_count=corpus_mb * 5, seed=seed)
        for fam, mode in itertools.product(families, modes):
            rate = next(rates)
            reader = BenignSpec("reader-server", duration=40.0, rate=2e6, seed=seed)
            plans.append((f"{fam}-{mode.replace(':', '')}-s{seed}", ExperimentPlan(
                DefenseMode.parse(mode), corpus=corpus, ransomware=preset(fam, rate=rate, seed=seed),
                benign=(reader,), cap=90.0, seed=seed)))
        plans.append((f"sleeper-s{seed}", ExperimentPlan(
            DefenseMode.none(), corpus=corpus, ransomware=sleeper(next(rates), 12.0 + 3 * seed, seed=seed),
            cap=90.0, seed=seed)))
        for wl, mode in itertools.product(benign, ("none", "trackobf:5")):
            spec = BenignSpec(wl, duration=60.0, rate=next(rates) / 2, seed=seed)
            plans.append((f"{wl}-{mode.replace(':', '')}-s{seed}", ExperimentPlan(
                DefenseMode.parse(mode), corpus=corpus, benign=(spec,), cap=120.0, seed=seed)))
    return plans


def acquisition_plans(seeds=(0, 1, 2), families=FAMILIES, benign=("reader-server", "uploader"),
                      rates=(0.75e6, 1.5e6, 3e6), corpus_mb: int = 32,
                      benign_seconds: float = 120.0) -> list[tuple[str, ExperimentPlan]]:
    """Undefended recording runs: each family on its own at a few encryption
    rates, and each benign workload on its own."""
    plans = []
    for seed in seeds:
        corpus = CorpusSpec(total_bytes=corpus_mb << 20, file_count=corpus_mb * 5, seed=seed)
        for fam, rate in itertools.product(families, rates):
            plans.append((f"{fam}-{rate / 1e6:g}MBps-s{seed}", ExperimentPlan(
                DefenseMode.none(), corpus=corpus, ransomware=preset(fam, rate=rate, seed=seed), cap=300.0,
                seed=seed)))
        for wl in benign:
            spec = BenignSpec(wl, duration=benign_seconds, rate=2e6, seed=seed)
            plans.append((f"{wl}-s{seed}", ExperimentPlan(
                DefenseMode.none(), corpus=corpus, benign=(spec,), cap=benign_seconds + 60, seed=seed)))
    return plans


def _labeler(trace: Trace):
    def label(v: FeatureVector) -> str | None:
        entry = trace.labels.get(v.pid)
        if entry is None:
            return None
        if entry[0] == RANSOM_LABEL:
            # windows where a sample only walked or read carry no signal
            return MALICIOUS if v.writes + v.renames + v.unlinks > 0 else None
        return BENIGN

    return label


def trace_dataset(traces, window: int = 5) -> Dataset:
    """Windowed, labeled vectors from recorded traces; the family tag is the
    ransomware family or the benign workload that produced the vector."""
    parts = []
    for t in traces:
        t = t if isinstance(t, Trace) else load_trace(t)
        for fam in sorted({f for _, f in t.labels.values()}):
            pids = {p for p, (_, f) in t.labels.items() if f == fam}
            events = [ev for ev in read_events(t.events) if ev.pid in pids]
            ds = build_dataset([(events, _labeler(t), fam)], window)
            if len(ds):
                parts.append(ds)
    return Dataset.concat(parts) if parts else Dataset.empty()


def record_campaign(plans, out_dir: str | Path, oracle: bool = True) -> list[Trace]:
    traces = []
    for name, plan in plans:
        log.info("recording %s", name)
        traces.append(record_trace(name, plan, out_dir, oracle=oracle))
    return traces


def reference_dataset(out_dir: str | Path, window: int = 5) -> Dataset:
    """The data behind the shipped reference model: the gated training
    campaign plus the undefended acquisition runs."""
    out = Path(out_dir)
    traces = record_campaign(training_plans(), out / "training")
    traces += record_campaign(acquisition_plans(), out / "acquisition")
    return trace_dataset(traces, window)
