"""End-to-end experiments: corpus, workloads, defense, and the resulting loss."""

from __future__ import annotations

import json
import logging
import random
import shutil
import statistics
import tempfile
import time
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

from guardfs.adversary.benign import BenignSpec
from guardfs.adversary.corpus import CorpusSpec, copy_corpus, eligible, generate_corpus
from guardfs.adversary.ransomware import RansomSpec
from guardfs.calls import FABRICABLE
from guardfs.defense import ActionKind, DefenseMode, Verdict
from guardfs.harness.bounds import ThroughputModel
from guardfs.harness.resources import ResourceSample
from guardfs.harness.snapshot import LossReport, bytes_lost, snapshot

log = logging.getLogger(__name__)

BACKENDS = ("sim", "live")
RANSOM_LABEL = "ransomware"
SIM_EPOCH = 1_700_000_000.0
LABELS_FILE = "pids.tsv"
REPORT_FILE = "report.json"


@dataclass
class ExperimentPlan:
    mode: DefenseMode
    corpus: CorpusSpec | None = None
    corpus_dir: str | None = None  # pristine corpus copied into the underlay instead
    ransomware: RansomSpec | None = None
    benign: tuple[BenignSpec, ...] = ()
    cap: float = 300.0  # seconds; workloads still running then are stopped
    window: int = 5
    backend: str = "sim"
    seed: int = 0
    delta: float = 200e6  # simulated underlay throughput, bytes/s
    phase: float | None = None  # sim start offset inside a window; seeded when None

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValueError(f"backend must be one of {BACKENDS}")
        if self.corpus is None and self.corpus_dir is None:
            raise ValueError("plan needs a corpus spec or a corpus directory")
        if self.cap <= 0:
            raise ValueError("cap must be positive")
        self.benign = tuple(self.benign)

    def exclusions(self) -> tuple[str, ...]:
        out = []
        for b in self.benign:
            out.extend(b.output_prefixes())
        return tuple(sorted(set(out)))

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.label(),
            "corpus": vars(self.corpus) if self.corpus else None,
            "corpus_dir": self.corpus_dir,
            "ransomware": self.ransomware.to_dict() if self.ransomware else None,
            "benign": [b.to_dict() for b in self.benign],
            "cap": self.cap,
            "window": self.window,
            "backend": self.backend,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class VerdictRow:
    ts: float
    pid: int
    verdict: Verdict
    label: str


@dataclass(frozen=True)
class KillRecord:
    pid: int
    verdict_at: float
    confirmed_at: float | None
    tree_gone: bool

    @property
    def latency(self) -> float | None:
        return None if self.confirmed_at is None else self.confirmed_at - self.verdict_at


@dataclass(frozen=True)
class StealthViolation:
    pid: int
    ts_ms: int
    kind: str
    path: str


@dataclass
class ExperimentReport:
    plan: ExperimentPlan
    loss: LossReport
    eligible_bytes: int
    baseline_files: int
    detection_delay: float | None = None
    first_modify_at: float | None = None
    first_malicious_at: float | None = None
    verdicts: list[VerdictRow] = field(default_factory=list)
    kills: list[KillRecord] = field(default_factory=list)
    stealth: list[StealthViolation] = field(default_factory=list)
    stealth_files: list[str] = field(default_factory=list)
    resources: list[ResourceSample] = field(default_factory=list)
    durations: dict[str, float] = field(default_factory=dict)
    partial: bool = False
    notes: list[str] = field(default_factory=list)
    stats: dict = field(default_factory=dict)
    throughput: ThroughputModel | None = None
    elapsed: float = 0.0

    @property
    def loss_fraction(self) -> float:
        return self.loss.bytes_lost / self.eligible_bytes if self.eligible_bytes else 0.0

    def malicious_verdicts(self, label: str | None = None) -> list[VerdictRow]:
        return [v for v in self.verdicts
                if v.verdict is Verdict.MALICIOUS and (label is None or v.label == label)]

    def row(self) -> dict:
        p = self.plan
        return {
            "backend": p.backend,
            "mode": p.mode.label(),
            "sample": p.ransomware.family if p.ransomware else "",
            "benign": "+".join(b.workload for b in p.benign),
            "seed": p.seed,
            "eligible_bytes": self.eligible_bytes,
            "bytes_lost": self.loss.bytes_lost,
            "files_lost": self.loss.files_lost,
            "loss_fraction": round(self.loss_fraction, 6),
            "detection_delay_s": "" if self.detection_delay is None else round(self.detection_delay, 3),
            "malicious_verdicts": len(self.malicious_verdicts()),
            "stealth_violations": len(self.stealth),
            "kills": len(self.kills),
            "partial": int(self.partial),
            "elapsed_s": round(self.elapsed, 3),
        }

    def to_dict(self) -> dict:
        guard = [r for r in self.resources if r.tag == "guard"]
        return {
            "row": self.row(),
            "plan": self.plan.to_dict(),
            "durations": dict(sorted(self.durations.items())),
            "kills": [{"pid": k.pid, "latency_s": k.latency, "tree_gone": k.tree_gone} for k in self.kills],
            "verdicts": [{"ts": v.ts, "pid": v.pid, "verdict": v.verdict.value, "label": v.label}
                         for v in self.verdicts],
            "guard_cpu_percent": statistics.fmean(r.cpu_percent for r in guard) if guard else None,
            "guard_rss_bytes": max((r.rss_bytes for r in guard), default=None),
            "stealth_files": self.stealth_files,
            "notes": self.notes,
            "stats": self.stats,
        }

    def summary(self) -> str:
        lines = [f"{k}: {v}" for k, v in self.row().items()]
        for label, d in sorted(self.durations.items()):
            lines.append(f"duration[{label}]: {d:.3f}")
        for k in self.kills:
            lat = "n/a" if k.latency is None else f"{k.latency:.3f}"
            lines.append(f"kill: pid={k.pid} latency_s={lat} tree_gone={int(k.tree_gone)}")
        lines.extend(f"note: {n}" for n in self.notes)
        return "\n".join(lines) + "\n"


# -- analysis --------------------------------------------------------------------


def detection_delay(events, sample_pids, verdict_times: dict[int, float]) -> tuple[float | None, float | None, float | None]:
    """(delay, first modifying call, first Malicious verdict) for one sample.

    The clock starts at the sample's first modifying call, not process start.
    """
    pids = set(sample_pids)
    first_mod = None
    for ev in events:
        if ev.pid in pids and ev.op.modifying:
            t = ev.ts / 1000.0
            if first_mod is None or t < first_mod:
                first_mod = t
    flagged = [verdict_times[p] for p in pids if p in verdict_times]
    first_mal = min(flagged) if flagged else None
    if first_mod is None or first_mal is None:
        return None, first_mod, first_mal
    return max(0.0, first_mal - first_mod), first_mod, first_mal


def stealth_violations(events, audit_records, flagged_at) -> list[StealthViolation]:
    """Namespace- or content-changing calls forwarded for a PID after the
    moment it (or an ancestor) was flagged.

    `flagged_at(pid)` returns that moment in seconds, or None. Paths come from
    pairing each PID's events with its final audit actions, kind by kind, in
    order; a call that was gated has a `delay` record before its final one.
    """
    paths = defaultdict(list)
    for ev in events:
        if ev.op in FABRICABLE:
            paths[(ev.pid, ev.op)].append(ev.path)
    seen = defaultdict(int)
    out = []
    for rec in audit_records:
        if rec.kind not in FABRICABLE or rec.action is ActionKind.DELAY:
            continue
        key = (rec.pid, rec.kind)
        i = seen[key]
        seen[key] += 1
        if rec.action is not ActionKind.FORWARD:
            continue
        v = flagged_at(rec.pid)
        # decisions are stamped before the verdict store is read and verdicts
        # after it is written, so a stale forward always sorts before its
        # verdict; only the shared millisecond is ambiguous at log resolution
        if v is not None and rec.ts > int(v * 1000):
            lst = paths.get(key, [])
            out.append(StealthViolation(rec.pid, rec.ts, rec.kind.value, lst[i] if i < len(lst) else "?"))
    return out


def _flag_lookup(store, ancestry):
    def flagged_at(pid: int) -> float | None:
        times = []
        for p in [pid] + list(ancestry(pid)):
            r = store.get(p)
            if r.state is Verdict.MALICIOUS and r.decided_at is not None:
                times.append(r.decided_at)
        return min(times) if times else None

    return flagged_at


def write_labels(labels: dict[int, str], plan: ExperimentPlan, path: Path) -> None:
    """``pid<TAB>label<TAB>family`` for every PID a workload ran as."""
    with open(path, "w", encoding="utf-8") as fh:
        for pid in sorted(labels):
            label = labels[pid]
            family = plan.ransomware.family if label == RANSOM_LABEL and plan.ransomware else label
            fh.write(f"{pid}\t{label}\t{family}\n")


def read_labels(path: str | Path) -> dict[int, tuple[str, str]]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                pid, label, family = line.rstrip("\n").split("\t")
                out[int(pid)] = (label, family)
    return out


# -- orchestration -----------------------------------------------------------------


def prepare_underlay(plan: ExperimentPlan, underlay: Path) -> None:
    if underlay.exists():
        shutil.rmtree(underlay)
    if plan.corpus_dir is not None:
        copy_corpus(plan.corpus_dir, underlay)
    else:
        generate_corpus(plan.corpus, underlay)


def run_experiment(plan: ExperimentPlan, workdir: str | Path | None = None, model=None,
                   oracle: bool = False, keep_underlay: bool = False) -> ExperimentReport:
    """Baseline snapshot, run the workloads under `plan.mode` until they end
    or the cap passes, then snapshot again and account the loss.

    `model` scores windows; `oracle=True` uses workload labels instead. With
    neither, no verdicts are ever published.
    """
    own_dir = workdir is None
    work = Path(tempfile.mkdtemp(prefix="guardfs-exp-")) if own_dir else Path(workdir).resolve()
    work.mkdir(parents=True, exist_ok=True)
    underlay = work / "underlay"
    t_start = time.monotonic()
    try:
        prepare_underlay(plan, underlay)
        baseline = snapshot(underlay)
        suffix_filter = plan.ransomware.suffix_filter if plan.ransomware else frozenset()
        excl = plan.exclusions()
        eligible_bytes = sum(size for rel, (_, size) in baseline.entries.items()
                             if eligible(rel, suffix_filter) and not rel.startswith(excl or ("\0",)))
        if plan.backend == "sim":
            from guardfs.harness.runtime import SimRuntime as Runtime
        else:
            from guardfs.harness.runtime import LiveRuntime as Runtime
        rt = Runtime(plan, underlay, work, model=model, oracle=oracle)
        try:
            rt.start()
            if plan.ransomware is not None:
                rt.launch("ransomware", plan.ransomware, RANSOM_LABEL)
            for b in plan.benign:
                rt.launch("benign", b, b.workload)
            rt.wait(plan.cap)
        finally:
            rt.stop()
        after = snapshot(underlay)
        loss = bytes_lost(baseline, after, exclude=excl)
        report = _assemble(plan, rt, loss, eligible_bytes, len(baseline))
        report.elapsed = time.monotonic() - t_start
        (work / "report.txt").write_text(report.summary())
        (work / REPORT_FILE).write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True, default=str))
        write_labels(rt.labels(), plan, work / LABELS_FILE)
        (work / "plan.json").write_text(json.dumps(plan.to_dict(), indent=2, sort_keys=True))
        return report
    finally:
        if not keep_underlay:
            shutil.rmtree(underlay, ignore_errors=True)
        if own_dir:
            shutil.rmtree(work, ignore_errors=True)


def _assemble(plan: ExperimentPlan, rt, loss: LossReport, eligible_bytes: int, n_files: int) -> ExperimentReport:
    store = rt.engine.store
    labels = rt.labels()  # pid -> workload label
    events = list(rt.events())
    verdicts = sorted(
        (VerdictRow(r.decided_at, pid, r.state, labels.get(pid, "")) for pid, r in store.items()
         if r.state is not Verdict.UNKNOWN and r.decided_at is not None),
        key=lambda v: (v.ts, v.pid),
    )
    mal_times = {v.pid: v.ts for v in verdicts if v.verdict is Verdict.MALICIOUS}
    report = ExperimentReport(plan, loss, eligible_bytes, n_files, verdicts=verdicts)
    if plan.ransomware is not None:
        sample = [p for p, l in labels.items() if l == RANSOM_LABEL]
        report.detection_delay, report.first_modify_at, report.first_malicious_at = detection_delay(
            events, sample, mal_times)
    flagged_at = _flag_lookup(store, rt.ancestry)
    report.stealth = stealth_violations(events, rt.session.audit.records, flagged_at)
    lost = set(loss.files_modified)
    report.stealth_files = sorted({v.path.lstrip("/") for v in report.stealth} & lost)
    report.kills = [KillRecord(k.pid, k.verdict_at, k.confirmed_at, rt.tree_gone(k.pid))
                    for k in rt.engine.kills if k.result.ok or k.result.reason != "already dead"]
    report.durations = rt.durations()
    report.resources = rt.resources()
    report.partial, report.notes = rt.partial()
    report.stats = dict(rt.session.stats)
    if plan.ransomware is not None:
        report.throughput = ThroughputModel(rt.delta(), plan.ransomware.rate, plan.ransomware.rate, plan.mode.T or 0.0)
    return report


def sim_phase(plan: ExperimentPlan) -> float:
    if plan.phase is not None:
        return plan.phase
    return random.Random(f"phase:{plan.seed}").uniform(0, plan.window)
