"""Acceptance criteria, each at its stated tolerance.

Every test records a PASS/FAIL line that is printed in the terminal summary.
Criteria that need a kernel mount are skipped without root and /dev/fuse.
"""

import math
import random
import statistics
import time

import numpy as np
import pytest

import conftest
from guardfs.adversary.benign import BENIGN_FOUR, BenignSpec
from guardfs.adversary.corpus import CorpusSpec, generate_corpus
from guardfs.adversary.ransomware import FAMILIES, preset, sleeper
from guardfs.defense import DefenseMode
from guardfs.detector import evaluate, load_reference_model, loss_and_grad, split, train, unseen_family_recall
from guardfs.harness.experiment import ExperimentPlan, run_experiment
from guardfs.harness.snapshot import bytes_lost, snapshot
from guardfs.harness.traces import acquisition_plans, record_trace, trace_dataset
from guardfs.overlay import MountConfig, ScriptedDriver, attach, detach
from guardfs.service import GuardedMount
from guardfs.telemetry import shannon_entropy

from oracles import brute_force_loss, mutate, random_ops, run_bare, run_scripted, tree_contents

live = conftest.live
RATE = 8e6  # encryption rate of the live samples, bytes/s
T = 5.0


def record(n: int, ok: bool, detail: str) -> None:
    conftest.ACCEPTANCE[n] = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    assert ok, detail


# -- 1 ----------------------------------------------------------------------------------


def test_c01_entropy():
    t0 = time.monotonic()
    uniform = shannon_entropy(bytes(range(256)) * 16)
    const = shannon_entropy(b"\x07" * 4096)
    abab = shannon_entropy(b"abab")
    rng = shannon_entropy(np.random.default_rng(0).bytes(1 << 20))
    dt = time.monotonic() - t0
    ok = abs(uniform - 8.0) <= 1e-9 and const == 0.0 and abab == 1.0 and rng >= 7.99 and dt < 1.0
    record(1, ok, f"uniform={uniform!r} const={const} abab={abab} rng1MiB={rng:.6f} time={dt:.3f}s")


# -- 2 ----------------------------------------------------------------------------------


def test_c02_passthrough(dirs, tmp_path):
    t0 = time.monotonic()
    ops = random_ops(random.Random(2024), 1000)
    mnt, under = dirs
    bare = tmp_path / "bare"
    bare.mkdir()
    want_log = run_bare(ops, bare)
    want_tree = tree_contents(bare)

    s = attach(MountConfig(str(mnt), str(under), DefenseMode.none()), ScriptedDriver())
    try:
        got_log = run_scripted(ops, s.driver.process(4242))
    finally:
        detach(s)
    checks = {"scripted": got_log == want_log and tree_contents(under) == want_tree}

    from conftest import fuse_available
    if fuse_available():
        under2 = tmp_path / "under2"
        under2.mkdir()
        g = GuardedMount(mnt, under2, DefenseMode.none())
        g.start()
        try:
            live_log = run_bare(ops, mnt)
            live_tree = tree_contents(mnt)
        finally:
            g.stop()
        checks["kernel"] = live_log == want_log and live_tree == want_tree == tree_contents(under2)
    dt = time.monotonic() - t0
    errs = sum(1 for r in want_log if r[0] == "err")
    record(2, all(checks.values()) and dt < 30,
           f"1000 ops ({errs} failing ones) identical: {checks} time={dt:.1f}s")


# -- 3 ----------------------------------------------------------------------------------


def test_c03_bytes_lost_oracle(tmp_path):
    t0 = time.monotonic()
    root = tmp_path / "corpus"
    generate_corpus(CorpusSpec(total_bytes=8 << 20, file_count=500, seed=3), root)
    before_tree, before = tree_contents(root), snapshot(root)
    kinds = mutate(root, random.Random(3), 50)
    got = bytes_lost(before, snapshot(root)).bytes_lost
    want = brute_force_loss(before_tree, tree_contents(root))
    dt = time.monotonic() - t0
    mix = {k: kinds.count(k) for k in sorted(set(kinds))}
    record(3, got == want and len(kinds) == 50 and dt < 30,
           f"bytes_lost={got} oracle={want} mutations={mix} time={dt:.1f}s")


# -- 4 ----------------------------------------------------------------------------------


def test_c04_classifier(tmp_path):
    t0 = time.monotonic()
    traces = [record_trace(name, plan, tmp_path) for name, plan in acquisition_plans()]
    minutes = sum(t.simulated_seconds() for t in traces) / 60
    ds = trace_dataset(traces, window=5)
    fams = set(ds.families[ds.y == 1])
    benign = set(ds.families[ds.y == 0])
    tr, te = split(ds, 0.8, seed=0)
    acc = {k: evaluate(train(k, tr.X, tr.y, seed=0), te.X, te.y).accuracy for k in ("forest", "logistic")}
    unseen = unseen_family_recall(lambda X, y: train("forest", X, y, seed=0), ds)
    unseen_lr = unseen_family_recall(lambda X, y: train("logistic", X, y, seed=0), ds)
    dt = time.monotonic() - t0
    ok = (minutes >= 20 and len(fams) >= 3 and len(benign) >= 2 and acc["forest"] >= 0.95
          and acc["logistic"] >= 0.90 and min(unseen.values()) >= 0.90 and dt < 300)
    fmt = lambda d: ",".join(f"{k}={v:.3f}" for k, v in sorted(d.items()))
    record(4, ok, f"{minutes:.1f} sim-min, {len(ds)} vectors; accuracy {fmt(acc)}; unseen recall (forest) "
                  f"{fmt(unseen)}; logistic for reference {fmt(unseen_lr)}; time={dt:.0f}s")


# -- 5 ----------------------------------------------------------------------------------


def test_c05_gradient():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(300, 8))
    y = (X @ rng.normal(size=8) + rng.normal(size=300) > 0).astype(float)
    worst = 0.0
    h = 1e-6
    for _ in range(10):
        p = rng.normal(size=9)
        _, g = loss_and_grad(p, X, y)
        for i in range(9):
            e = np.zeros(9)
            e[i] = h
            num = (loss_and_grad(p + e, X, y)[0] - loss_and_grad(p - e, X, y)[0]) / (2 * h)
            worst = max(worst, abs(num - g[i]) / max(abs(num), abs(g[i]), 1e-8))
    record(5, worst <= 1e-5, f"max relative error {worst:.2e} over 10 points x 9 coordinates")


# -- 6 ----------------------------------------------------------------------------------


@live
def test_c06_live_detection(tmp_path):
    model = load_reference_model()
    delays = []
    for seed in range(10):
        plan = ExperimentPlan(DefenseMode.obf(), corpus=CorpusSpec(48 << 20, 160, seed=seed),
                              ransomware=preset("aggressive-parallel", rate=RATE, seed=seed), cap=40,
                              backend="live", seed=seed)
        r = run_experiment(plan, tmp_path / f"s{seed}", model=model)
        delays.append(r.detection_delay)
    hits = sum(1 for d in delays if d is not None and d <= 10.0)
    shown = ["-" if d is None else f"{d:.2f}" for d in delays]
    record(6, hits >= 9, f"flagged within 10 s in {hits}/10 runs; delays s={shown}")


# -- 7, 8, 11 -----------------------------------------------------------------------------

MODES7 = ("none", "pkill", "obf", "trackobf:5", "delobf:5")


@pytest.fixture(scope="module")
def defense_runs(tmp_path_factory):
    """Five seeds of every mode against the aggressive sample on a 100 MiB corpus."""
    if not conftest.fuse_available():
        pytest.skip("needs root and /dev/fuse")
    base = tmp_path_factory.mktemp("c7")
    model = load_reference_model()
    t0 = time.monotonic()
    runs = {m: [] for m in MODES7}
    for seed in range(5):
        corpus = base / f"corpus{seed}"
        generate_corpus(CorpusSpec(100 << 20, 400, seed=seed), corpus)
        for m in MODES7:
            plan = ExperimentPlan(DefenseMode.parse(m), corpus_dir=str(corpus),
                                  ransomware=preset("aggressive-parallel", rate=RATE, seed=seed),
                                  cap=30 if m.startswith("delobf") else 90, backend="live", seed=seed)
            runs[m].append(run_experiment(plan, base / f"{m.replace(':', '')}-s{seed}", model=model))
    return runs, time.monotonic() - t0


@live
def test_c07_loss_ordering(defense_runs):
    runs, dt = defense_runs
    med = {m: statistics.median(r.loss.bytes_lost for r in rs) for m, rs in runs.items()}
    full = all(r.loss.bytes_lost == r.eligible_bytes for r in runs["none"])
    bound = min(runs["none"][0].plan.delta, RATE) * 2 * T
    ordered = med["none"] > med["pkill"] >= med["obf"] >= med["trackobf:5"] >= med["delobf:5"]
    ok = ordered and full and med["delobf:5"] <= bound and dt < 15 * 60
    shown = ", ".join(f"{m}={v / 2**20:.1f}MiB" for m, v in med.items())
    record(7, ok, f"median loss {shown}; none=100%: {full}; delobf bound {bound / 2**20:.0f}MiB; "
                  f"time={dt / 60:.1f}min")


@live
def test_c08_obf_stealth(defense_runs):
    runs, _ = defense_runs
    violations = sum(len(r.stealth) for r in runs["obf"])
    flagged = sum(1 for r in runs["obf"] if r.malicious_verdicts())
    record(8, violations == 0 and flagged == len(runs["obf"]),
           f"{violations} underlay mutations after the verdict across {len(runs['obf'])} Obf runs "
           f"({flagged} flagged)")


@live
def test_c11_pkill_tree(defense_runs):
    runs, _ = defense_runs
    kills = [k for r in runs["pkill"] for k in r.kills]
    late = [k for k in kills if k.latency is None or k.latency > 1.0 or not k.tree_gone]
    flagged = all(r.malicious_verdicts() for r in runs["pkill"])
    worst = max((k.latency for k in kills if k.latency is not None), default=float("nan"))
    record(11, bool(kills) and not late and flagged,
           f"{len(kills)} kills over {len(runs['pkill'])} runs; {len(late)} slow or incomplete; "
           f"worst {worst * 1000:.0f} ms")


# -- 9 ----------------------------------------------------------------------------------


def test_c09_trackobf_sleeper():
    model = load_reference_model()
    rate = 2e6
    losses, bound = [], None
    for trial in range(20):
        rng = random.Random(trial)
        plan = ExperimentPlan(DefenseMode.trackobf(T), corpus=CorpusSpec(64 << 20, 200, seed=trial),
                              ransomware=sleeper(rate, rng.uniform(8.0, 20.0), seed=trial), cap=120, seed=trial)
        r = run_experiment(plan, model=model)
        losses.append(r.loss.bytes_lost)
        bound = min(plan.delta, rate) * T
    frac = statistics.mean(losses) / bound
    record(9, 0.25 <= frac <= 0.75,
           f"mean loss {frac:.3f} x min(delta,eps)*T over 20 trials (range {min(losses) / bound:.2f}"
           f"..{max(losses) / bound:.2f})")


# -- 10 ---------------------------------------------------------------------------------


@live
def test_c10_benign_workloads(tmp_path):
    model = load_reference_model()
    corpus = tmp_path / "corpus"
    generate_corpus(CorpusSpec(32 << 20, 160, seed=10), corpus)
    dur = {"none": {w: [] for w in BENIGN_FOUR}, "trackobf:5": {w: [] for w in BENIGN_FOUR}}
    bad = []
    for seed in range(10):
        specs = tuple(BenignSpec(w, duration=10.0, rate=2e6, seed=seed) for w in BENIGN_FOUR)
        for m in dur:
            plan = ExperimentPlan(DefenseMode.parse(m), corpus_dir=str(corpus), benign=specs, cap=120,
                                  backend="live", seed=seed)
            r = run_experiment(plan, tmp_path / f"{m.replace(':', '')}-s{seed}", model=model)
            for w in BENIGN_FOUR:
                dur[m][w].append(r.durations[w])
            if m != "none" and (r.malicious_verdicts() or r.loss.bytes_lost):
                bad.append((seed, [v.label for v in r.malicious_verdicts()], r.loss.bytes_lost))
    over = {w: 100 * (statistics.median(dur["trackobf:5"][w]) / statistics.median(dur["none"][w]) - 1)
            for w in BENIGN_FOUR}
    shown = ", ".join(f"{w}={v:+.1f}%" for w, v in over.items())
    record(10, not bad, f"{len(bad)} of 10 TrackObf runs with a Malicious verdict or loss {bad}; "
                        f"overhead vs NoDefense {shown}")
