"""guardfs command line: corpus, datasets, models, workloads, mounts and experiments."""

from __future__ import annotations

import argparse
import logging
import os
import shutil
import signal
import sys
import threading
import time
from pathlib import Path

from guardfs.config import Config, ConfigError, load_config

log = logging.getLogger("guardfs")

LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}
EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class Outputs:
    """Tracks files and directories a command creates; removes them if it fails."""

    def __init__(self):
        self.paths: list[Path] = []

    def claim(self, path: str | Path) -> Path:
        p = Path(path)
        if not p.exists():
            self.paths.append(p)
        return p

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is not None:
            for p in reversed(self.paths):
                if p.is_dir():
                    shutil.rmtree(p, ignore_errors=True)
                else:
                    p.unlink(missing_ok=True)
        return False


def _setup_logging() -> None:
    raw = os.environ.get("GUARDFS_LOG_LEVEL", "warn").strip().lower()
    if raw not in LOG_LEVELS:
        raise UsageError(f"GUARDFS_LOG_LEVEL must be one of {', '.join(LOG_LEVELS)}, got {raw!r}")
    logging.basicConfig(level=LOG_LEVELS[raw], format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def _pick(args, name: str, cfg: Config, section: str, key: str | None = None):
    """Command-line value if given, else the config file's, else the default."""
    v = getattr(args, name, None)
    return v if v is not None else cfg.get(section, key or name)


def _mode(text: str, t: float | None):
    from guardfs.defense import DefenseMode

    try:
        return DefenseMode.parse(text, t)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _load_model(path):
    from guardfs.detector import load_model, load_reference_model

    return load_reference_model() if path is None else load_model(path)


# -- commands -------------------------------------------------------------------


def cmd_mount(args, cfg: Config) -> int:
    from guardfs.service import GuardedMount

    mountpoint = _pick(args, "mountpoint", cfg, "mount")
    underlay = _pick(args, "underlay", cfg, "mount")
    if mountpoint is None or underlay is None:
        raise UsageError("mount needs --mountpoint and --underlay (or a [mount] config section)")
    mode = _mode(_pick(args, "mode", cfg, "mount"), _pick(args, "t", cfg, "mount"))
    model_path = _pick(args, "model", cfg, "mount")
    model = None
    if mode.kind.value != "none":
        if model_path is None:
            raise UsageError(f"mode {mode.label()} needs --model")
        model = _load_model(model_path)
    guard = GuardedMount(
        mountpoint, underlay, mode, model,
        window=_pick(args, "window", cfg, "mount"),
        channel=_pick(args, "channel", cfg, "mount"),
        events=args.events, audit=args.audit,
        threads=_pick(args, "threads", cfg, "mount"),
        fail_closed=cfg.get("mount", "fail_closed") or args.fail_closed,
        nominal_throughput=cfg.get("throughput", "nominal"),
    )
    done = threading.Event()
    for sig in (signal.SIGINT, signal.SIGTERM):
        signal.signal(sig, lambda *_: done.set())
    guard.start()
    print(f"mounted {guard.cfg.overlay_root} ({mode.label()})", flush=True)
    try:
        done.wait(args.duration) if args.duration else done.wait()
    finally:
        guard.stop()
    s = guard.session.stats
    print(f"unmounted; calls={s['events']} forwarded={s['forwarded']} fabricated={s['fabricated']} "
          f"delayed={s['delayed']} killed={s['killed']}")
    return EXIT_OK


def cmd_gen_corpus(args, cfg: Config) -> int:
    from guardfs.adversary.corpus import CorpusSpec, generate_corpus, write_manifest

    spec = CorpusSpec(total_bytes=int(args.size_mb * (1 << 20)), file_count=args.files, seed=args.seed,
                      dirs=args.dirs)
    with Outputs() as out:
        out.claim(args.out)
        manifest = generate_corpus(spec, args.out)
        mpath = Path(args.manifest) if args.manifest else Path(args.out).with_name(Path(args.out).name + ".manifest")
        write_manifest(manifest, out.claim(mpath))
    print(f"files={len(manifest)} bytes={sum(m.size for m in manifest)} manifest={mpath}")
    return EXIT_OK


def _parse_log_spec(text: str) -> tuple[str, str, str]:
    parts = text.split(",")
    if len(parts) not in (2, 3):
        raise UsageError(f"--log expects PATH,LABEL[,FAMILY], got {text!r}")
    path, label = parts[0], parts[1]
    family = parts[2] if len(parts) == 3 else Path(path).stem
    return path, label, family


def cmd_gen_dataset(args, cfg: Config) -> int:
    from guardfs.detector import build_dataset, write_csv
    from guardfs.harness.traces import acquisition_plans, record_campaign, trace_dataset, training_plans

    if not (args.log or args.trace or args.campaign):
        raise UsageError("give --log, --trace or --campaign")
    with Outputs() as out:
        parts = []
        if args.log:
            logs = [_parse_log_spec(s) for s in args.log]
            for path, _, _ in logs:
                if not Path(path).is_file():
                    raise FileNotFoundError(f"event log not found: {path}")
            parts.append(build_dataset(logs, args.window))
        traces = list(args.trace or [])
        if args.campaign:
            work = out.claim(args.workdir or Path(args.out).with_suffix(".traces"))
            plans = acquisition_plans(seeds=tuple(range(args.seeds))) if args.campaign == "acquisition" \
                else training_plans(seeds=tuple(range(args.seeds)))
            traces += record_campaign(plans, work)
        if traces:
            parts.append(trace_dataset(traces, args.window))
        from guardfs.detector import Dataset

        ds = Dataset.concat([p for p in parts if len(p)]) if any(len(p) for p in parts) else Dataset.empty()
        if not len(ds):
            raise ValueError("no labeled vectors produced")
        write_csv(ds, out.claim(args.out))
    b, m = ds.class_counts()
    print(f"vectors={len(ds)} benign={b} malicious={m} out={args.out}")
    return EXIT_OK


def cmd_train(args, cfg: Config) -> int:
    from guardfs.detector import read_csv, save_model, split, train

    ds = read_csv(args.data)
    if args.split:
        ds, _ = split(ds, args.split, args.seed or 0)
    kind = _pick(args, "kind", cfg, "detector")
    params = {}
    if kind == "forest":
        params["n_trees"] = _pick(args, "trees", cfg, "detector")
        depth = _pick(args, "max_depth", cfg, "detector")
        if depth is not None:
            params["max_depth"] = depth
    seed = args.seed if args.seed is not None else cfg.get("detector", "seed")
    t0 = time.perf_counter()
    model = train(kind, ds.X, ds.y, seed=seed, **params)
    with Outputs() as out:
        save_model(model, out.claim(args.out))
    print(f"model={kind} vectors={len(ds)} seconds={time.perf_counter() - t0:.2f} out={args.out}")
    return EXIT_OK


def cmd_eval(args, cfg: Config) -> int:
    from guardfs.detector import evaluate, read_csv, split, train, unseen_family_recall

    ds = read_csv(args.data)
    test = split(ds, args.split, args.seed)[1] if args.split else ds
    ok = True
    if args.model or not args.unseen:
        rep = evaluate(_load_model(args.model), test.X, test.y)
        print(rep.summary())
        if args.min_accuracy is not None and rep.accuracy < args.min_accuracy:
            print(f"accuracy {rep.accuracy:.4f} below gate {args.min_accuracy}")
            ok = False
    if args.unseen:
        kind = _pick(args, "kind", cfg, "detector")
        recalls = unseen_family_recall(lambda X, y: train(kind, X, y, seed=args.seed), ds)
        for fam, r in recalls.items():
            print(f"unseen {fam} recall={r:.4f}")
            if args.min_recall is not None and r < args.min_recall:
                ok = False
    return EXIT_OK if ok else EXIT_RUNTIME


def _wait_handle(h, timeout: float | None) -> bool:
    try:
        h.wait(timeout)
        return True
    except Exception:
        h.kill()
        return False


def cmd_attack(args, cfg: Config) -> int:
    from guardfs.adversary.executors import launch
    from guardfs.adversary.ransomware import preset

    target = Path(args.target)
    if not target.is_dir():
        raise FileNotFoundError(f"target directory not found: {target}")
    over = {"parallelism": args.parallelism} if args.parallelism else {}
    spec = preset(args.family, rate=args.rate, seed=args.seed, **over)
    with Outputs() as out:
        work = out.claim(args.workdir)
        h = launch("ransomware", spec, target, work, "ransomware")
        finished = _wait_handle(h, args.timeout)
        h.write_summary(work / "attack.txt")
    s = h.stats()
    print(" ".join(f"{k}={v}" for k, v in s.items()) + f" finished={int(finished)} exit={h.returncode}")
    return EXIT_OK


def cmd_bench(args, cfg: Config) -> int:
    from guardfs.harness.resources import measure_write_throughput

    target = Path(args.target)
    if not target.is_dir():
        raise FileNotFoundError(f"target directory not found: {target}")
    if args.calibrate:
        delta = measure_write_throughput(target, int(args.probe_mb * (1 << 20)))
        print(f"delta_bytes_per_s={delta:.0f}")
    if args.workload:
        from guardfs.adversary.benign import BenignSpec
        from guardfs.adversary.executors import launch

        spec = BenignSpec(args.workload, duration=args.duration, rate=args.rate, seed=args.seed)
        with Outputs() as out:
            work = out.claim(args.workdir)
            t0 = time.perf_counter()
            h = launch("benign", spec, target, work, args.workload)
            finished = _wait_handle(h, args.timeout)
            wall = time.perf_counter() - t0
            h.write_summary(work / "bench.txt")
        s = h.stats()
        print(f"workload={args.workload} wall_s={wall:.3f} finished={int(finished)} exit={h.returncode} "
              + " ".join(f"{k}={v}" for k, v in s.items()))
    if not (args.calibrate or args.workload):
        raise UsageError("give --workload and/or --calibrate")
    return EXIT_OK


def _plans(args, cfg: Config):
    from guardfs.adversary.benign import BenignSpec
    from guardfs.adversary.corpus import CorpusSpec
    from guardfs.adversary.ransomware import preset
    from guardfs.harness.experiment import ExperimentPlan

    modes = [_mode(m, args.t) for spec in args.mode for m in spec.split(",") if m]
    family = _pick(args, "family", cfg, "experiment")
    rate = _pick(args, "rate", cfg, "experiment")
    corpus_mb = _pick(args, "corpus_mb", cfg, "experiment")
    files = _pick(args, "files", cfg, "experiment")
    cap = _pick(args, "cap", cfg, "experiment")
    backend = _pick(args, "backend", cfg, "experiment")
    benign = args.benign if args.benign is not None else [b for b in cfg.get("experiment", "benign").split(",") if b]
    seeds = args.seed if args.seed else list(range(_pick(args, "seeds", cfg, "experiment")))
    out = []
    for seed in seeds:
        corpus = CorpusSpec(total_bytes=corpus_mb << 20, file_count=files, seed=seed)
        sample = None if family in ("", "none") else preset(family, rate=rate, seed=seed)
        bspecs = tuple(BenignSpec(b, duration=args.benign_duration, seed=seed) for b in benign)
        for mode in modes:
            name = f"{mode.label().replace(':', '')}-{family or 'benign'}-s{seed}"
            out.append((name, ExperimentPlan(mode, corpus=corpus, ransomware=sample, benign=bspecs, cap=cap,
                                             window=args.window, backend=backend, seed=seed,
                                             delta=cfg.get("throughput", "delta"))))
    return out


def cmd_experiment(args, cfg: Config) -> int:
    from guardfs.harness.experiment import run_experiment

    out_dir = _pick(args, "out", cfg, "experiment")
    if out_dir is None:
        raise UsageError("experiment needs --out")
    plans = _plans(args, cfg)
    model = None if args.oracle else _load_model(args.model)
    cols = None
    with Outputs() as out:
        root = out.claim(out_dir)
        for name, plan in plans:
            work = Path(root) / name
            if work.exists():
                shutil.rmtree(work)
            rep = run_experiment(plan, work, model=model, oracle=args.oracle)
            row = rep.row()
            if cols is None:
                cols = list(row)
                print("\t".join(["run"] + cols))
            print("\t".join([name] + [str(row[c]) for c in cols]), flush=True)
    return EXIT_OK


def cmd_report(args, cfg: Config) -> int:
    from guardfs.harness import reports

    runs = reports.load_reports(args.inputs)
    if not runs:
        raise ValueError("no experiment reports found under the given paths")
    with Outputs() as out:
        out.claim(args.out)
        files = reports.render(runs, args.out)
    for title, rows, cols in (
        ("loss", reports.loss_table(runs), reports.LOSS_COLUMNS),
        ("timing", reports.timing_table(runs), reports.TIMING_COLUMNS),
        ("overhead", reports.overhead_table(runs), reports.OVERHEAD_COLUMNS),
    ):
        print(f"## {title}")
        sys.stdout.write(reports.format_table(rows, cols))
    print("## files")
    for k, p in files.items():
        print(f"{k}\t{p}")
    return EXIT_OK


# -- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="guardfs", description=__doc__)
    p.add_argument("--config", help="INI config file; unknown sections or keys are rejected")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    m = sub.add_parser("mount", help="mount a guarded overlay until SIGINT/SIGTERM")
    m.add_argument("--mountpoint", type=Path, help="empty directory to mount on")
    m.add_argument("--underlay", type=Path, help="backing directory holding the real data")
    m.add_argument("--mode", help="none, pkill, obf, delobf[:T] or trackobf[:T]")
    m.add_argument("--t", type=float, help="gate length in seconds for delobf/trackobf")
    m.add_argument("--window", type=int, help="telemetry window in seconds (default 5)")
    m.add_argument("--model", type=Path, help="model file; required unless mode is none")
    m.add_argument("--channel", help="verdict channel: file path or unix:<socket path>")
    m.add_argument("--threads", type=int, help="kernel request workers (default 4)")
    m.add_argument("--events", type=Path, help="append telemetry events to this file")
    m.add_argument("--audit", type=Path, help="append defense actions to this file")
    m.add_argument("--fail-closed", action="store_true", help="fabricate modifying calls if the engine fails")
    m.add_argument("--duration", type=float, help="unmount after this many seconds")
    m.set_defaults(func=cmd_mount)

    g = sub.add_parser("gen-corpus", help="write a synthetic document corpus and its manifest")
    g.add_argument("--out", required=True, type=Path, help="empty or new directory")
    g.add_argument("--size-mb", type=float, default=100.0, help="total corpus size in MiB")
    g.add_argument("--files", type=int, default=400, help="number of files")
    g.add_argument("--dirs", type=int, default=8, help="number of top-level directories")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--manifest", type=Path, help="manifest path (default <out>.manifest)")
    g.set_defaults(func=cmd_gen_corpus)

    d = sub.add_parser("gen-dataset", help="window event logs into a labeled feature CSV")
    d.add_argument("--out", required=True, type=Path, help="CSV to write")
    d.add_argument("--log", action="append", metavar="PATH,LABEL[,FAMILY]",
                   help="event log with one label for all its vectors (repeatable)")
    d.add_argument("--trace", action="append", type=Path, help="recorded trace directory (repeatable)")
    d.add_argument("--campaign", choices=("acquisition", "training"), help="record a simulated campaign first")
    d.add_argument("--seeds", type=int, default=3, help="campaign seeds")
    d.add_argument("--workdir", type=Path, help="where campaign traces go (default <out>.traces)")
    d.add_argument("--window", type=int, default=5, help="window length in seconds")
    d.set_defaults(func=cmd_gen_dataset)

    t = sub.add_parser("train", help="train a classifier on a dataset CSV")
    t.add_argument("--data", required=True, type=Path)
    t.add_argument("--out", required=True, type=Path, help="model file to write")
    t.add_argument("--kind", choices=("forest", "logistic", "threshold"))
    t.add_argument("--trees", type=int, help="forest size")
    t.add_argument("--max-depth", type=int, help="forest depth limit")
    t.add_argument("--seed", type=int)
    t.add_argument("--split", type=float, help="train only on this stratified fraction (e.g. 0.8)")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="score a model on a dataset CSV")
    e.add_argument("--data", required=True, type=Path)
    e.add_argument("--model", type=Path, help="model file (default: the shipped reference model)")
    e.add_argument("--split", type=float, help="evaluate on the held-out part of this split only")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--min-accuracy", type=float, help="exit 1 below this accuracy")
    e.add_argument("--unseen", action="store_true", help="also run the leave-one-family-out protocol")
    e.add_argument("--kind", choices=("forest", "logistic", "threshold"), help="classifier for --unseen")
    e.add_argument("--min-recall", type=float, help="exit 1 if any unseen-family recall is below this")
    e.set_defaults(func=cmd_eval)

    a = sub.add_parser("attack", help="run a ransomware analog against a directory")
    a.add_argument("--target", required=True, type=Path, help="directory to encrypt (usually a mountpoint)")
    a.add_argument("--family", default="aggressive-parallel",
                   choices=("aggressive-parallel", "sequential-basic", "stealth-throttled"))
    a.add_argument("--rate", type=float, default=8e6, help="encryption rate in bytes/s")
    a.add_argument("--parallelism", type=int, help="worker count override")
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--timeout", type=float, help="kill the sample after this many seconds")
    a.add_argument("--workdir", type=Path, default=Path("attack-run"), help="stats and pid files")
    a.set_defaults(func=cmd_attack)

    b = sub.add_parser("bench", help="time a benign workload or measure write throughput")
    b.add_argument("--target", required=True, type=Path)
    b.add_argument("--workload", choices=("reader-server", "uploader", "installer", "sensor-logger", "archiver"))
    b.add_argument("--duration", type=float, default=30.0, help="length of open-ended workloads")
    b.add_argument("--rate", type=float, default=4e6, help="workload rate in bytes/s")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--timeout", type=float)
    b.add_argument("--calibrate", action="store_true", help="measure sequential write throughput")
    b.add_argument("--probe-mb", type=float, default=64.0, help="calibration probe size in MiB")
    b.add_argument("--workdir", type=Path, default=Path("bench-run"))
    b.set_defaults(func=cmd_bench)

    x = sub.add_parser("experiment", help="run experiment plans and write one report per run")
    x.add_argument("--mode", action="append", required=True,
                   help="defense mode(s), comma separated or repeated: none,pkill,obf,delobf:5,trackobf:5")
    x.add_argument("--t", type=float, help="gate length for modes given without one")
    x.add_argument("--family", help="ransomware family, or none for benign-only runs")
    x.add_argument("--rate", type=float, help="encryption rate in bytes/s")
    x.add_argument("--benign", action="append", help="benign workload to run alongside (repeatable)")
    x.add_argument("--benign-duration", type=float, default=30.0)
    x.add_argument("--corpus-mb", type=int)
    x.add_argument("--files", type=int)
    x.add_argument("--seed", type=int, action="append", help="seed (repeatable); default range(--seeds)")
    x.add_argument("--seeds", type=int, help="number of seeds when --seed is not given")
    x.add_argument("--cap", type=float, help="per-run duration cap in seconds")
    x.add_argument("--window", type=int, default=5)
    x.add_argument("--backend", choices=("live", "sim"))
    x.add_argument("--model", type=Path, help="model file (default: the shipped reference model)")
    x.add_argument("--oracle", action="store_true", help="flag by ground truth instead of a model")
    x.add_argument("--out", type=Path, help="directory receiving one subdirectory per run")
    x.set_defaults(func=cmd_experiment)

    r = sub.add_parser("report", help="tables and figures from experiment reports")
    r.add_argument("inputs", nargs="+", type=Path, help="report.json files or directories holding them")
    r.add_argument("--out", required=True, type=Path, help="directory for CSV tables and PNG figures")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        _setup_logging()
        cfg = load_config(args.config)
        return args.func(args, cfg)
    except (UsageError, ConfigError) as exc:
        print(f"guardfs: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KeyboardInterrupt:
        print("guardfs: interrupted", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:
        log.debug("command failed", exc_info=True)
        print(f"guardfs: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
