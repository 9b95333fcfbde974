"""Tables and figures over a set of experiment reports."""

from __future__ import annotations

import csv
import json
import statistics
from collections import defaultdict
from pathlib import Path

from guardfs.harness.experiment import REPORT_FILE

MODE_ORDER = ("none", "pkill", "obf", "trackobf", "delobf")
LOSS_COLUMNS = ("sample", "mode", "runs", "eligible_bytes", "median_bytes_lost", "min_bytes_lost",
                "max_bytes_lost", "median_loss_fraction", "kills", "stealth_violations")
TIMING_COLUMNS = ("sample", "mode", "runs", "flagged", "median_delay_s", "min_delay_s", "max_delay_s")
OVERHEAD_COLUMNS = ("workload", "mode", "runs", "median_duration_s", "overhead_pct", "malicious_verdicts",
                    "bytes_lost", "guard_cpu_percent", "guard_rss_mb")


def load_reports(paths) -> list[dict]:
    """Every report.json found at or below the given paths, ordered by path."""
    found = []
    for p in paths:
        p = Path(p)
        if p.is_file():
            found.append(p)
        elif p.is_dir():
            found.extend(p.rglob(REPORT_FILE))
        else:
            raise FileNotFoundError(f"no such report or directory: {p}")
    out = []
    for f in sorted(set(found)):
        d = json.loads(f.read_text(encoding="utf-8"))
        d["source"] = str(f.parent)
        out.append(d)
    return out


def _mode_key(mode: str) -> tuple[int, str]:
    base = mode.split(":")[0]
    return (MODE_ORDER.index(base) if base in MODE_ORDER else len(MODE_ORDER), mode)


def _groups(reports, key) -> dict:
    g = defaultdict(list)
    for r in reports:
        g[key(r)].append(r)
    return g


def loss_table(reports) -> list[dict]:
    rows = []
    sampled = [r for r in reports if r["row"]["sample"]]
    groups = _groups(sampled, lambda r: (r["row"]["sample"], r["row"]["mode"]))
    for (sample, mode) in sorted(groups, key=lambda k: (k[0], _mode_key(k[1]))):
        rs = [r["row"] for r in groups[(sample, mode)]]
        lost = [r["bytes_lost"] for r in rs]
        rows.append({
            "sample": sample,
            "mode": mode,
            "runs": len(rs),
            "eligible_bytes": int(statistics.median(r["eligible_bytes"] for r in rs)),
            "median_bytes_lost": statistics.median(lost),
            "min_bytes_lost": min(lost),
            "max_bytes_lost": max(lost),
            "median_loss_fraction": round(statistics.median(r["loss_fraction"] for r in rs), 6),
            "kills": sum(r["kills"] for r in rs),
            "stealth_violations": sum(r["stealth_violations"] for r in rs),
        })
    return rows


def timing_table(reports) -> list[dict]:
    rows = []
    sampled = [r for r in reports if r["row"]["sample"]]
    groups = _groups(sampled, lambda r: (r["row"]["sample"], r["row"]["mode"]))
    for (sample, mode) in sorted(groups, key=lambda k: (k[0], _mode_key(k[1]))):
        rs = [r["row"] for r in groups[(sample, mode)]]
        delays = [float(r["detection_delay_s"]) for r in rs if r["detection_delay_s"] != ""]
        rows.append({
            "sample": sample,
            "mode": mode,
            "runs": len(rs),
            "flagged": len(delays),
            "median_delay_s": round(statistics.median(delays), 3) if delays else "",
            "min_delay_s": round(min(delays), 3) if delays else "",
            "max_delay_s": round(max(delays), 3) if delays else "",
        })
    return rows


def overhead_table(reports) -> list[dict]:
    """Benign completion time per mode, relative to the undefended runs."""
    per: dict[tuple[str, str], list[tuple[float, dict]]] = defaultdict(list)
    for r in reports:
        if r["row"]["sample"]:
            continue
        for wl, d in r["durations"].items():
            per[(wl, r["row"]["mode"])].append((d, r))
    rows = []
    for (wl, mode) in sorted(per, key=lambda k: (k[0], _mode_key(k[1]))):
        items = per[(wl, mode)]
        med = statistics.median(d for d, _ in items)
        base = per.get((wl, "none"))
        over = ""
        if base:
            b = statistics.median(d for d, _ in base)
            over = round(100.0 * (med - b) / b, 2) if b > 0 else ""
        cpu = [r["guard_cpu_percent"] for _, r in items if r.get("guard_cpu_percent") is not None]
        rss = [r["guard_rss_bytes"] for _, r in items if r.get("guard_rss_bytes") is not None]
        rows.append({
            "workload": wl,
            "mode": mode,
            "runs": len(items),
            "median_duration_s": round(med, 3),
            "overhead_pct": over,
            "malicious_verdicts": sum(r["row"]["malicious_verdicts"] for _, r in items),
            "bytes_lost": sum(r["row"]["bytes_lost"] for _, r in items),
            "guard_cpu_percent": round(statistics.fmean(cpu), 2) if cpu else "",
            "guard_rss_mb": round(max(rss) / 2**20, 1) if rss else "",
        })
    return rows


def write_table(rows: list[dict], columns, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), extrasaction="ignore")
        w.writeheader()
        w.writerows(rows)


def format_table(rows: list[dict], columns) -> str:
    """Tab-delimited text, header first."""
    lines = ["\t".join(columns)]
    lines += ["\t".join(str(r.get(c, "")) for c in columns) for r in rows]
    return "\n".join(lines) + "\n"


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_loss(rows: list[dict], path: str | Path) -> None:
    plt = _pyplot()
    samples = sorted({r["sample"] for r in rows})
    modes = sorted({r["mode"] for r in rows}, key=_mode_key)
    fig, ax = plt.subplots(figsize=(7, 4))
    width = 0.8 / max(len(samples), 1)
    for i, s in enumerate(samples):
        by_mode = {r["mode"]: r for r in rows if r["sample"] == s}
        ys = [max(by_mode[m]["median_bytes_lost"], 1) / 1024 if m in by_mode else 0 for m in modes]
        ax.bar([x + i * width for x in range(len(modes))], ys, width, label=s)
    ax.set_xticks([x + width * (len(samples) - 1) / 2 for x in range(len(modes))], modes)
    ax.set_yscale("log")
    ax.set_ylabel("median data lost (KiB)")
    ax.set_title("Data lost per defense mode")
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_delays(reports, path: str | Path) -> None:
    plt = _pyplot()
    series = defaultdict(list)
    for r in reports:
        d = r["row"]["detection_delay_s"]
        if r["row"]["sample"] and d != "":
            series[r["row"]["sample"]].append(float(d))
    fig, ax = plt.subplots(figsize=(6, 3.5))
    names = sorted(series)
    if names:
        ax.boxplot([series[n] for n in names])
        ax.set_xticks(range(1, len(names) + 1), names)
    ax.set_ylabel("detection delay (s)")
    ax.set_title("First modifying call to first malicious verdict")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_overhead(rows: list[dict], path: str | Path) -> None:
    plt = _pyplot()
    workloads = sorted({r["workload"] for r in rows})
    modes = sorted({r["mode"] for r in rows}, key=_mode_key)
    fig, ax = plt.subplots(figsize=(7, 4))
    width = 0.8 / max(len(modes), 1)
    for i, m in enumerate(modes):
        by_wl = {r["workload"]: r for r in rows if r["mode"] == m}
        ys = [by_wl[w]["median_duration_s"] if w in by_wl else 0 for w in workloads]
        ax.bar([x + i * width for x in range(len(workloads))], ys, width, label=m)
    ax.set_xticks([x + width * (len(modes) - 1) / 2 for x in range(len(workloads))], workloads)
    ax.set_ylabel("median completion time (s)")
    ax.set_title("Benign workload completion time")
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render(reports, out_dir: str | Path) -> dict[str, Path]:
    """Write the three tables as CSV and their figures as PNG into `out_dir`."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    loss, timing, overhead = loss_table(reports), timing_table(reports), overhead_table(reports)
    files = {
        "loss": out / "loss.csv",
        "timing": out / "timing.csv",
        "overhead": out / "overhead.csv",
    }
    write_table(loss, LOSS_COLUMNS, files["loss"])
    write_table(timing, TIMING_COLUMNS, files["timing"])
    write_table(overhead, OVERHEAD_COLUMNS, files["overhead"])
    if loss:
        files["loss_png"] = out / "loss.png"
        plot_loss(loss, files["loss_png"])
        files["delay_png"] = out / "delay.png"
        plot_delays(reports, files["delay_png"])
    if overhead:
        files["overhead_png"] = out / "overhead.png"
        plot_overhead(overhead, files["overhead_png"])
    return files
