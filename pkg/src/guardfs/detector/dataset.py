"""Labeled feature datasets built from event logs."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from guardfs.telemetry import (
    CSV_COLUMNS,
    FEATURE_NAMES,
    EventLog,
    FeatureVector,
    FsEvent,
    aggregate,
    read_events,
    window_stream,
)

BENIGN, MALICIOUS = "benign", "malicious"
LABELS = (BENIGN, MALICIOUS)
DATASET_COLUMNS = CSV_COLUMNS + ("label", "family")


@dataclass(frozen=True)
class LabeledVector:
    features: tuple[float, ...]  # FEATURE_NAMES order
    label: str
    family: str = ""


@dataclass
class Dataset:
    """Feature matrix plus labels and provenance.

    `window_start` and `pid` travel along for bookkeeping and CSV export;
    they are never part of `X`.
    """

    X: np.ndarray
    y: np.ndarray  # 1 = malicious
    families: np.ndarray
    window_start: np.ndarray = field(default=None)
    pid: np.ndarray = field(default=None)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float).reshape(-1, len(FEATURE_NAMES))
        self.y = np.asarray(self.y, dtype=int)
        self.families = np.asarray(self.families, dtype=object)
        n = len(self.y)
        if self.window_start is None:
            self.window_start = np.zeros(n, dtype=np.int64)
        if self.pid is None:
            self.pid = np.zeros(n, dtype=np.int64)
        self.window_start = np.asarray(self.window_start, dtype=np.int64)
        self.pid = np.asarray(self.pid, dtype=np.int64)
        if not (len(self.X) == n == len(self.families) == len(self.window_start) == len(self.pid)):
            raise ValueError("dataset columns differ in length")

    def __len__(self) -> int:
        return len(self.y)

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.X[idx], self.y[idx], self.families[idx], self.window_start[idx], self.pid[idx])

    def where_family(self, names: Iterable[str], invert: bool = False) -> "Dataset":
        mask = np.isin(self.families, list(names))
        return self.subset(np.flatnonzero(~mask if invert else mask))

    def class_counts(self) -> tuple[int, int]:
        m = int(self.y.sum())
        return len(self.y) - m, m

    def vectors(self) -> list[LabeledVector]:
        return [LabeledVector(tuple(x), LABELS[c], f) for x, c, f in zip(self.X.tolist(), self.y, self.families)]

    @classmethod
    def concat(cls, parts: Sequence["Dataset"]) -> "Dataset":
        parts = [p for p in parts if len(p)]
        if not parts:
            return cls.empty()
        return cls(
            np.vstack([p.X for p in parts]),
            np.concatenate([p.y for p in parts]),
            np.concatenate([p.families for p in parts]),
            np.concatenate([p.window_start for p in parts]),
            np.concatenate([p.pid for p in parts]),
        )

    @classmethod
    def empty(cls) -> "Dataset":
        return cls(np.zeros((0, len(FEATURE_NAMES))), np.zeros(0, int), np.zeros(0, object))


LogSource = EventLog | Iterable[FsEvent] | str | Path
# a label is one string for the whole log, a pid -> label map, or a function
# of the feature vector (returning None drops the vector)
LabelSpec = str | Mapping[int, str] | Callable[[FeatureVector], "str | None"]


def _label_of(spec: LabelSpec, v: FeatureVector, default: str | None) -> str | None:
    if isinstance(spec, str):
        return spec
    if callable(spec):
        return spec(v)
    return spec.get(v.pid, default)


def build_dataset(logs: Sequence[tuple[LogSource, LabelSpec, str]], window: int,
                  default_label: str | None = None) -> Dataset:
    """Aggregate each log into windows and label every vector by its source.

    With a pid -> label map, PIDs missing from the map take `default_label`,
    or are skipped when that is None.
    """
    if not logs:
        raise ValueError("no logs given")
    X, y, fam, ws, pids = [], [], [], [], []
    for source, label, family in logs:
        events = read_events(source) if isinstance(source, (str, Path)) else source
        for w in window_stream(events, window):
            for v in aggregate(w):
                lab = _label_of(label, v, default_label)
                if lab is None:
                    continue
                if lab not in LABELS:
                    raise ValueError(f"unknown label {lab!r}")
                X.append(v.features())
                y.append(LABELS.index(lab))
                fam.append(family)
                ws.append(v.window_start)
                pids.append(v.pid)
    if not X:
        return Dataset.empty()
    return Dataset(np.array(X, dtype=float), y, np.array(fam, dtype=object), ws, pids)


def split(ds: Dataset, train_fraction: float = 0.8, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Stratified, seeded train/test split."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    train, test = [], []
    for c in (0, 1):
        idx = np.flatnonzero(ds.y == c)
        if len(idx) == 0:
            raise ValueError(f"class {LABELS[c]!r} absent from dataset")
        if len(idx) < 5:
            raise ValueError(f"need at least 5 vectors of class {LABELS[c]!r}, have {len(idx)}")
        idx = rng.permutation(idx)
        k = int(round(train_fraction * len(idx)))
        train.append(idx[:k])
        test.append(idx[k:])
    tr = np.sort(np.concatenate(train))
    te = np.sort(np.concatenate(test))
    return ds.subset(tr), ds.subset(te)


def require_both_classes(y: np.ndarray) -> None:
    y = np.asarray(y)
    if len(y) == 0 or y.min() == y.max():
        raise ValueError("training data must contain both benign and malicious vectors")


def write_csv(ds: Dataset, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DATASET_COLUMNS)
        for i in range(len(ds)):
            x = ds.X[i]
            counts = [int(v) for v in x[:5]]
            ents = [repr(float(v)) for v in x[5:]]
            w.writerow([int(ds.window_start[i]), int(ds.pid[i]), *counts, *ents, LABELS[ds.y[i]], ds.families[i]])


def read_csv(path: str | Path) -> Dataset:
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = tuple(next(r, ()))
        if header != DATASET_COLUMNS:
            raise ValueError(f"unexpected dataset header: {','.join(header)}")
        X, y, fam, ws, pids = [], [], [], [], []
        for row in r:
            if not row:
                continue
            ws.append(int(row[0]))
            pids.append(int(row[1]))
            X.append([float(v) for v in row[2:10]])
            if row[10] not in LABELS:
                raise ValueError(f"unknown label {row[10]!r}")
            y.append(LABELS.index(row[10]))
            fam.append(row[11])
    if not X:
        return Dataset.empty()
    return Dataset(np.array(X), y, np.array(fam, dtype=object), ws, pids)
