"""Model files: versioned, self-describing flat text.

Every file starts with ``guardfs-model 1``, names the model kind and lists
the feature columns it was trained on. Floats are written with ``repr`` so a
save/load round trip is exact.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from guardfs.detector.forest import LEAF, ForestModel, Tree
from guardfs.detector.logistic import LogisticModel
from guardfs.detector.threshold import ThresholdModel
from guardfs.telemetry import FEATURE_NAMES

MAGIC = "guardfs-model"
VERSION = 1


class ModelFormatError(ValueError):
    pass


def _floats(xs) -> str:
    return " ".join(repr(float(v)) for v in xs)


def dumps(model) -> str:
    lines = [f"{MAGIC} {VERSION}", f"kind {model.kind}", "features " + ",".join(FEATURE_NAMES)]
    if isinstance(model, ForestModel):
        lines += [f"n_trees {model.n_trees}", f"max_features {model.max_features}", f"seed {model.seed}"]
        for i, t in enumerate(model.trees):
            lines.append(f"tree {i} {t.n_nodes}")
            for j in range(t.n_nodes):
                lines.append(f"{t.feature[j]} {float(t.threshold[j])!r} {t.left[j]} {t.right[j]} {float(t.value[j])!r}")
    elif isinstance(model, LogisticModel):
        lines += ["means " + _floats(model.means), "stds " + _floats(model.stds),
                  "weights " + _floats(model.weights), f"bias {model.bias!r}"]
    elif isinstance(model, ThresholdModel):
        lines += [f"w {model.w!r}", f"e {model.e!r}"]
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    return "\n".join(lines) + "\n"


def save_model(model, path: str | Path) -> None:
    Path(path).write_text(dumps(model), encoding="utf-8")


def _kv(line: str, key: str) -> str:
    k, _, v = line.partition(" ")
    if k != key:
        raise ModelFormatError(f"expected {key!r}, got {line!r}")
    return v


def loads(text: str):
    lines = text.splitlines()
    if len(lines) < 3:
        raise ModelFormatError("truncated model file")
    magic = lines[0].split()
    if len(magic) != 2 or magic[0] != MAGIC:
        raise ModelFormatError("not a guardfs model file")
    if int(magic[1]) != VERSION:
        raise ModelFormatError(f"unsupported model version {magic[1]}")
    kind = _kv(lines[1], "kind")
    features = tuple(_kv(lines[2], "features").split(","))
    if features != FEATURE_NAMES:
        raise ModelFormatError(f"feature schema mismatch: {','.join(features)}")
    d = len(FEATURE_NAMES)
    rest = lines[3:]
    if kind == "forest":
        n_trees = int(_kv(rest[0], "n_trees"))
        mf = int(_kv(rest[1], "max_features"))
        seed = int(_kv(rest[2], "seed"))
        pos = 3
        trees = []
        for i in range(n_trees):
            head = rest[pos].split()
            if head[:2] != ["tree", str(i)]:
                raise ModelFormatError(f"bad tree header {rest[pos]!r}")
            n = int(head[2])
            rows = [r.split() for r in rest[pos + 1:pos + 1 + n]]
            if len(rows) != n:
                raise ModelFormatError("truncated tree")
            pos += 1 + n
            feat = np.array([int(r[0]) for r in rows], dtype=np.int64)
            if np.any((feat != LEAF) & ((feat < 0) | (feat >= d))):
                raise ModelFormatError("split on a feature outside the schema")
            trees.append(Tree(feat, np.array([float(r[1]) for r in rows]),
                              np.array([int(r[2]) for r in rows], dtype=np.int64),
                              np.array([int(r[3]) for r in rows], dtype=np.int64),
                              np.array([float(r[4]) for r in rows])))
        return ForestModel(trees, d, mf, seed)
    if kind == "logistic":
        vals = {}
        for line in rest:
            k, _, v = line.partition(" ")
            vals[k] = v
        m = LogisticModel(np.array([float(v) for v in vals["weights"].split()]), float(vals["bias"]),
                          np.array([float(v) for v in vals["means"].split()]),
                          np.array([float(v) for v in vals["stds"].split()]))
        if not len(m.weights) == len(m.means) == len(m.stds) == d:
            raise ModelFormatError("logistic parameter length mismatch")
        return m
    if kind == "threshold":
        return ThresholdModel(float(_kv(rest[0], "w")), float(_kv(rest[1], "e")))
    raise ModelFormatError(f"unknown model kind {kind!r}")


def load_model(path: str | Path):
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"model file not found: {p}")
    return loads(p.read_text(encoding="utf-8"))


def reference_model_path() -> Path:
    return Path(__file__).resolve().parent.parent / "data" / "reference_model.txt"


def load_reference_model():
    return load_model(reference_model_path())
