from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EvalReport:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.total if self.total else 0.0

    @property
    def precision(self) -> float:
        d = self.tp + self.fp
        return self.tp / d if d else 0.0

    @property
    def recall(self) -> float:
        d = self.tp + self.fn
        return self.tp / d if d else 0.0

    @property
    def f1(self) -> float:
        d = 2 * self.tp + self.fp + self.fn
        return 2 * self.tp / d if d else 0.0

    def confusion(self) -> list[list[int]]:
        """Rows are the true class (benign, malicious), columns the prediction."""
        return [[self.tn, self.fp], [self.fn, self.tp]]

    def summary(self) -> str:
        return (f"accuracy={self.accuracy:.4f} precision={self.precision:.4f} recall={self.recall:.4f} "
                f"f1={self.f1:.4f} tp={self.tp} tn={self.tn} fp={self.fp} fn={self.fn}")


def report_from_predictions(y_true, y_pred) -> EvalReport:
    t = np.asarray(y_true, dtype=int)
    p = np.asarray(y_pred, dtype=int)
    if len(t) != len(p):
        raise ValueError("length mismatch")
    return EvalReport(
        tp=int(np.sum((t == 1) & (p == 1))),
        tn=int(np.sum((t == 0) & (p == 0))),
        fp=int(np.sum((t == 0) & (p == 1))),
        fn=int(np.sum((t == 1) & (p == 0))),
    )


def evaluate(model, X, y) -> EvalReport:
    X = np.asarray(X, dtype=float)
    if len(X) == 0:
        raise ValueError("empty test set")
    return report_from_predictions(y, model.predict_proba(X) >= 0.5)


def per_family_recall(model, ds) -> dict[str, float]:
    """Recall on the malicious vectors of each family in `ds`."""
    out = {}
    for fam in sorted(set(ds.families[ds.y == 1])):
        sub = ds.subset(np.flatnonzero((ds.families == fam) & (ds.y == 1)))
        out[fam] = evaluate(model, sub.X, sub.y).recall
    return out


def unseen_family_recall(train_fn, ds) -> dict[str, float]:
    """Leave-one-family-out: for each malicious family, train on every other
    vector (all benign ones included) and report recall on the held-out family.

    `train_fn(X, y)` returns a fitted model.
    """
    out = {}
    for fam in sorted(set(ds.families[ds.y == 1])):
        held = ds.families == fam
        model = train_fn(ds.X[~held], ds.y[~held])
        sub = ds.subset(np.flatnonzero(held & (ds.y == 1)))
        out[fam] = evaluate(model, sub.X, sub.y).recall
    return out
