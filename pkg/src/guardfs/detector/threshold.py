"""Interpretable baseline: flag (writes >= w) and (e_mean >= e)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from guardfs.detector.dataset import require_both_classes
from guardfs.telemetry import FEATURE_NAMES

_W = FEATURE_NAMES.index("writes")
_E = FEATURE_NAMES.index("e_mean")


@dataclass(frozen=True)
class ThresholdModel:
    w: float
    e: float

    kind = "threshold"
    n_features = len(FEATURE_NAMES)

    def predict_proba(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        return ((X[:, _W] >= self.w) & (X[:, _E] >= self.e)).astype(float)

    def predict(self, x) -> tuple[str, float]:
        score = float(self.predict_proba(x)[0])
        return ("malicious" if score >= 0.5 else "benign"), score


def _cuts(values: np.ndarray) -> np.ndarray:
    u = np.unique(values)
    mids = (u[:-1] + u[1:]) / 2.0
    return np.concatenate([u[:1], mids])


def _f1(pred: np.ndarray, y: np.ndarray) -> float:
    tp = int(np.sum(pred & (y == 1)))
    fp = int(np.sum(pred & (y == 0)))
    fn = int(np.sum(~pred & (y == 1)))
    return 0.0 if tp == 0 else 2 * tp / (2 * tp + fp + fn)


def train_threshold_baseline(X, y, max_candidates: int = 64) -> ThresholdModel:
    """Grid search over observed cut points maximizing train F1.

    Ties go to the higher entropy cut, then the higher write count, which
    keeps the rule as conservative as the data allows.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    require_both_classes(y)
    ws = np.unique(X[:, _W])
    if len(ws) > max_candidates:
        ws = np.unique(np.quantile(X[:, _W], np.linspace(0, 1, max_candidates), method="lower"))
    es = _cuts(X[:, _E])
    if len(es) > 4 * max_candidates:
        es = _cuts(np.quantile(X[:, _E], np.linspace(0, 1, 4 * max_candidates)))
    best = None
    for e in es:
        hi_e = X[:, _E] >= e
        for w in ws:
            score = _f1(hi_e & (X[:, _W] >= w), y)
            key = (score, e, w)
            if best is None or key > best:
                best = key
    return ThresholdModel(float(best[2]), float(best[1]))
