"""Logistic regression by full-batch gradient descent on standardized features."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from guardfs.detector.dataset import require_both_classes


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def loss_and_grad(params: np.ndarray, Xs: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy and its gradient; params = [weights..., bias]."""
    w, b = params[:-1], params[-1]
    z = Xs @ w + b
    # log(1 + e^z) - y*z, written to stay finite for large |z|
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
    r = sigmoid(z) - y
    g = np.empty_like(params)
    g[:-1] = Xs.T @ r / len(y)
    g[-1] = r.mean()
    return loss, g


@dataclass
class LogisticModel:
    weights: np.ndarray
    bias: float
    means: np.ndarray
    stds: np.ndarray
    losses: list[float] = field(default_factory=list)

    kind = "logistic"

    @property
    def n_features(self) -> int:
        return len(self.weights)

    @property
    def final_loss(self) -> float | None:
        return self.losses[-1] if self.losses else None

    def standardize(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        return (X - self.means) / self.stds

    def predict_proba(self, X) -> np.ndarray:
        return sigmoid(self.standardize(X) @ self.weights + self.bias)

    def predict(self, x) -> tuple[str, float]:
        score = float(self.predict_proba(x)[0])
        return ("malicious" if score >= 0.5 else "benign"), score


def standardization(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    means = X.mean(axis=0)
    stds = X.std(axis=0)
    stds[stds == 0] = 1.0
    return means, stds


def train_logistic(X, y, lr: float = 0.5, epochs: int = 2000, seed: int = 0) -> LogisticModel:
    """Gradient descent from zero weights and a prior-matching bias.

    `seed` is accepted for interface symmetry; full-batch descent from a fixed
    start is deterministic anyway.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    require_both_classes(y)
    means, stds = standardization(X)
    Xs = (X - means) / stds
    prior = float(y.mean())
    params = np.zeros(X.shape[1] + 1)
    params[-1] = math.log(prior / (1 - prior))
    losses = []
    for _ in range(epochs):
        loss, g = loss_and_grad(params, Xs, y)
        if not math.isfinite(loss) or not np.all(np.isfinite(g)):
            raise ValueError(f"logistic training diverged (loss={loss}); lower the learning rate (lr={lr})")
        losses.append(loss)
        params = params - lr * g
    if epochs:
        loss, _ = loss_and_grad(params, Xs, y)
        if not math.isfinite(loss):
            raise ValueError(f"logistic training diverged; lower the learning rate (lr={lr})")
        losses.append(loss)
    return LogisticModel(params[:-1].copy(), float(params[-1]), means, stds, losses)
