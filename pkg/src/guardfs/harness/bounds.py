"""Analytic buffering and expected-loss bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class ThroughputModel:
    delta: float  # underlay throughput, bytes/s
    epsilon: float  # encryption rate, bytes/s
    beta: float = 0.0  # throughput of all malicious processes, bytes/s
    T: float = 5.0  # seconds

    def __post_init__(self):
        for name in ("delta", "epsilon", "beta", "T"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0")


@dataclass(frozen=True)
class BufferBound:
    literal: float  # min(δ,ε) + min(δ,β)·T, summed exactly as printed (mixed units)
    product: float  # (min(δ,ε) + min(δ,β))·T, bytes; the bound the tests hold the gate to


def buffer_bound(m: ThroughputModel) -> BufferBound:
    a = min(m.delta, m.epsilon)
    b = min(m.delta, m.beta)
    return BufferBound(literal=a + b * m.T, product=(a + b) * m.T)


def expected_loss(m: ThroughputModel) -> float:
    """Mean bytes lost when encryption starts uniformly inside a monitoring window."""
    return min(m.delta, m.epsilon) * m.T * 0.5
