from __future__ import annotations

import numpy as np


def shannon_entropy(buffer: bytes | bytearray | memoryview) -> float:
    """Shannon entropy of a byte buffer in bits per byte (0..8).

    Computed over the 256 byte-value frequencies with log base 2. An empty
    buffer has entropy 0.
    """
    n = len(buffer)
    if n == 0:
        return 0.0
    counts = np.bincount(np.frombuffer(buffer, dtype=np.uint8), minlength=256)
    p = counts[counts > 0] / n
    h = float(-(p * np.log2(p)).sum())
    # -0.0 and tiny float overshoot
    return 0.0 if h <= 0.0 else min(h, 8.0)
