"""Shared oracle helpers: numerical gradient checking and norm-based errors."""

from __future__ import annotations

import numpy as np


def rel_error(a, b) -> float:
    """Norm-based relative error between two gradient estimates."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.linalg.norm(a) + np.linalg.norm(b)
    if denom == 0.0:
        return 0.0
    return float(np.linalg.norm(a - b) / denom)


def matmul_oracle(a, b):
    """Independent triple-loop matrix product."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    out = np.zeros((a.shape[0], b.shape[1]))
    for i in range(a.shape[0]):
        for j in range(b.shape[1]):
            s = 0.0
            for t in range(a.shape[1]):
                s += a[i, t] * b[t, j]
            out[i, j] = s
    return out


def softmax_row_oracle(row):
    """Scalar softmax oracle for a single row, no vectorisation."""
    import math

    m = max(row)
    exps = [math.exp(v - m) for v in row]
    z = sum(exps)
    return [e / z for e in exps]


def cross_entropy_row_oracle(row, target) -> float:
    """Scalar -log softmax(row)[target] via logsumexp."""
    import math

    m = max(row)
    lse = m + math.log(sum(math.exp(v - m) for v in row))
    return lse - row[target]
