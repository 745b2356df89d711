"""Gated one-to-one assignment shared by tracking and evaluation."""

from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment


def gated_assignment(cost: np.ndarray, gate: float) -> list[tuple[int, int]]:
    """Optimal matching under a hard cost gate.

    Entries above ``gate`` are treated as forbidden. Among assignments
    using only allowed pairs, the result has maximum cardinality and,
    within that, minimum total cost: forbidden entries are priced high
    enough that dropping one real match can never pay off.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.size == 0:
        return []
    n, m = cost.shape
    big = gate * (min(n, m) + 1) * 10.0 + 10.0
    padded = np.where(cost <= gate, cost, big)
    rows, cols = linear_sum_assignment(padded)
    return [(int(r), int(c)) for r, c in zip(rows, cols) if cost[r, c] <= gate]
