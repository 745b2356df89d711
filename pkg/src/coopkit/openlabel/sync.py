"""Pairing vehicle and infrastructure captures by timestamp."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class MatchReport:
    """Nearest-neighbor pairing of two timestamp streams.

    ``pairs`` holds (vehicle index, infrastructure index). Delta statistics
    are in microseconds; the signed delta is vehicle minus infrastructure,
    so a positive mean means the vehicle sensor lags.
    """

    pairs: list[tuple[int, int]] = field(default_factory=list)
    unmatched_vehicle: list[int] = field(default_factory=list)
    mean_abs_delta_us: float = 0.0
    mean_signed_delta_us: float = 0.0
    max_abs_delta_us: int = 0


def match_timestamps(
    vehicle_ts: list[int] | np.ndarray,
    infra_ts: list[int] | np.ndarray,
    max_delta_us: int,
) -> MatchReport:
    """Match each vehicle frame to the nearest infrastructure frame in time.

    Pairs farther apart than ``max_delta_us`` are rejected and the vehicle
    index recorded as unmatched. Infrastructure frames may pair with more
    than one vehicle frame when the streams run at different rates.
    """
    v = np.asarray(vehicle_ts, dtype=np.int64)
    t = np.asarray(infra_ts, dtype=np.int64)
    report = MatchReport()
    if len(v) == 0 or len(t) == 0:
        report.unmatched_vehicle = list(range(len(v)))
        return report

    order = np.argsort(t, kind="stable")
    t_sorted = t[order]
    pos = np.searchsorted(t_sorted, v)
    deltas = []
    for vi, p in enumerate(pos):
        candidates = [c for c in (p - 1, p) if 0 <= c < len(t_sorted)]
        best = min(candidates, key=lambda c: abs(int(v[vi]) - int(t_sorted[c])))
        delta = int(v[vi]) - int(t_sorted[best])
        if abs(delta) > max_delta_us:
            report.unmatched_vehicle.append(vi)
            continue
        report.pairs.append((vi, int(order[best])))
        deltas.append(delta)
    if deltas:
        arr = np.array(deltas, dtype=np.int64)
        report.mean_abs_delta_us = float(np.mean(np.abs(arr)))
        report.mean_signed_delta_us = float(np.mean(arr))
        report.max_abs_delta_us = int(np.max(np.abs(arr)))
    return report
