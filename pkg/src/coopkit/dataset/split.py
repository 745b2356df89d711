"""Stratified train/val/test splitting of labeled sequences.

Splits are built greedily: units (frames, or whole sequences) are handed
out rarest-content-first, each going to the split that most needs its
classes among those with room left. Split sizes come from the largest
remainder method, so they are exact whenever the unit count divides the
ratios evenly. The result records how close each split's class mix came
to the global mix; an infeasible tolerance still yields the best-effort
assignment, just flagged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..openlabel.model import Sequence

__all__ = ["SplitAssignment", "stratified_split"]


@dataclass(frozen=True)
class SplitAssignment:
    """Outcome of a stratified split.

    assignment maps a unit id (frame index or sequence id) to its split.
    divergence is the worst absolute gap between a split's class
    proportion and the global proportion, over non-empty splits.
    """

    assignment: dict[int | str, str]
    sizes: dict[str, int]
    achieved_ratios: dict[str, float]
    class_histograms: dict[str, dict[str, int]]
    divergence: float
    within_tolerance: bool

    def units(self, split: str) -> list[int | str]:
        return [u for u, s in self.assignment.items() if s == split]

    def to_dict(self) -> dict:
        return {
            "assignment": {str(k): v for k, v in self.assignment.items()},
            "sizes": dict(self.sizes),
            "achieved_ratios": dict(self.achieved_ratios),
            "class_histograms": {
                s: dict(h) for s, h in self.class_histograms.items()
            },
            "divergence": self.divergence,
            "within_tolerance": self.within_tolerance,
        }


def _target_sizes(n: int, ratios: dict[str, float]) -> dict[str, int]:
    exact = {name: n * r for name, r in ratios.items()}
    sizes = {name: int(np.floor(v)) for name, v in exact.items()}
    leftover = n - sum(sizes.values())
    remainders = sorted(
        ratios, key=lambda name: exact[name] - sizes[name], reverse=True
    )
    for name in remainders[:leftover]:
        sizes[name] += 1
    return sizes


def stratified_split(
    source: Sequence | list[Sequence],
    ratios: dict[str, float] | None = None,
    tolerance: float = 0.02,
    level: str = "frame",
    seed: int = 0,
) -> SplitAssignment:
    """Partition frames (or sequences) into class-balanced splits.

    ``level="frame"`` splits the frames of one sequence; pass a list of
    sequences with ``level="sequence"`` to keep each sequence intact,
    trading balance for freedom from temporal leakage.
    """
    if ratios is None:
        ratios = {"train": 0.8, "val": 0.1, "test": 0.1}
    if not ratios:
        raise ValueError("ratios must not be empty")
    if any(r <= 0 for r in ratios.values()):
        raise ValueError(f"ratios must be positive, got {ratios}")
    if abs(sum(ratios.values()) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios.values())}")
    if not 0 < tolerance < 1:
        raise ValueError(f"tolerance must lie in (0, 1), got {tolerance}")

    if level == "frame":
        if not isinstance(source, Sequence):
            raise ValueError("frame-level splitting expects a single Sequence")
        unit_ids: list[int | str] = [f.index for f in source.frames]
        unit_boxes = [f.boxes for f in source.frames]
    elif level == "sequence":
        if isinstance(source, Sequence):
            raise ValueError("sequence-level splitting expects a list of Sequences")
        unit_ids = [s.id for s in source]
        unit_boxes = [[b for f in s.frames for b in f.boxes] for s in source]
    else:
        raise ValueError(f"unknown level {level!r}")
    if not unit_ids:
        raise ValueError("nothing to split")

    classes = sorted({b.category for boxes in unit_boxes for b in boxes})
    vectors = [
        {c: sum(1 for b in boxes if b.category == c) for c in classes}
        for boxes in unit_boxes
    ]
    global_counts = {
        c: sum(v[c] for v in vectors) for c in classes
    }
    total_boxes = sum(global_counts.values())

    sizes = _target_sizes(len(unit_ids), ratios)
    split_names = list(ratios)

    # Units carrying rare classes are placed first, while every split
    # still has room to take them; the seed only breaks ties.
    rng = np.random.default_rng(seed)
    order = list(rng.permutation(len(unit_ids)))

    def rarity(idx: int) -> float:
        v = vectors[idx]
        scores = [1.0 / global_counts[c] for c in classes if v[c] > 0]
        return max(scores) if scores else 0.0

    order.sort(key=rarity, reverse=True)

    remaining = dict(sizes)
    counts = {s: {c: 0 for c in classes} for s in split_names}
    assignment: dict[int | str, str] = {}
    for idx in order:
        candidates = [s for s in split_names if remaining[s] > 0]
        v = vectors[idx]

        def need(split: str) -> float:
            # How much this unit's content is still missing from the
            # split, scaled to its share so train does not hoard.
            target = ratios[split]
            return sum(
                v[c] * (target * global_counts[c] - counts[split][c])
                for c in classes
            ) / target

        if any(v.values()):
            best = max(candidates, key=need)
        else:
            best = max(candidates, key=lambda s: remaining[s] / ratios[s])
        assignment[unit_ids[idx]] = best
        remaining[best] -= 1
        for c in classes:
            counts[best][c] += v[c]

    achieved = {s: sizes[s] / len(unit_ids) for s in split_names}
    divergence = 0.0
    feasible = all(sizes[s] > 0 for s in split_names)
    if total_boxes:
        global_prop = {c: global_counts[c] / total_boxes for c in classes}
        for s in split_names:
            n_s = sum(counts[s].values())
            if n_s == 0:
                continue
            for c in classes:
                gap = abs(counts[s][c] / n_s - global_prop[c])
                divergence = max(divergence, gap)

    return SplitAssignment(
        assignment=assignment,
        sizes=sizes,
        achieved_ratios=achieved,
        class_histograms=counts,
        divergence=divergence,
        within_tolerance=feasible and divergence <= tolerance,
    )
