"""Shared fixtures builders for the test suite."""

from __future__ import annotations

import math

import numpy as np

from coopkit.geometry import CATEGORIES, Box3D
from coopkit.openlabel import Frame, Sequence

WEATHER = ("sunny", "rainy", "cloudy", "foggy")
TIME_OF_DAY = ("day", "night", "dusk")


def random_box(
    rng: np.random.Generator,
    track_id: int | None = None,
    category: str | None = None,
    with_score: bool = False,
) -> Box3D:
    attrs = {}
    if rng.random() < 0.7:
        attrs["num_lidar_points"] = int(rng.integers(0, 500))
    if rng.random() < 0.3:
        attrs["weather"] = str(rng.choice(WEATHER))
    if rng.random() < 0.2:
        attrs["occluded"] = bool(rng.random() < 0.5)
    return Box3D(
        rng.uniform(-70, 70, 3),
        rng.uniform(0.5, 12.0, 3),
        float(rng.uniform(-math.pi, math.pi)),
        category=category if category is not None else str(rng.choice(CATEGORIES)),
        track_id=track_id,
        score=float(rng.uniform(0, 1)) if with_score else None,
        attributes=attrs,
    )


def random_sequence(rng: np.random.Generator, n_frames: int | None = None) -> Sequence:
    if n_frames is None:
        n_frames = int(rng.integers(1, 8))
    seq = Sequence(
        id=f"seq-{rng.integers(0, 10**6)}",
        metadata={"schema_version": "1.0.0", "name": "random"},
    )
    # Category is a property of the track, so fix it per id up front.
    track_pool = {tid: str(rng.choice(CATEGORIES)) for tid in range(int(rng.integers(1, 9)))}
    t0 = int(rng.integers(0, 10**9))
    for i in range(n_frames):
        frame = Frame(index=i, timestamp=t0 + i * 100_000 + int(rng.integers(-500, 500)))
        for tid, category in track_pool.items():
            if rng.random() < 0.7:
                frame.boxes.append(
                    random_box(rng, track_id=tid, category=category, with_score=rng.random() < 0.5)
                )
        seq.frames.append(frame)
    return seq


def boxes_equal(a: Box3D, b: Box3D, tol: float = 1e-9) -> bool:
    yaw_err = abs(math.remainder(a.yaw - b.yaw, 2.0 * math.pi))
    score_ok = (a.score is None) == (b.score is None) and (
        a.score is None or abs(a.score - b.score) <= tol
    )
    return (
        bool(np.allclose(a.center, b.center, atol=tol))
        and bool(np.allclose(a.dimensions, b.dimensions, atol=tol))
        and yaw_err <= tol
        and a.category == b.category
        and a.track_id == b.track_id
        and score_ok
        and a.attributes == b.attributes
    )


def sequences_equal(a: Sequence, b: Sequence, tol: float = 1e-9) -> bool:
    if len(a.frames) != len(b.frames):
        return False
    for fa, fb in zip(a.frames, b.frames):
        if fa.index != fb.index or fa.timestamp != fb.timestamp:
            return False
        if len(fa.boxes) != len(fb.boxes):
            return False
        if not all(boxes_equal(x, y, tol) for x, y in zip(fa.boxes, fb.boxes)):
            return False
    return True


def eval_box(x, y, category="car", score=None, track_id=None, points=None, z=0.8):
    attrs = {} if points is None else {"num_lidar_points": points}
    return Box3D(
        center=np.array([x, y, z]),
        dimensions=np.array([4.5, 1.9, 1.6]),
        yaw=0.0,
        category=category,
        score=score,
        track_id=track_id,
        attributes=attrs,
    )


# Oracle: the same protocol written with naive data structures, kept
# deliberately free of numpy so shared bugs are unlikely.


def oracle_ap_bev(preds, gts, threshold, min_recall=0.1, min_precision=0.1):
    n_gt = sum(len(f) for f in gts)
    if n_gt == 0:
        return None
    order = sorted(
        ((box.score, fi, box) for fi, frame in enumerate(preds) for box in frame),
        key=lambda item: -item[0],
    )
    used = set()
    flags = []
    for _, fi, pred in order:
        best, best_d = None, None
        for gi, gt in enumerate(gts[fi]):
            if (fi, gi) in used:
                continue
            d = (
                (pred.center[0] - gt.center[0]) ** 2
                + (pred.center[1] - gt.center[1]) ** 2
            ) ** 0.5
            if best_d is None or d < best_d:
                best, best_d = gi, d
        if best is not None and best_d <= threshold:
            used.add((fi, best))
            flags.append(1)
        else:
            flags.append(0)
    recalls, precisions = [], []
    tp = fp = 0
    for flag in flags:
        tp += flag
        fp += 1 - flag
        recalls.append(tp / n_gt)
        precisions.append(tp / (tp + fp))
    def precision_at(r):
        # Piecewise linear through the PR points; a recall value hit by
        # several points (false-positive runs) reads as its last, lowest
        # precision, and the segment to the next point starts there.
        if not recalls:
            return 0.0
        if r < recalls[0]:
            return precisions[0]
        if r > recalls[-1]:
            return 0.0
        for k in range(len(recalls) - 1, -1, -1):
            if recalls[k] == r:
                return precisions[k]
            if recalls[k] < r:
                lo, hi = recalls[k], recalls[k + 1]
                w = (r - lo) / (hi - lo)
                return precisions[k] * (1 - w) + precisions[k + 1] * w
        return precisions[0]

    total = 0.0
    count = 0
    for i in range(101):
        r = i / 100.0
        if r <= min_recall:
            continue
        count += 1
        total += max(precision_at(r) - min_precision, 0.0)
    return total / count / (1.0 - min_precision)


def random_ap_instance(rng, max_boxes=5):
    n_gt = int(rng.integers(1, max_boxes + 1))
    n_pred = int(rng.integers(0, max_boxes + 1))
    n_frames = int(rng.integers(1, 4))
    gts = [[] for _ in range(n_frames)]
    preds = [[] for _ in range(n_frames)]
    for _ in range(n_gt):
        fi = int(rng.integers(0, n_frames))
        gts[fi].append(eval_box(*rng.uniform(-10, 10, size=2)))
    for _ in range(n_pred):
        fi = int(rng.integers(0, n_frames))
        x, y = rng.uniform(-10, 10, size=2)
        preds[fi].append(eval_box(x, y, score=float(rng.uniform(0.01, 1.0))))
    return preds, gts
