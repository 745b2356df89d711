"""Detection metrics: center-distance mAP and 3D-IoU mAP with difficulty tiers.

The BEV evaluator follows the nuScenes-style protocol: predictions are
ranked by score and greedily matched to the nearest unmatched ground
truth of the same class within a distance gate, one gate per threshold.
Average precision integrates the precision-recall curve sampled at 101
recall points, after discarding the operating region below recall and
precision 0.1 and renormalizing, so a perfect detector scores exactly 1.

The 3D evaluator swaps the match criterion for volumetric IoU and buckets
ground truth into easy / moderate / hard tiers by point count and range.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..geometry import Box3D, iou_3d
from ..geometry.boxes import CATEGORIES

logger = logging.getLogger(__name__)

__all__ = [
    "DEFAULT_IOU_THRESHOLDS",
    "DetectionEvalConfig",
    "DetectionReport",
    "DifficultyReport",
    "DifficultyRule",
    "evaluate_detection_3d",
    "evaluate_detection_bev",
]

# Volumetric overlap expectations scale with object size, so the IoU
# gate does too: loose for pedestrians, strict for buses.
DEFAULT_IOU_THRESHOLDS: dict[str, float] = {
    "pedestrian": 0.1,
    "bicycle": 0.1,
    "motorcycle": 0.1,
    "car": 0.25,
    "van": 0.25,
    "other": 0.25,
    "truck": 0.5,
    "bus": 0.5,
    "trailer": 0.5,
}

_INTERP_POINTS = 101


@dataclass(frozen=True)
class DifficultyRule:
    """Assigns each ground-truth box to easy, moderate, or hard.

    Easy boxes are densely observed and close; hard boxes are sparse or
    distant; everything else is moderate. The point count comes from the
    box attribute ``num_lidar_points`` and is treated as unlimited when
    absent, leaving range as the only criterion.
    """

    easy_min_points: int = 50
    easy_max_range: float = 50.0
    hard_max_points: int = 20
    hard_min_range: float = 100.0

    def classify(self, box: Box3D) -> str:
        points = box.attributes.get("num_lidar_points")
        points = float("inf") if points is None else float(points)
        distance = float(np.hypot(box.center[0], box.center[1]))
        if points > self.easy_min_points and distance <= self.easy_max_range:
            return "easy"
        if points <= self.hard_max_points or distance > self.hard_min_range:
            return "hard"
        return "moderate"


@dataclass(frozen=True)
class DetectionEvalConfig:
    """Knobs shared by both evaluators.

    distance_thresholds: BEV center-distance gates in meters, ascending.
    classes: categories to evaluate; None means every category present
        in the ground truth.
    min_recall / min_precision: lower bounds of the integrated region
        of the precision-recall curve.
    iou_thresholds: per-category 3D-IoU gate for the volumetric mode.
    """

    distance_thresholds: tuple[float, ...] = (0.5, 1.0, 2.0, 4.0)
    classes: tuple[str, ...] | None = None
    min_recall: float = 0.1
    min_precision: float = 0.1
    iou_thresholds: dict[str, float] = field(
        default_factory=lambda: dict(DEFAULT_IOU_THRESHOLDS)
    )
    difficulty: DifficultyRule = field(default_factory=DifficultyRule)

    def __post_init__(self) -> None:
        thresholds = tuple(float(t) for t in self.distance_thresholds)
        if not thresholds:
            raise ValueError("distance_thresholds must not be empty")
        if any(t <= 0 for t in thresholds):
            raise ValueError(f"distance_thresholds must be positive, got {thresholds}")
        if any(b >= a for b, a in zip(thresholds, thresholds[1:])):
            raise ValueError(f"distance_thresholds must be ascending, got {thresholds}")
        object.__setattr__(self, "distance_thresholds", thresholds)
        if not 0.0 <= self.min_recall < 1.0 or not 0.0 <= self.min_precision < 1.0:
            raise ValueError("min_recall and min_precision must lie in [0, 1)")
        if self.classes is not None:
            unknown = set(self.classes) - set(CATEGORIES)
            if unknown:
                raise ValueError(f"unknown classes: {sorted(unknown)}")


@dataclass(frozen=True)
class DetectionReport:
    """Per-class, per-threshold AP table plus the aggregate mean."""

    ap: dict[str, dict[float, float]]
    mean_ap: float
    n_gt: dict[str, int]
    skipped_classes: tuple[str, ...]

    def class_ap(self, category: str) -> float:
        values = self.ap[category]
        return float(np.mean(list(values.values())))

    def to_dict(self) -> dict:
        return {
            "mean_ap": self.mean_ap,
            "ap": {
                cls: {str(t): v for t, v in table.items()}
                for cls, table in self.ap.items()
            },
            "n_gt": dict(self.n_gt),
            "skipped_classes": list(self.skipped_classes),
        }


@dataclass(frozen=True)
class DifficultyReport:
    """3D-IoU results bucketed by ground-truth difficulty."""

    buckets: dict[str, DetectionReport | None]
    average: float

    def to_dict(self) -> dict:
        return {
            "average": self.average,
            "buckets": {
                name: (report.to_dict() if report is not None else None)
                for name, report in self.buckets.items()
            },
        }


def _check_frames(preds: list[list[Box3D]], gts: list[list[Box3D]]) -> None:
    if len(preds) != len(gts):
        raise ValueError(
            f"prediction and ground-truth frame counts differ: "
            f"{len(preds)} vs {len(gts)}"
        )
    for frame in preds:
        for box in frame:
            if box.score is None:
                raise ValueError("every prediction box needs a score")


def _sorted_predictions(
    preds: list[list[Box3D]], category: str
) -> list[tuple[int, Box3D]]:
    flat = [
        (idx, box)
        for idx, frame in enumerate(preds)
        for box in frame
        if box.category == category
    ]
    # Stable sort keeps input order among ties, making results
    # independent of anything but the data.
    flat.sort(key=lambda item: -item[1].score)
    return flat


def _ap_from_curve(
    tp_flags: list[bool], n_gt: int, min_recall: float, min_precision: float
) -> float:
    if n_gt == 0:
        raise ValueError("AP undefined without ground truth")
    if not tp_flags:
        return 0.0
    tp = np.cumsum(np.asarray(tp_flags, dtype=float))
    fp = np.cumsum(~np.asarray(tp_flags, dtype=bool))
    recall = tp / n_gt
    precision = tp / (tp + fp)
    sample_points = np.linspace(0.0, 1.0, _INTERP_POINTS)
    interpolated = np.interp(sample_points, recall, precision, right=0.0)
    # Drop the operating region below the recall floor, subtract the
    # precision floor, and renormalize so the ideal curve integrates to 1.
    kept = interpolated[round((_INTERP_POINTS - 1) * min_recall) + 1 :]
    kept = np.clip(kept - min_precision, 0.0, None)
    return float(np.mean(kept) / (1.0 - min_precision))


def _match_bev(
    ranked: list[tuple[int, Box3D]],
    gts_by_frame: dict[int, list[Box3D]],
    threshold: float,
) -> list[bool]:
    """Greedy nearest-unmatched matching; True per prediction means TP."""
    taken: set[tuple[int, int]] = set()
    flags = []
    for frame_idx, pred in ranked:
        candidates = gts_by_frame.get(frame_idx, [])
        best = None
        best_dist = np.inf
        for gt_idx, gt in enumerate(candidates):
            if (frame_idx, gt_idx) in taken:
                continue
            dist = float(np.hypot(*(pred.center[:2] - gt.center[:2])))
            if dist < best_dist:
                best_dist = dist
                best = gt_idx
        if best is not None and best_dist <= threshold:
            taken.add((frame_idx, best))
            flags.append(True)
        else:
            flags.append(False)
    return flags


def evaluate_detection_bev(
    preds: list[list[Box3D]],
    gts: list[list[Box3D]],
    config: DetectionEvalConfig | None = None,
) -> DetectionReport:
    """Score detections against ground truth by BEV center distance.

    Both arguments are per-frame box lists aligned by index. Classes
    with no ground truth are skipped and reported, not scored as zero.
    """
    config = config or DetectionEvalConfig()
    _check_frames(preds, gts)

    counts: dict[str, int] = {}
    for frame in gts:
        for box in frame:
            counts[box.category] = counts.get(box.category, 0) + 1
    classes = config.classes or tuple(sorted(counts))

    ap: dict[str, dict[float, float]] = {}
    skipped = []
    for category in classes:
        n_gt = counts.get(category, 0)
        if n_gt == 0:
            skipped.append(category)
            logger.info("no ground truth for class %r, skipping", category)
            continue
        gts_by_frame = {
            idx: [b for b in frame if b.category == category]
            for idx, frame in enumerate(gts)
        }
        ranked = _sorted_predictions(preds, category)
        ap[category] = {}
        for threshold in config.distance_thresholds:
            flags = _match_bev(ranked, gts_by_frame, threshold)
            ap[category][threshold] = _ap_from_curve(
                flags, n_gt, config.min_recall, config.min_precision
            )

    cells = [v for table in ap.values() for v in table.values()]
    mean_ap = float(np.mean(cells)) if cells else 0.0
    return DetectionReport(
        ap=ap,
        mean_ap=mean_ap,
        n_gt={c: counts.get(c, 0) for c in classes},
        skipped_classes=tuple(skipped),
    )


def _match_iou(
    ranked: list[tuple[int, Box3D]],
    gts_by_frame: dict[int, list[Box3D]],
    ignored_by_frame: dict[int, list[Box3D]],
    threshold: float,
) -> list[bool | None]:
    """Greedy best-IoU matching; None marks a prediction to discard.

    A prediction overlapping only an out-of-bucket ground-truth box is
    discarded rather than penalized, so detecting a hard object never
    hurts the easy-bucket score.
    """
    taken: set[tuple[int, int]] = set()
    flags: list[bool | None] = []
    for frame_idx, pred in ranked:
        best = None
        best_iou = 0.0
        for gt_idx, gt in enumerate(gts_by_frame.get(frame_idx, [])):
            if (frame_idx, gt_idx) in taken:
                continue
            overlap = iou_3d(pred, gt)
            if overlap > best_iou:
                best_iou = overlap
                best = gt_idx
        if best is not None and best_iou >= threshold:
            taken.add((frame_idx, best))
            flags.append(True)
            continue
        ignored = any(
            iou_3d(pred, gt) >= threshold
            for gt in ignored_by_frame.get(frame_idx, [])
        )
        flags.append(None if ignored else False)
    return flags


def evaluate_detection_3d(
    preds: list[list[Box3D]],
    gts: list[list[Box3D]],
    config: DetectionEvalConfig | None = None,
) -> DifficultyReport:
    """Score detections by 3D IoU, bucketed by ground-truth difficulty.

    Each bucket is evaluated with only its own ground truth; predictions
    that hit ground truth from another bucket are ignored there. The
    average is the mean over buckets that contain any ground truth.
    """
    config = config or DetectionEvalConfig()
    _check_frames(preds, gts)

    tiers = [
        [(config.difficulty.classify(box), box) for box in frame] for frame in gts
    ]
    buckets: dict[str, DetectionReport | None] = {}
    for bucket in ("easy", "moderate", "hard"):
        bucket_gts = [
            [box for tier, box in frame if tier == bucket] for frame in tiers
        ]
        counts: dict[str, int] = {}
        for frame in bucket_gts:
            for box in frame:
                counts[box.category] = counts.get(box.category, 0) + 1
        if not counts:
            logger.info("no ground truth in %s bucket", bucket)
            buckets[bucket] = None
            continue
        classes = config.classes or tuple(sorted(counts))

        ap: dict[str, dict[float, float]] = {}
        skipped = []
        for category in classes:
            n_gt = counts.get(category, 0)
            if n_gt == 0:
                skipped.append(category)
                continue
            threshold = config.iou_thresholds.get(category)
            if threshold is None:
                raise ValueError(f"no IoU threshold configured for {category!r}")
            gts_by_frame = {
                idx: [b for b in frame if b.category == category]
                for idx, frame in enumerate(bucket_gts)
            }
            ignored_by_frame = {
                idx: [
                    box
                    for tier, box in frame
                    if tier != bucket and box.category == category
                ]
                for idx, frame in enumerate(tiers)
            }
            ranked = _sorted_predictions(preds, category)
            flags = _match_iou(ranked, gts_by_frame, ignored_by_frame, threshold)
            kept = [f for f in flags if f is not None]
            ap[category] = {
                threshold: _ap_from_curve(
                    kept, n_gt, config.min_recall, config.min_precision
                )
            }

        cells = [v for table in ap.values() for v in table.values()]
        buckets[bucket] = DetectionReport(
            ap=ap,
            mean_ap=float(np.mean(cells)) if cells else 0.0,
            n_gt={c: counts.get(c, 0) for c in classes},
            skipped_classes=tuple(skipped),
        )

    scored = [r.mean_ap for r in buckets.values() if r is not None]
    average = float(np.mean(scored)) if scored else 0.0
    return DifficultyReport(buckets=buckets, average=average)
