"""Detection and tracking metrics."""

from .detection import (
    DEFAULT_IOU_THRESHOLDS,
    DetectionEvalConfig,
    DetectionReport,
    DifficultyReport,
    DifficultyRule,
    evaluate_detection_3d,
    evaluate_detection_bev,
)
from .tracking import TrackingEvalReport, evaluate_tracking

__all__ = [
    "DEFAULT_IOU_THRESHOLDS",
    "DetectionEvalConfig",
    "DetectionReport",
    "DifficultyReport",
    "DifficultyRule",
    "TrackingEvalReport",
    "evaluate_detection_3d",
    "evaluate_detection_bev",
    "evaluate_tracking",
]
