"""Dataset utilities: splitting, statistics, and synthetic scenes."""

from .split import SplitAssignment, stratified_split
from .stats import StatsReport, compute_stats
from .synth import (
    GROUND_Z,
    GnssImuSample,
    Occluder,
    SynthScene,
    SynthSceneConfig,
    synth_scene,
)

__all__ = [
    "GROUND_Z",
    "GnssImuSample",
    "Occluder",
    "SplitAssignment",
    "StatsReport",
    "SynthScene",
    "SynthSceneConfig",
    "compute_stats",
    "stratified_split",
    "synth_scene",
]
