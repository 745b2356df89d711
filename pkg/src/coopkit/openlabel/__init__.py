"""Label and point cloud file formats plus cross-sensor time matching."""

from coopkit.openlabel.kitti import from_kitti, to_kitti
from coopkit.openlabel.model import Frame, Sequence
from coopkit.openlabel.parser import load_openlabel, save_openlabel
from coopkit.openlabel.pcd import load_pcd, save_pcd
from coopkit.openlabel.sync import MatchReport, match_timestamps

__all__ = [
    "Frame",
    "MatchReport",
    "Sequence",
    "from_kitti",
    "load_openlabel",
    "load_pcd",
    "match_timestamps",
    "save_openlabel",
    "save_pcd",
    "to_kitti",
]
