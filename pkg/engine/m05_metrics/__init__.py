"""Panoptic quality, detection and classification scores."""

from engine.m05_metrics.detection import (
    ClassCounts,
    DetectionCounts,
    DetectionScores,
    classification_counts,
    classification_scores,
    detection_scores,
)
from engine.m05_metrics.matching import (
    MatchedPair,
    MatchResult,
    centroid_radius_px,
    iou_table,
    match_centroids,
    match_segments,
)
from engine.m05_metrics.quality import (
    MultiClassPQ,
    PanopticQuality,
    PQAccumulator,
    multiclass_pq,
    panoptic_quality,
)
from engine.m05_metrics.report import (
    ClassScores,
    MetricReport,
    TissueBreakdown,
    build_report,
    tissue_breakdown,
)

__all__ = [
    "ClassCounts",
    "ClassScores",
    "DetectionCounts",
    "DetectionScores",
    "MatchResult",
    "MatchedPair",
    "MetricReport",
    "MultiClassPQ",
    "PQAccumulator",
    "PanopticQuality",
    "TissueBreakdown",
    "build_report",
    "centroid_radius_px",
    "classification_counts",
    "classification_scores",
    "detection_scores",
    "iou_table",
    "match_centroids",
    "match_segments",
    "multiclass_pq",
    "panoptic_quality",
    "tissue_breakdown",
]
