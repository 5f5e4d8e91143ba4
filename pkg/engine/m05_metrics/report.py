"""Evaluation report over a set of (ground truth, prediction) instance maps."""

from __future__ import annotations

from collections.abc import Mapping, Sequence

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field, field_validator

from engine.lib.contracts import REPORT_SCHEMA
from engine.lib.errors import ShapeMismatch
from engine.m04_postproc.records import extract_records
from engine.m04_postproc.types import PANNUKE_CLASSES, InstanceMap, class_name
from engine.m05_metrics.detection import (
    ClassCounts,
    DetectionCounts,
    DetectionScores,
    classification_counts,
)
from engine.m05_metrics.matching import match_centroids
from engine.m05_metrics.quality import PQAccumulator, accumulate_result

log = structlog.get_logger(__name__)


class _Unit(BaseModel):
    model_config = ConfigDict(frozen=True)

    @field_validator("*")
    @classmethod
    def _in_unit_range(cls, v: object) -> object:
        if isinstance(v, float) and not 0.0 <= v <= 1.0:
            raise ValueError(f"metric value {v} outside [0, 1]")
        return v


class ClassScores(_Unit):
    pq: float
    dq: float
    sq: float
    precision: float
    recall: float
    f1: float


class DetectionSummary(_Unit):
    precision: float
    recall: float
    f1: float


class MetricReport(BaseModel):
    """Set-level scores.

    ``empty_classes`` names the nucleus classes with no instance on either
    side; they score nothing and are left out of ``mpq``.
    """

    model_config = ConfigDict(frozen=True)

    schema_: str = Field(default=REPORT_SCHEMA, alias="schema")
    images: int
    radius_px: float
    bpq: float
    mpq: float
    per_class: dict[str, ClassScores]
    detection: DetectionSummary
    empty_convention_applied: dict[str, bool]
    empty_classes: list[str] = Field(default_factory=list)

    def to_json_dict(self) -> dict[str, object]:
        return self.model_dump(by_alias=True)


def _summary(s: DetectionScores) -> DetectionSummary:
    return DetectionSummary(precision=s.precision, recall=s.recall, f1=s.f1)


def build_report(
    gts: Sequence[InstanceMap],
    preds: Sequence[InstanceMap],
    num_classes: int,
    radius_px: float,
    names: Mapping[int, str] = PANNUKE_CLASSES,
) -> MetricReport:
    """PQ family from segment matching and F1 family from centroid matching.

    Both families are pooled over the whole set before any ratio is taken.
    """
    if len(gts) != len(preds):
        raise ShapeMismatch(f"{len(gts)} ground-truth maps but {len(preds)} predictions")
    acc = PQAccumulator(num_classes)
    det = DetectionCounts()
    per_class_counts = {c: ClassCounts() for c in range(1, num_classes)}
    for gt, pred in zip(gts, preds, strict=True):
        acc.add(gt, pred)
        match = match_centroids(extract_records(gt), extract_records(pred), radius_px)
        det = det + DetectionCounts.of(match)
        for c in per_class_counts:
            per_class_counts[c] = per_class_counts[c] + classification_counts(
                match, gt.classes, pred.classes, c
            )
    pq = accumulate_result(acc)
    detection = det.scores()
    empty = {"bpq": pq.binary.empty_convention, "detection": detection.empty_convention}
    per_class: dict[str, ClassScores] = {}
    for c, q in pq.per_class.items():
        cls_scores = per_class_counts[c].scores()
        per_class[class_name(c, names)] = ClassScores(
            pq=q.pq,
            dq=q.dq,
            sq=q.sq,
            precision=cls_scores.precision,
            recall=cls_scores.recall,
            f1=cls_scores.f1,
        )
    report = MetricReport(
        images=len(gts),
        radius_px=radius_px,
        bpq=pq.bpq,
        mpq=pq.mpq,
        per_class=per_class,
        detection=_summary(detection),
        empty_convention_applied=empty,
        empty_classes=[class_name(c, names) for c in pq.empty_classes],
    )
    log.info(
        "report_built",
        images=report.images,
        bpq=report.bpq,
        mpq=report.mpq,
        empty_classes=len(report.empty_classes),
    )
    return report


class TissueScores(BaseModel):
    model_config = ConfigDict(frozen=True)

    images: int
    bpq: float
    mpq: float


class TissueBreakdown(BaseModel):
    model_config = ConfigDict(frozen=True)

    per_tissue: dict[str, TissueScores]
    mean_bpq: float
    std_bpq: float
    mean_mpq: float
    std_mpq: float


def tissue_breakdown(
    groups: Mapping[str, tuple[Sequence[InstanceMap], Sequence[InstanceMap]]],
    num_classes: int,
) -> TissueBreakdown:
    """bPQ and mPQ per tissue plus their mean and population standard deviation."""
    per_tissue: dict[str, TissueScores] = {}
    for tissue in sorted(groups):
        gts, preds = groups[tissue]
        acc = PQAccumulator(num_classes)
        for gt, pred in zip(gts, preds, strict=True):
            acc.add(gt, pred)
        res = accumulate_result(acc)
        per_tissue[tissue] = TissueScores(images=len(gts), bpq=res.bpq, mpq=res.mpq)
    bpq = np.array([s.bpq for s in per_tissue.values()], dtype=np.float64)
    mpq = np.array([s.mpq for s in per_tissue.values()], dtype=np.float64)
    if bpq.size == 0:
        return TissueBreakdown(per_tissue={}, mean_bpq=0.0, std_bpq=0.0, mean_mpq=0.0, std_mpq=0.0)
    return TissueBreakdown(
        per_tissue=per_tissue,
        mean_bpq=float(bpq.mean()),
        std_bpq=float(bpq.std()),
        mean_mpq=float(mpq.mean()),
        std_mpq=float(mpq.std()),
    )


__all__ = [
    "ClassScores",
    "DetectionSummary",
    "MetricReport",
    "TissueBreakdown",
    "TissueScores",
    "build_report",
    "tissue_breakdown",
]
