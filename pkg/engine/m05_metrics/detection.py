"""Binary detection scores and the per-class breakdown of detected nuclei.

Per-class scores follow the PanNuke evaluation protocol: matched pairs are
split into TP_c, TN_c, FP_c and FN_c for class ``c``, and unmatched detections
enter the denominators as FP_d and FN_d.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass

from engine.m05_metrics.matching import MatchResult


@dataclass(frozen=True)
class DetectionScores:
    precision: float
    recall: float
    f1: float
    empty_convention: bool = False


@dataclass(frozen=True)
class DetectionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __add__(self, other: DetectionCounts) -> DetectionCounts:
        return DetectionCounts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)

    @classmethod
    def of(cls, match: MatchResult) -> DetectionCounts:
        return cls(match.tp, match.fp, match.fn)

    def scores(self) -> DetectionScores:
        if self.tp == 0 and self.fp == 0 and self.fn == 0:
            return DetectionScores(1.0, 1.0, 1.0, empty_convention=True)
        return DetectionScores(
            precision=_ratio(self.tp, self.tp + self.fp),
            recall=_ratio(self.tp, self.tp + self.fn),
            f1=_ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn),
        )


@dataclass(frozen=True)
class ClassCounts:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0
    fp_d: int = 0
    fn_d: int = 0

    def __add__(self, other: ClassCounts) -> ClassCounts:
        return ClassCounts(
            self.tp + other.tp,
            self.tn + other.tn,
            self.fp + other.fp,
            self.fn + other.fn,
            self.fp_d + other.fp_d,
            self.fn_d + other.fn_d,
        )

    def scores(self) -> DetectionScores:
        agree = self.tp + self.tn
        if agree == 0 and self.fp == 0 and self.fn == 0 and self.fp_d == 0 and self.fn_d == 0:
            return DetectionScores(1.0, 1.0, 1.0, empty_convention=True)
        return DetectionScores(
            precision=_ratio(agree, agree + 2 * self.fp + self.fp_d),
            recall=_ratio(agree, agree + 2 * self.fn + self.fn_d),
            f1=_ratio(2 * agree, 2 * agree + 2 * self.fp + 2 * self.fn + self.fp_d + self.fn_d),
        )


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


def detection_scores(match: MatchResult) -> DetectionScores:
    """Precision, recall and F1 of the detections; an empty match scores 1."""
    return DetectionCounts.of(match).scores()


def classification_counts(
    match: MatchResult,
    gt_classes: Mapping[int, int],
    pred_classes: Mapping[int, int],
    class_id: int,
) -> ClassCounts:
    tp = tn = fp = fn = 0
    for pair in match.pairs:
        g = gt_classes.get(pair.gt_id, 0) == class_id
        p = pred_classes.get(pair.pred_id, 0) == class_id
        if g and p:
            tp += 1
        elif not g and not p:
            tn += 1
        elif p:
            fp += 1
        else:
            fn += 1
    return ClassCounts(tp=tp, tn=tn, fp=fp, fn=fn, fp_d=match.fp, fn_d=match.fn)


def classification_scores(
    match: MatchResult,
    gt_classes: Mapping[int, int],
    pred_classes: Mapping[int, int],
    class_id: int,
) -> DetectionScores:
    """Per-class precision, recall and F1 over detected nuclei.

    ``F1_c = 2(TP_c + TN_c) / (2(TP_c + TN_c) + 2FP_c + 2FN_c + FP_d + FN_d)``;
    precision and recall keep the same structure on one side each.
    """
    return classification_counts(match, gt_classes, pred_classes, class_id).scores()


__all__ = [
    "ClassCounts",
    "DetectionCounts",
    "DetectionScores",
    "classification_counts",
    "classification_scores",
    "detection_scores",
]
