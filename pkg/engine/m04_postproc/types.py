from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field, replace

import numpy as np

from engine.lib.errors import BadRayCount, ShapeMismatch

PANNUKE_CLASSES: dict[int, str] = {
    0: "Unknown",
    1: "Neoplastic",
    2: "Inflammatory",
    3: "Connective",
    4: "Dead",
    5: "Epithelial",
}


def class_name(class_id: int, names: Mapping[int, str] = PANNUKE_CLASSES) -> str:
    return names.get(class_id, f"class_{class_id}")


@dataclass(frozen=True)
class InstanceMap:
    """Integer label image (0 = background) with one class per instance id."""

    labels: np.ndarray
    classes: Mapping[int, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.labels.ndim != 2:
            raise ShapeMismatch(f"labels must be 2-D, got {self.labels.shape}")

    @property
    def count(self) -> int:
        return int(self.labels.max()) if self.labels.size else 0

    @property
    def shape(self) -> tuple[int, int]:
        return (int(self.labels.shape[0]), int(self.labels.shape[1]))

    def ids(self) -> list[int]:
        return list(range(1, self.count + 1))

    def class_of(self, inst_id: int, default: int = 0) -> int:
        return int(self.classes.get(inst_id, default))

    def is_contiguous(self) -> bool:
        present = np.unique(self.labels)
        present = present[present > 0]
        return bool(np.array_equal(present, np.arange(1, self.count + 1)))

    def with_classes(self, classes: Mapping[int, int]) -> InstanceMap:
        return replace(self, classes=dict(classes))

    @classmethod
    def empty(cls, shape: tuple[int, int]) -> InstanceMap:
        return cls(labels=np.zeros(shape, dtype=np.int32), classes={})


@dataclass(frozen=True)
class StarPolygonSet:
    """Candidate star-convex polygons, one per candidate pixel.

    ``radii`` is ``(M, K)`` along rays at angles ``2*pi*k/K``; ``refined``
    optionally holds externally refined distances of the same shape.
    """

    centers: np.ndarray
    probs: np.ndarray
    radii: np.ndarray
    shape: tuple[int, int]
    refined: np.ndarray | None = None

    def __post_init__(self) -> None:
        m = self.centers.shape[0]
        if self.centers.shape != (m, 2) or self.probs.shape != (m,):
            raise ShapeMismatch("centers must be (M, 2) and probs (M,)")
        if self.radii.ndim != 2 or self.radii.shape[0] != m:
            raise ShapeMismatch(f"radii must be (M, K), got {self.radii.shape}")
        if self.radii.shape[1] < 3:
            raise BadRayCount(f"need at least 3 rays, got {self.radii.shape[1]}")
        if np.any(self.radii < 0):
            raise ValueError("radial distances must be non-negative")
        if self.refined is not None and self.refined.shape != self.radii.shape:
            raise ShapeMismatch("refined distances must match radii")

    @property
    def n_rays(self) -> int:
        return int(self.radii.shape[1])

    def __len__(self) -> int:
        return int(self.centers.shape[0])


@dataclass(frozen=True)
class NucleusRecord:
    """One detected nucleus.

    Coordinates are ``(row, col)``; ``bbox`` is ``(r0, c0, r1, c1)`` inclusive.
    ``contour`` is the clockwise outer boundary starting at the topmost, then
    leftmost, boundary pixel. ``tile`` is the origin of the producing tile.
    """

    id: int
    bbox: tuple[int, int, int, int]
    centroid: tuple[float, float]
    contour: tuple[tuple[int, int], ...]
    class_id: int
    area: int
    embedding: np.ndarray | None = None
    tile: tuple[int, int] = (0, 0)

    def shifted(self, d_row: int, d_col: int) -> NucleusRecord:
        r0, c0, r1, c1 = self.bbox
        return replace(
            self,
            bbox=(r0 + d_row, c0 + d_col, r1 + d_row, c1 + d_col),
            centroid=(self.centroid[0] + d_row, self.centroid[1] + d_col),
            contour=tuple((r + d_row, c + d_col) for r, c in self.contour),
        )


__all__ = [
    "InstanceMap",
    "NucleusRecord",
    "PANNUKE_CLASSES",
    "StarPolygonSet",
    "class_name",
]
