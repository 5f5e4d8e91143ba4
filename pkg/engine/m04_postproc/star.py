"""Star-convex polygon rasterisation and greedy non-maximum suppression."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import structlog
from skimage import draw

from engine.lib.errors import BadRayCount, ConfigError, ShapeMismatch
from engine.m04_postproc.params import StarParams
from engine.m04_postproc.types import InstanceMap, StarPolygonSet

log = structlog.get_logger(__name__)


def ray_angles(n_rays: int) -> np.ndarray:
    if n_rays < 3:
        raise BadRayCount(f"need at least 3 rays, got {n_rays}")
    return 2.0 * np.pi * np.arange(n_rays) / n_rays


def polygon_vertices(
    center: tuple[float, float], radii: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    theta = ray_angles(len(radii))
    rows = center[0] + radii * np.cos(theta)
    cols = center[1] + radii * np.sin(theta)
    return rows, cols


@dataclass(frozen=True)
class _Patch:
    """A rasterised polygon cropped to its bounding box."""

    r0: int
    c0: int
    mask: np.ndarray

    @property
    def area(self) -> int:
        return int(self.mask.sum())

    def overlap(self, other: _Patch) -> int:
        r0 = max(self.r0, other.r0)
        c0 = max(self.c0, other.c0)
        r1 = min(self.r0 + self.mask.shape[0], other.r0 + other.mask.shape[0])
        c1 = min(self.c0 + self.mask.shape[1], other.c0 + other.mask.shape[1])
        if r0 >= r1 or c0 >= c1:
            return 0
        a = self.mask[r0 - self.r0 : r1 - self.r0, c0 - self.c0 : c1 - self.c0]
        b = other.mask[r0 - other.r0 : r1 - other.r0, c0 - other.c0 : c1 - other.c0]
        return int(np.count_nonzero(a & b))

    def iou(self, other: _Patch) -> float:
        inter = self.overlap(other)
        union = self.area + other.area - inter
        return inter / union if union else 0.0


def _rasterize_patch(
    center: tuple[float, float], radii: np.ndarray, shape: tuple[int, int]
) -> _Patch:
    rows, cols = polygon_vertices(center, np.asarray(radii, dtype=np.float64))
    h, w = shape
    r0 = max(int(np.floor(rows.min())), 0)
    c0 = max(int(np.floor(cols.min())), 0)
    r1 = min(int(np.ceil(rows.max())) + 1, h)
    c1 = min(int(np.ceil(cols.max())) + 1, w)
    cr, cc = int(round(center[0])), int(round(center[1]))
    inside_center = 0 <= cr < h and 0 <= cc < w
    if inside_center:
        r0, c0 = min(r0, cr), min(c0, cc)
        r1, c1 = max(r1, cr + 1), max(c1, cc + 1)
    if r0 >= r1 or c0 >= c1:
        return _Patch(0, 0, np.zeros((0, 0), dtype=bool))
    mask = np.zeros((r1 - r0, c1 - c0), dtype=bool)
    rr, cc_ = draw.polygon(rows - r0, cols - c0, shape=mask.shape)
    mask[rr, cc_] = True
    # a star-convex polygon always contains its centre
    if inside_center:
        mask[cr - r0, cc - c0] = True
    return _Patch(r0, c0, mask)


def rasterize_star_polygon(
    center: tuple[float, float], radii: np.ndarray, shape: tuple[int, int]
) -> np.ndarray:
    """Fill the polygon with vertices ``center + r_k (cos t_k, sin t_k)``.

    Vertex ``k`` lies at angle ``t_k = 2*pi*k/K``; pixels whose centre falls
    inside (even-odd rule) are set, clipped to ``shape``.
    """
    radii = np.asarray(radii, dtype=np.float64)
    if radii.ndim != 1 or radii.size < 3:
        raise BadRayCount(f"need at least 3 rays, got {radii.size}")
    out = np.zeros(shape, dtype=bool)
    patch = _rasterize_patch(center, radii, shape)
    if patch.mask.size:
        h, w = patch.mask.shape
        out[patch.r0 : patch.r0 + h, patch.c0 : patch.c0 + w] |= patch.mask
    return out


def _greedy_nms(
    centers: np.ndarray,
    probs: np.ndarray,
    radii: np.ndarray,
    shape: tuple[int, int],
    prob_thresh: float,
    nms_thresh: float,
) -> InstanceMap:
    order = [int(i) for i in np.argsort(-probs, kind="stable") if probs[i] >= prob_thresh]
    accepted: list[_Patch] = []
    for i in order:
        patch = _rasterize_patch((float(centers[i, 0]), float(centers[i, 1])), radii[i], shape)
        if patch.area == 0:
            continue
        if any(patch.iou(prev) > nms_thresh for prev in accepted):
            continue
        accepted.append(patch)

    labels = np.zeros(shape, dtype=np.int32)
    next_id = 1
    for patch in accepted:
        h, w = patch.mask.shape
        view = labels[patch.r0 : patch.r0 + h, patch.c0 : patch.c0 + w]
        free = patch.mask & (view == 0)
        if not free.any():
            continue
        view[free] = next_id
        next_id += 1
    log.debug("star_nms", candidates=len(order), accepted=len(accepted), instances=next_id - 1)
    return InstanceMap(labels=labels, classes={})


def stardist_nms(
    polys: StarPolygonSet,
    prob_thresh: float = StarParams().prob_thresh,
    nms_thresh: float = StarParams().nms_thresh,
) -> InstanceMap:
    """Greedy NMS by descending probability on rasterised polygon IoU.

    Candidates below ``prob_thresh`` are dropped. Survivors are painted in
    acceptance order and never overwrite earlier pixels.
    """
    return _greedy_nms(
        polys.centers, polys.probs, polys.radii, polys.shape, prob_thresh, nms_thresh
    )


def cppnet_nms(
    polys: StarPolygonSet,
    prob_thresh: float = StarParams().prob_thresh,
    nms_thresh: float = StarParams().nms_thresh,
) -> InstanceMap:
    """Same mechanics as :func:`stardist_nms` on the refined distances."""
    if polys.refined is None:
        raise ConfigError("refined radial distances are required")
    return _greedy_nms(
        polys.centers, polys.probs, polys.refined, polys.shape, prob_thresh, nms_thresh
    )


def star_candidates_from_maps(
    prob: np.ndarray,
    dist: np.ndarray,
    prob_thresh: float = StarParams().prob_thresh,
    refined: np.ndarray | None = None,
) -> StarPolygonSet:
    """Collect pixels with ``prob >= prob_thresh`` into a candidate set."""
    if dist.ndim != 3 or dist.shape[:2] != prob.shape:
        raise ShapeMismatch(f"distance map {dist.shape} does not match probability {prob.shape}")
    if refined is not None and refined.shape != dist.shape:
        raise ShapeMismatch("refined distance map must match the distance map")
    rows, cols = np.nonzero(prob >= prob_thresh)
    return StarPolygonSet(
        centers=np.stack([rows, cols], axis=1).astype(np.int64),
        probs=prob[rows, cols].astype(np.float64),
        radii=dist[rows, cols].astype(np.float64),
        shape=(int(prob.shape[0]), int(prob.shape[1])),
        refined=None if refined is None else refined[rows, cols].astype(np.float64),
    )


__all__ = [
    "cppnet_nms",
    "polygon_vertices",
    "rasterize_star_polygon",
    "ray_angles",
    "star_candidates_from_maps",
    "stardist_nms",
]
