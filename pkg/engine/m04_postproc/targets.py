"""Ideal regression targets derived from a known instance map.

These produce what a perfect network would output: per-instance horizontal
and vertical distance maps, object probabilities and radial distances. They
drive the synthetic fixtures and the oracle predictor.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from engine.lib.errors import BadRayCount
from engine.m01_model.bundle import PredictionBundle
from engine.m04_postproc.types import InstanceMap


def _scale_signed(x: np.ndarray) -> np.ndarray:
    """Scale negative and positive parts separately into [-1, 1]."""
    out = x.astype(np.float64)
    neg = out < 0
    pos = out > 0
    if neg.any():
        out[neg] /= -out[neg].min()
    if pos.any():
        out[pos] /= out[pos].max()
    return out


def hv_maps_from_instances(labels: np.ndarray) -> np.ndarray:
    """Horizontal and vertical offsets to each instance's rounded centroid.

    Returns ``(H, W, 2)`` float32; background is 0.
    """
    hv = np.zeros((*labels.shape, 2), dtype=np.float32)
    n = int(labels.max()) if labels.size else 0
    for inst_id, box in enumerate(ndimage.find_objects(labels, max_label=n), start=1):
        if box is None:
            continue
        local = labels[box] == inst_id
        com_r, com_c = ndimage.center_of_mass(local)
        rr, cc = np.nonzero(local)
        dx = _scale_signed(cc - int(com_c + 0.5))
        dy = _scale_signed(rr - int(com_r + 0.5))
        view = hv[box]
        view[rr, cc, 0] = dx
        view[rr, cc, 1] = dy
    return hv


def object_probability(labels: np.ndarray) -> np.ndarray:
    """Distance to background normalised to 1 at each instance's deepest pixel."""
    prob = np.zeros(labels.shape, dtype=np.float32)
    n = int(labels.max()) if labels.size else 0
    for inst_id, box in enumerate(ndimage.find_objects(labels, max_label=n), start=1):
        if box is None:
            continue
        local = np.pad(labels[box] == inst_id, 1)
        edt = ndimage.distance_transform_edt(local)[1:-1, 1:-1]
        peak = edt.max()
        if peak > 0:
            view = prob[box]
            inside = labels[box] == inst_id
            view[inside] = (edt / peak)[inside]
    return prob


def radial_distances_from_instances(labels: np.ndarray, n_rays: int = 32) -> np.ndarray:
    """Distance from each foreground pixel to its instance boundary along K rays.

    Rays follow ``(cos t_k, sin t_k)`` in ``(row, col)``; each step moves one
    pixel length and the overshoot past the boundary is corrected by half a
    pixel along the dominant axis. Background pixels get 0.
    """
    if n_rays < 3:
        raise BadRayCount(f"need at least 3 rays, got {n_rays}")
    h, w = labels.shape
    out = np.zeros((h, w, n_rays), dtype=np.float32)
    rows, cols = np.nonzero(labels > 0)
    if rows.size == 0:
        return out
    ids = labels[rows, cols]
    limit = max(h, w) + 1
    for k in range(n_rays):
        theta = 2.0 * np.pi * k / n_rays
        dr, dc = np.cos(theta), np.sin(theta)
        t_corr = 1.0 - 0.5 / max(abs(dr), abs(dc))
        dist = np.zeros(rows.size)
        alive = np.ones(rows.size, dtype=bool)
        for step in range(1, limit + 1):
            if not alive.any():
                break
            rr = np.rint(rows + step * dr).astype(np.int64)
            cc = np.rint(cols + step * dc).astype(np.int64)
            inside = (rr >= 0) & (rr < h) & (cc >= 0) & (cc < w)
            same = np.zeros(rows.size, dtype=bool)
            same[inside] = labels[rr[inside], cc[inside]] == ids[inside]
            stopped = alive & ~same
            dist[stopped] = step - t_corr
            alive &= same
        out[rows, cols, k] = dist
    return out


def bundle_from_instances(
    inst: InstanceMap,
    num_classes: int,
    *,
    n_rays: int | None = None,
    tokens: np.ndarray | None = None,
    num_tissue_classes: int = 19,
) -> PredictionBundle:
    """A prediction bundle that exactly encodes ``inst``."""
    labels = inst.labels
    fg = labels > 0
    np_map = np.stack([~fg, fg], axis=-1).astype(np.float32)
    class_img = np.zeros(labels.shape, dtype=np.int64)
    for inst_id, cls in inst.classes.items():
        class_img[labels == inst_id] = cls
    nt_map = np.eye(num_classes, dtype=np.float32)[np.clip(class_img, 0, num_classes - 1)]
    pd_map = rd_map = None
    if n_rays is not None:
        pd_map = object_probability(labels)
        rd_map = radial_distances_from_instances(labels, n_rays)
    return PredictionBundle(
        np_map=np_map,
        hv_map=hv_maps_from_instances(labels),
        nt_map=nt_map,
        tissue_logits=np.zeros(num_tissue_classes, dtype=np.float32),
        tokens_final=tokens if tokens is not None else np.zeros((0, 1), dtype=np.float32),
        pd_map=pd_map,
        rd_map=rd_map,
        rd_refined=rd_map,
    )


def paint_discs(
    shape: tuple[int, int],
    centers: list[tuple[float, float]],
    radii: list[float],
) -> np.ndarray:
    """Label image with disc ``i`` painted as id ``i + 1``; later discs win overlaps."""
    labels = np.zeros(shape, dtype=np.int32)
    rr, cc = np.mgrid[0 : shape[0], 0 : shape[1]]
    for i, ((r, c), rad) in enumerate(zip(centers, radii, strict=True)):
        labels[(rr - r) ** 2 + (cc - c) ** 2 <= rad**2] = i + 1
    return labels


__all__ = [
    "bundle_from_instances",
    "hv_maps_from_instances",
    "object_probability",
    "paint_discs",
    "radial_distances_from_instances",
]
