"""Instance separation from foreground probabilities and distance maps.

Touching nuclei show up as sharp jumps in the horizontal and vertical distance
maps. Pixels where the normalised Sobel response is strong are cut from the
foreground to leave one marker per nucleus, and a marker-controlled watershed
grows the markers back over the foreground.
"""

from __future__ import annotations

import numpy as np
import structlog
from scipy import ndimage
from skimage import segmentation

from engine.lib.errors import ShapeMismatch
from engine.lib.sobel import sobel_h, sobel_v
from engine.m01_model.bundle import PredictionBundle
from engine.m04_postproc.params import HoverNetParams
from engine.m04_postproc.types import InstanceMap

log = structlog.get_logger(__name__)

_FOUR_CONNECTED = ndimage.generate_binary_structure(2, 1)

# ties with the edge threshold resolve the same way whatever the float noise
EDGE_DECIMALS = 6


def _unit_range(x: np.ndarray) -> np.ndarray:
    lo = float(x.min())
    hi = float(x.max())
    if hi <= lo:
        return np.zeros_like(x)
    return (x - lo) / (hi - lo)


def edge_strength(hv_map: np.ndarray) -> np.ndarray:
    """``max(|S_x|, |S_y|)`` with each response min-max scaled to [0, 1].

    Values are rounded to :data:`EDGE_DECIMALS` places.
    """
    s_x = _unit_range(np.abs(sobel_h(hv_map[..., 0])))
    s_y = _unit_range(np.abs(sobel_v(hv_map[..., 1])))
    return np.round(np.maximum(s_x, s_y), EDGE_DECIMALS)


def _drop_small(labels: np.ndarray, min_px: int) -> np.ndarray:
    """Zero every label with fewer than ``min_px`` pixels."""
    if min_px <= 1 or not labels.any():
        return labels
    small = np.bincount(labels.ravel()) < min_px
    small[0] = False
    if not small.any():
        return labels
    return np.where(small[labels], 0, labels)


def _seed_orphans(markers: np.ndarray, foreground: np.ndarray) -> np.ndarray:
    """Turn every foreground component without a marker into a marker of its own."""
    comps, n = ndimage.label(foreground, structure=_FOUR_CONNECTED)
    if n == 0:
        return markers
    seeded = np.bincount(comps[markers > 0], minlength=n + 1) > 0
    orphan = ~seeded
    orphan[0] = False
    if not orphan.any():
        return markers
    next_id = np.zeros(n + 1, dtype=np.int64)
    next_id[orphan] = int(markers.max()) + np.arange(1, int(orphan.sum()) + 1)
    return np.where(orphan[comps], next_id[comps], markers)


def hovernet_separate(
    bundle: PredictionBundle, params: HoverNetParams | None = None
) -> InstanceMap:
    """Split the thresholded foreground into instances by marker-controlled watershed.

    A foreground component left without any marker after small markers are
    dropped becomes one instance of its own.
    """
    p = params or HoverNetParams()
    if bundle.np_map.shape[:2] != bundle.hv_map.shape[:2]:
        raise ShapeMismatch(
            f"np_map {bundle.np_map.shape[:2]} and hv_map {bundle.hv_map.shape[:2]} differ"
        )
    foreground = bundle.foreground >= p.np_thresh
    if not foreground.any():
        return InstanceMap.empty(bundle.shape)

    edges = edge_strength(bundle.hv_map.astype(np.float64))
    energy = np.where(foreground, 1.0 - edges, 0.0)

    seeds = foreground & (edges < p.edge_thresh)
    markers, _ = ndimage.label(seeds, structure=_FOUR_CONNECTED)
    markers = _seed_orphans(_drop_small(markers, p.min_marker_px), foreground)

    flooded = segmentation.watershed(-energy, markers=markers, mask=foreground, connectivity=1)
    flooded = _drop_small(flooded, p.min_instance_px)
    labels, _, _ = segmentation.relabel_sequential(flooded)
    inst = InstanceMap(labels=labels.astype(np.int32), classes={})
    log.debug("hovernet_separate", instances=inst.count, foreground=int(foreground.sum()))
    return inst


def majority_vote_types(
    inst: InstanceMap, nt_map: np.ndarray, unknown_class: int = 0
) -> InstanceMap:
    """Assign each instance its most frequent non-background pixel class.

    Ties go to the lower class id; instances whose pixels all vote background
    get ``unknown_class``.
    """
    if nt_map.shape[:2] != inst.shape:
        raise ShapeMismatch(f"nt_map {nt_map.shape[:2]} does not match labels {inst.shape}")
    n = inst.count
    if n == 0:
        return inst.with_classes({})
    n_classes = nt_map.shape[-1]
    votes = np.argmax(nt_map, axis=-1)
    mask = inst.labels > 0
    tally = np.bincount(
        inst.labels[mask].astype(np.int64) * n_classes + votes[mask],
        minlength=(n + 1) * n_classes,
    ).reshape(n + 1, n_classes)
    classes: dict[int, int] = {}
    for inst_id in range(1, n + 1):
        counts = tally[inst_id, 1:]
        if counts.size == 0 or counts.max() == 0:
            classes[inst_id] = unknown_class
        else:
            classes[inst_id] = int(np.argmax(counts)) + 1
    return inst.with_classes(classes)


__all__ = ["edge_strength", "hovernet_separate", "majority_vote_types"]
