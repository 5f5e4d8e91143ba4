from __future__ import annotations

from collections.abc import Sequence

import numpy as np
from scipy import ndimage
from skimage import draw

from engine.m04_postproc.types import InstanceMap, NucleusRecord

# W, NW, N, NE, E, SE, S, SW: clockwise on screen with rows pointing down
_OFFSETS: tuple[tuple[int, int], ...] = (
    (0, -1),
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
)
_DIRECTION = {off: k for k, off in enumerate(_OFFSETS)}


def trace_contour(mask: np.ndarray) -> list[tuple[int, int]]:
    """Moore-neighbour trace of the outer boundary of ``mask``.

    Starts at the topmost, then leftmost, foreground pixel and walks clockwise
    until the first move would repeat. Only the component containing the start
    pixel is traced.
    """
    fg = np.pad(np.asarray(mask, dtype=bool), 1)
    hits = np.argwhere(fg)
    if hits.size == 0:
        return []
    start = (int(hits[0, 0]), int(hits[0, 1]))
    contour = [start]
    cur = start
    back = 0
    first_move: tuple[int, int] | None = None
    for _ in range(4 * len(hits) + 16):
        nxt: tuple[int, int] | None = None
        d = 0
        for k in range(1, 9):
            d = (back + k) % 8
            cand = (cur[0] + _OFFSETS[d][0], cur[1] + _OFFSETS[d][1])
            if fg[cand]:
                nxt = cand
                break
        if nxt is None:
            break
        if cur == start and first_move is not None and nxt == first_move:
            contour.pop()
            break
        if first_move is None:
            first_move = nxt
        prev_off = _OFFSETS[(d - 1) % 8]
        prev = (cur[0] + prev_off[0], cur[1] + prev_off[1])
        back = _DIRECTION[(prev[0] - nxt[0], prev[1] - nxt[1])]
        cur = nxt
        contour.append(cur)
    return [(r - 1, c - 1) for r, c in contour]


def fill_contour(contour: Sequence[tuple[int, int]], shape: tuple[int, int]) -> np.ndarray:
    """Rasterise a pixel contour back to a mask, boundary pixels included."""
    mask = np.zeros(shape, dtype=bool)
    if not contour:
        return mask
    pts = np.asarray(contour, dtype=np.int64)
    rr, cc = draw.polygon(pts[:, 0], pts[:, 1], shape=shape)
    mask[rr, cc] = True
    inside = (pts[:, 0] >= 0) & (pts[:, 0] < shape[0]) & (pts[:, 1] >= 0) & (pts[:, 1] < shape[1])
    mask[pts[inside, 0], pts[inside, 1]] = True
    return mask


def extract_records(inst: InstanceMap, unknown_class: int = 0) -> list[NucleusRecord]:
    """One record per instance id in ascending order, in local coordinates."""
    n = inst.count
    if n == 0:
        return []
    labels = inst.labels
    ids = list(range(1, n + 1))
    slices = ndimage.find_objects(labels, max_label=n)
    centroids = ndimage.center_of_mass(np.ones(labels.shape), labels, ids)
    areas = ndimage.sum_labels(np.ones(labels.shape), labels, ids)
    records: list[NucleusRecord] = []
    for inst_id, box, com, area in zip(ids, slices, centroids, areas, strict=True):
        if box is None:
            continue
        rs, cs = box
        local = labels[box] == inst_id
        contour = tuple((r + rs.start, c + cs.start) for r, c in trace_contour(local))
        records.append(
            NucleusRecord(
                id=inst_id,
                bbox=(rs.start, cs.start, rs.stop - 1, cs.stop - 1),
                centroid=(float(com[0]), float(com[1])),
                contour=contour,
                class_id=inst.class_of(inst_id, unknown_class),
                area=int(area),
            )
        )
    return records


__all__ = ["extract_records", "fill_contour", "trace_contour"]
