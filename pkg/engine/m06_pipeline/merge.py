"""Stitching per-tile records into one slide-level result.

Records are shifted to slide coordinates. A record is marginal when its box
reaches into a region shared with another tile, or when it touches a tile edge
that lies inside the slide (the nucleus was cut off there). Only marginal
records from different tiles are compared. Two full records are duplicates
when their masks overlap with IoU above ``merge_iou``, or when more than
:data:`FRAGMENT_SHARE` of the smaller mask lies inside the other one (a piece
of a nucleus that was split inside one tile). A cut-off record is a duplicate
of any record from another tile it overlaps at all. Of each
duplicate group the first record in ``(cut off, -area, tile index, local id)``
order survives.
"""

from __future__ import annotations

from collections import defaultdict
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field, replace

import numpy as np
import structlog

from engine.lib.config import TilingDefaults
from engine.lib.errors import GridMismatch
from engine.m04_postproc.records import fill_contour
from engine.m04_postproc.types import NucleusRecord
from engine.m06_pipeline.tiles import Box, TileGrid

log = structlog.get_logger(__name__)

_CELL = 64

FRAGMENT_SHARE = 0.5


@dataclass(frozen=True)
class TileOutput:
    """Records of one tile in tile-local coordinates."""

    index: int
    origin: tuple[int, int]
    height: int
    width: int
    records: tuple[NucleusRecord, ...]


@dataclass(frozen=True)
class WsiResult:
    records: tuple[NucleusRecord, ...]
    grid: TileGrid
    config: dict[str, object] = field(default_factory=dict)


@dataclass(frozen=True)
class _Candidate:
    record: NucleusRecord
    tile_index: int
    local_id: int
    cut_off: bool

    @property
    def priority(self) -> tuple[bool, int, int, int]:
        return (self.cut_off, -self.record.area, self.tile_index, self.local_id)


def _boxes_meet(a: tuple[int, int, int, int], b: tuple[int, int, int, int]) -> bool:
    # record boxes are inclusive
    return a[0] <= b[2] and b[0] <= a[2] and a[1] <= b[3] and b[1] <= a[3]


def _reaches(bbox: tuple[int, int, int, int], zone: Box) -> bool:
    # zones have exclusive ends
    return bbox[0] < zone[2] and zone[0] <= bbox[2] and bbox[1] < zone[3] and zone[1] <= bbox[3]


def _touches_inner_edge(out: TileOutput, rec: NucleusRecord, inner: tuple[bool, ...]) -> bool:
    r0, c0, r1, c1 = rec.bbox
    top, left, bottom, right = inner
    return (
        (top and r0 == 0)
        or (left and c0 == 0)
        or (bottom and r1 == out.height - 1)
        or (right and c1 == out.width - 1)
    )


def _masks(a: NucleusRecord, b: NucleusRecord) -> tuple[np.ndarray, np.ndarray]:
    r0 = min(a.bbox[0], b.bbox[0])
    c0 = min(a.bbox[1], b.bbox[1])
    shape = (max(a.bbox[2], b.bbox[2]) - r0 + 1, max(a.bbox[3], b.bbox[3]) - c0 + 1)
    ma = fill_contour([(r - r0, c - c0) for r, c in a.contour], shape)
    mb = fill_contour([(r - r0, c - c0) for r, c in b.contour], shape)
    return ma, mb


def _duplicates(a: _Candidate, b: _Candidate, merge_iou: float) -> bool:
    ma, mb = _masks(a.record, b.record)
    inter = int(np.count_nonzero(ma & mb))
    if a.cut_off or b.cut_off:
        return inter > 0
    union = int(np.count_nonzero(ma | mb))
    if union == 0:
        return False
    smaller = min(int(np.count_nonzero(ma)), int(np.count_nonzero(mb)))
    return inter / union > merge_iou or inter > FRAGMENT_SHARE * smaller


def _cells(bbox: tuple[int, int, int, int]) -> Iterator[tuple[int, int]]:
    for i in range(bbox[0] // _CELL, bbox[2] // _CELL + 1):
        for j in range(bbox[1] // _CELL, bbox[3] // _CELL + 1):
            yield (i, j)


def _check_grid(outputs: Sequence[TileOutput], grid: TileGrid) -> list[TileOutput]:
    if len(outputs) != len(grid):
        raise GridMismatch(f"{len(outputs)} tile outputs for a grid of {len(grid)} tiles")
    ordered = sorted(outputs, key=lambda o: o.index)
    for pos, out in enumerate(ordered):
        if out.index != pos or grid.tiles[pos] != out.origin:
            raise GridMismatch(f"tile output {out.index} at {out.origin} is not in the grid")
    return ordered


def merge_tiles(
    outputs: Sequence[TileOutput],
    grid: TileGrid,
    merge_iou: float = TilingDefaults().merge_iou,
) -> WsiResult:
    ordered = _check_grid(outputs, grid)
    inner_only: list[_Candidate] = []
    marginal: list[_Candidate] = []
    for out in ordered:
        zones = grid.shared_zones(out.index)
        inner = grid.interior_edges(out.index)
        for rec in out.records:
            cut_off = _touches_inner_edge(out, rec, inner)
            moved = replace(rec.shifted(*out.origin), tile=out.origin)
            cand = _Candidate(moved, out.index, rec.id, cut_off)
            if cut_off or any(_reaches(moved.bbox, z) for z in zones):
                marginal.append(cand)
            else:
                inner_only.append(cand)

    accepted: list[_Candidate] = []
    index: dict[tuple[int, int], list[_Candidate]] = defaultdict(list)
    for cand in sorted(marginal, key=lambda c: c.priority):
        seen: set[int] = set()
        clash = False
        for cell in _cells(cand.record.bbox):
            for other in index[cell]:
                key = id(other)
                if key in seen or other.tile_index == cand.tile_index:
                    continue
                seen.add(key)
                if _boxes_meet(cand.record.bbox, other.record.bbox) and _duplicates(
                    cand, other, merge_iou
                ):
                    clash = True
                    break
            if clash:
                break
        if clash:
            continue
        accepted.append(cand)
        for cell in _cells(cand.record.bbox):
            index[cell].append(cand)

    survivors = sorted(inner_only + accepted, key=lambda c: (c.tile_index, c.local_id))
    records = tuple(replace(c.record, id=i) for i, c in enumerate(survivors, start=1))
    log.info(
        "tiles_merged",
        tiles=len(ordered),
        marginal=len(marginal),
        dropped=len(marginal) - len(accepted),
        nuclei=len(records),
    )
    return WsiResult(records=records, grid=grid)


__all__ = ["FRAGMENT_SHARE", "TileOutput", "WsiResult", "merge_tiles"]
