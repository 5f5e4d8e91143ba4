"""Sliding-window tile planning over a whole-slide image."""

from __future__ import annotations

from dataclasses import dataclass

from engine.lib.config import TilingDefaults
from engine.lib.errors import ConfigError, OverlapTooLarge

_D = TilingDefaults()

Box = tuple[int, int, int, int]


def _positions(length: int, tile: int, stride: int) -> list[int]:
    if length <= tile:
        return [0]
    out = list(range(0, length - tile, stride))
    last = length - tile
    if not out or out[-1] != last:
        out.append(last)
    return out


@dataclass(frozen=True)
class TileGrid:
    """Tile origins in raster order; edge tiles are shifted inward to stay full size.

    Boxes are ``(r0, c0, r1, c1)`` with exclusive ends.
    """

    wsi_width: int
    wsi_height: int
    tile_size: int
    overlap: int
    tiles: tuple[tuple[int, int], ...]

    @property
    def stride(self) -> int:
        return self.tile_size - self.overlap

    def __len__(self) -> int:
        return len(self.tiles)

    def index_of(self, origin: tuple[int, int]) -> int:
        return self.tiles.index(origin)

    def box(self, index: int) -> Box:
        r, c = self.tiles[index]
        r1 = min(r + self.tile_size, self.wsi_height)
        c1 = min(c + self.tile_size, self.wsi_width)
        return (r, c, r1, c1)

    def shared_zones(self, index: int) -> list[Box]:
        """Intersections of tile ``index`` with every other tile it overlaps."""
        a = self.box(index)
        zones: list[Box] = []
        for j in range(len(self.tiles)):
            if j == index:
                continue
            b = self.box(j)
            r0, c0 = max(a[0], b[0]), max(a[1], b[1])
            r1, c1 = min(a[2], b[2]), min(a[3], b[3])
            if r0 < r1 and c0 < c1:
                zones.append((r0, c0, r1, c1))
        return zones

    def interior_edges(self, index: int) -> tuple[bool, bool, bool, bool]:
        """Which of the top, left, bottom and right tile edges lie inside the slide."""
        r0, c0, r1, c1 = self.box(index)
        return (r0 > 0, c0 > 0, r1 < self.wsi_height, c1 < self.wsi_width)


def plan_tiles(
    wsi_width: int,
    wsi_height: int,
    tile_size: int = _D.tile_size,
    overlap: int = _D.overlap,
) -> TileGrid:
    if tile_size <= 0 or overlap < 0:
        raise ConfigError("tile size must be positive and overlap non-negative")
    if overlap >= tile_size:
        raise OverlapTooLarge(f"overlap {overlap} must be smaller than tile size {tile_size}")
    if wsi_width <= 0 or wsi_height <= 0:
        raise ConfigError(f"slide size must be positive, got {wsi_width}x{wsi_height}")
    stride = tile_size - overlap
    rows = _positions(wsi_height, tile_size, stride)
    cols = _positions(wsi_width, tile_size, stride)
    return TileGrid(
        wsi_width=wsi_width,
        wsi_height=wsi_height,
        tile_size=tile_size,
        overlap=overlap,
        tiles=tuple((r, c) for r in rows for c in cols),
    )


@dataclass(frozen=True)
class PixelCount:
    tiles: int
    processed_px: int
    wsi_px: int
    ideal_redundancy: float

    @property
    def redundancy(self) -> float:
        return self.processed_px / self.wsi_px


def pixel_redundancy(
    wsi_width: int, wsi_height: int, tile_size: int, overlap: int
) -> PixelCount:
    """Pixels pushed through the network for one tiling, and the ``(T / stride)^2`` limit."""
    grid = plan_tiles(wsi_width, wsi_height, tile_size, overlap)
    processed = 0
    for i in range(len(grid)):
        r0, c0, r1, c1 = grid.box(i)
        processed += (r1 - r0) * (c1 - c0)
    return PixelCount(
        tiles=len(grid),
        processed_px=processed,
        wsi_px=wsi_width * wsi_height,
        ideal_redundancy=(tile_size / grid.stride) ** 2,
    )


__all__ = ["Box", "PixelCount", "TileGrid", "pixel_redundancy", "plan_tiles"]
