"""Synthetic slides: dark round nuclei on bright glass, with ground truth."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import structlog

from engine.lib.contracts import MANIFEST_SCHEMA
from engine.lib.errors import ConfigError
from engine.lib.rng import seed_for
from engine.m04_postproc.types import InstanceMap
from engine.m06_pipeline.predictors import nucleus_color
from engine.m06_pipeline.tiles import plan_tiles
from engine.m07_persist.binary import save_tensor
from engine.m07_persist.json_store import write_json_atomic

log = structlog.get_logger(__name__)

BACKGROUND = (0.92, 0.86, 0.9)
NOISE = 0.02
MANIFEST_NAME = "manifest.json"
GROUND_TRUTH_NAME = "ground_truth.raw"


@dataclass(frozen=True)
class SyntheticSlide:
    image: np.ndarray
    truth: InstanceMap
    mpp: float

    @property
    def width(self) -> int:
        return int(self.image.shape[1])

    @property
    def height(self) -> int:
        return int(self.image.shape[0])

    def truth_array(self) -> np.ndarray:
        """``(H, W, 2)`` integers: instance id, then class id."""
        types = np.zeros_like(self.truth.labels)
        for inst_id, cls in self.truth.classes.items():
            types[self.truth.labels == inst_id] = cls
        return np.stack([self.truth.labels, types], axis=-1).astype(np.int32)


def _free(occupied: np.ndarray, r: int, c: int, reach: int) -> bool:
    h, w = occupied.shape
    r0, r1 = max(r - reach, 0), min(r + reach + 1, h)
    c0, c1 = max(c - reach, 0), min(c + reach + 1, w)
    return not occupied[r0:r1, c0:c1].any()


def synthesize_slide(
    width: int,
    height: int,
    seed: int = 0,
    *,
    density: float = 4e-4,
    radius_range: tuple[int, int] = (6, 9),
    gap: int = 3,
    num_classes: int = 6,
    mpp: float = 0.25,
    channels: int = 3,
) -> SyntheticSlide:
    """Scatter non-touching discs with random classes ``1 .. num_classes - 1``.

    ``density`` is the number of placement attempts per pixel; discs keep at
    least ``gap`` background pixels between each other.
    """
    lo, hi = radius_range
    if width <= 0 or height <= 0:
        raise ConfigError(f"slide size must be positive, got {width}x{height}")
    if lo < 1 or hi < lo:
        raise ConfigError(f"bad radius range {radius_range}")
    if num_classes < 2 or channels < 3:
        raise ConfigError("need at least one nucleus class and three channels")
    rng = seed_for(seed, "synthetic-slide", width, height)
    image = np.empty((height, width, channels), dtype=np.float32)
    image[...] = np.resize(np.asarray(BACKGROUND, dtype=np.float32), channels)
    image += rng.uniform(-NOISE, NOISE, size=image.shape).astype(np.float32)
    labels = np.zeros((height, width), dtype=np.int32)
    classes: dict[int, int] = {}
    attempts = int(round(density * width * height))
    for _ in range(attempts):
        rad = int(rng.integers(lo, hi + 1))
        r = int(rng.integers(0, height))
        c = int(rng.integers(0, width))
        if not _free(labels, r, c, rad + gap):
            continue
        r0, r1 = max(r - rad, 0), min(r + rad + 1, height)
        c0, c1 = max(c - rad, 0), min(c + rad + 1, width)
        rr, cc = np.mgrid[r0:r1, c0:c1]
        disc = (rr - r) ** 2 + (cc - c) ** 2 <= rad**2
        inst_id = len(classes) + 1
        cls = int(rng.integers(1, num_classes))
        classes[inst_id] = cls
        labels[r0:r1, c0:c1][disc] = inst_id
        color = np.asarray(nucleus_color(cls) + (0.3,) * (channels - 3), dtype=np.float32)
        image[r0:r1, c0:c1][disc] = color
    log.info("slide_synthesized", width=width, height=height, nuclei=len(classes), seed=seed)
    return SyntheticSlide(image=image, truth=InstanceMap(labels=labels, classes=classes), mpp=mpp)


def write_tile_directory(
    slide: SyntheticSlide,
    out_dir: str | Path,
    tile_size: int = 1024,
    overlap: int = 0,
) -> Path:
    """Store the slide as CVTF tiles plus manifest and ground truth; returns the manifest path."""
    root = Path(out_dir)
    grid = plan_tiles(slide.width, slide.height, tile_size, overlap)
    entries = []
    for i, (row, col) in enumerate(grid.tiles):
        r0, c0, r1, c1 = grid.box(i)
        name = f"r{row}_c{col}.raw"
        save_tensor(root / name, slide.image[r0:r1, c0:c1])
        entries.append({"row": row, "col": col, "file": name})
    save_tensor(root / GROUND_TRUTH_NAME, slide.truth_array())
    manifest = {
        "schema": MANIFEST_SCHEMA,
        "wsi_width": slide.width,
        "wsi_height": slide.height,
        "tile_size": tile_size,
        "overlap": overlap,
        "mpp": slide.mpp,
        "tiles": entries,
    }
    path = write_json_atomic(root / MANIFEST_NAME, manifest)
    log.info("tiles_written", path=str(path), tiles=len(entries))
    return path


__all__ = [
    "BACKGROUND",
    "GROUND_TRUTH_NAME",
    "MANIFEST_NAME",
    "SyntheticSlide",
    "synthesize_slide",
    "write_tile_directory",
]
