"""Predictors that do not need trained weights."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from engine.lib.errors import NonDivisibleInput
from engine.m01_model.bundle import PredictionBundle
from engine.m04_postproc.hovernet import majority_vote_types
from engine.m04_postproc.targets import bundle_from_instances
from engine.m04_postproc.types import InstanceMap

_FOUR_CONNECTED = ndimage.generate_binary_structure(2, 1)

# synthetic nuclei are painted with red below this level; glass is brighter
NUCLEUS_RED_MAX = 0.5
CLASS_GREEN_BASE = 0.05
CLASS_GREEN_STEP = 0.1


def nucleus_color(class_id: int) -> tuple[float, float, float]:
    return (0.25, CLASS_GREEN_BASE + CLASS_GREEN_STEP * class_id, 0.3)


class OraclePredictor:
    """Reads nuclei straight off a synthetic tile and returns their ideal head outputs.

    Foreground is every pixel with red below :data:`NUCLEUS_RED_MAX`, nuclei are
    its 4-connected components and the class is encoded in the green channel.
    Token vectors are per-footprint channel means.
    """

    def __init__(
        self, token_size: int = 16, num_classes: int = 6, n_rays: int | None = None
    ) -> None:
        self._token_size = token_size
        self._num_classes = num_classes
        self._n_rays = n_rays

    @property
    def token_size(self) -> int:
        return self._token_size

    def predict(self, tile: np.ndarray) -> PredictionBundle:
        h, w, c = tile.shape
        p = self._token_size
        if h % p or w % p:
            raise NonDivisibleInput(f"tile {h}x{w} is not a multiple of {p}")
        fg = tile[..., 0] < NUCLEUS_RED_MAX
        labels, _ = ndimage.label(fg, structure=_FOUR_CONNECTED)
        pixel_class = np.rint((tile[..., 1] - CLASS_GREEN_BASE) / CLASS_GREEN_STEP)
        pixel_class = np.clip(pixel_class, 0, self._num_classes - 1).astype(np.int64)
        pixel_class[~fg] = 0
        votes = np.eye(self._num_classes, dtype=np.float32)[pixel_class]
        inst = majority_vote_types(InstanceMap(labels=labels.astype(np.int32)), votes)
        tokens = tile.reshape(h // p, p, w // p, p, c).mean(axis=(1, 3), dtype=np.float64)
        return bundle_from_instances(
            inst,
            self._num_classes,
            n_rays=self._n_rays,
            tokens=tokens.reshape(-1, c).astype(np.float32),
        )


__all__ = ["OraclePredictor", "nucleus_color"]
