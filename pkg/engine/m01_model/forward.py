from __future__ import annotations

import numpy as np
import structlog

from engine.lib.errors import ShapeMismatch
from engine.lib.tensor import as_f32
from engine.m01_model.bundle import PredictionBundle
from engine.m01_model.config import ModelConfig
from engine.m01_model.decoder import decode
from engine.m01_model.encoder import encode
from engine.m01_model.tokens import embed
from engine.m01_model.weights import Weights

log = structlog.get_logger(__name__)


def forward(image: np.ndarray, weights: Weights, cfg: ModelConfig) -> PredictionBundle:
    """embed -> encode -> decode for one ``(H, W, C)`` image."""
    img = as_f32(image, rank=3, name="image")
    if img.shape[-1] != cfg.in_channels:
        raise ShapeMismatch(f"expected {cfg.in_channels} channels, got {img.shape[-1]}")
    seq = embed(img, weights, cfg)
    final, skips = encode(seq, weights, cfg)
    bundle = decode(skips, img, weights, cfg, final=final)
    log.debug("forward", height=img.shape[0], width=img.shape[1], tokens=seq.tokens.shape[0])
    return bundle


class ModelPredictor:
    """Predictor backed by network weights."""

    def __init__(self, weights: Weights, cfg: ModelConfig) -> None:
        self._weights = weights
        self._cfg = cfg

    @property
    def token_size(self) -> int:
        return self._cfg.patch_size

    @property
    def config(self) -> ModelConfig:
        return self._cfg

    def predict(self, tile: np.ndarray) -> PredictionBundle:
        return forward(tile, self._weights, self._cfg)


__all__ = ["ModelPredictor", "forward"]
