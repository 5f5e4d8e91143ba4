from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from engine.lib.errors import NonDivisibleInput, ShapeMismatch
from engine.lib.tensor import as_f32
from engine.m01_model.config import ModelConfig
from engine.m01_model.weights import Weights


@dataclass(frozen=True)
class TokenSequence:
    """Class token followed by patch tokens in row-major grid order."""

    tokens: np.ndarray
    grid: tuple[int, int]

    @property
    def class_token(self) -> np.ndarray:
        return self.tokens[0]

    @property
    def patch_tokens(self) -> np.ndarray:
        return self.tokens[1:]


def patchify(image: np.ndarray, patch_size: int) -> np.ndarray:
    """Split ``(H, W, C)`` into ``(N, P*P*C)`` rows, patches in raster order.

    Each row lists the patch pixels row by row with channels innermost.
    """
    img = as_f32(image, rank=3, name="image")
    h, w, c = img.shape
    p = patch_size
    if h % p or w % p:
        raise NonDivisibleInput(f"image {h}x{w} is not divisible by patch size {p}")
    gh, gw = h // p, w // p
    blocks = img.reshape(gh, p, gw, p, c).transpose(0, 2, 1, 3, 4)
    return np.ascontiguousarray(blocks.reshape(gh * gw, p * p * c))


def interpolate_pos_table(table: np.ndarray, grid: tuple[int, int]) -> np.ndarray:
    """Resample the spatial part of a positional table to ``grid``.

    The table is ``(g*g + 1, D)`` with the class entry first; that entry is
    kept as is. The spatial entries are resized bilinearly with corners
    aligned, so corner entries survive exactly. Equal sizes return a copy.
    """
    n, d = table.shape
    g = math.isqrt(n - 1)
    if g * g != n - 1:
        raise ShapeMismatch(f"positional table with {n - 1} spatial entries is not square")
    gh, gw = grid
    cls_entry = table[:1]
    spatial = table[1:].reshape(g, g, d)
    if (gh, gw) == (g, g):
        return np.array(table, dtype=np.float32, copy=True)
    if g == 1:
        resized = np.broadcast_to(spatial, (gh, gw, d))
    else:
        resized = ndimage.zoom(
            spatial.astype(np.float64),
            (gh / g, gw / g, 1.0),
            order=1,
            mode="nearest",
            grid_mode=False,
        )
        if resized.shape[:2] != (gh, gw):
            raise ShapeMismatch(f"resize produced {resized.shape[:2]}, wanted {(gh, gw)}")
    return np.concatenate([cls_entry, resized.reshape(gh * gw, d)], axis=0).astype(np.float32)


def embed(image: np.ndarray, weights: Weights, cfg: ModelConfig) -> TokenSequence:
    """Project patches, prepend the class token and add positions."""
    if image.shape[-1] != cfg.in_channels:
        raise ShapeMismatch(f"expected {cfg.in_channels} channels, got {image.shape[-1]}")
    patches = patchify(image, cfg.patch_size)
    gh, gw = image.shape[0] // cfg.patch_size, image.shape[1] // cfg.patch_size
    projected = patches @ weights["patch_embed.weight"] + weights["patch_embed.bias"]
    tokens = np.concatenate([weights["cls_token"][None, :], projected], axis=0)
    tokens = tokens + interpolate_pos_table(weights["pos_embed"], (gh, gw))
    return TokenSequence(tokens=tokens.astype(np.float32), grid=(gh, gw))


__all__ = ["TokenSequence", "embed", "interpolate_pos_table", "patchify"]
