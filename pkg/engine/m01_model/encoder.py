from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from engine.lib.errors import ShapeMismatch
from engine.m01_model.config import ModelConfig
from engine.m01_model.layers import attention, gelu, layer_norm, linear
from engine.m01_model.tokens import TokenSequence
from engine.m01_model.weights import Weights


@dataclass(frozen=True)
class SkipFeatures:
    """Patch-token grids ``(H/P, W/P, D)`` after blocks L/4, 2L/4, 3L/4 and L.

    The class token is not part of any level.
    """

    levels: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]

    @property
    def grid(self) -> tuple[int, int]:
        gh, gw = self.levels[0].shape[:2]
        return gh, gw

    @property
    def deepest(self) -> np.ndarray:
        return self.levels[3]


def tokens_to_grid(seq: TokenSequence) -> np.ndarray:
    """Drop the class token and fold the patch tokens into ``(gh, gw, D)``."""
    gh, gw = seq.grid
    return seq.patch_tokens.reshape(gh, gw, seq.tokens.shape[1])


def transformer_block(z: np.ndarray, weights: Weights, cfg: ModelConfig, index: int) -> np.ndarray:
    p = f"blocks.{index}"
    eps = cfg.ln_eps
    h = layer_norm(z, weights[f"{p}.norm1.gain"], weights[f"{p}.norm1.bias"], eps)
    z = z + attention(h, weights, f"{p}.attn", cfg.heads)
    h = layer_norm(z, weights[f"{p}.norm2.gain"], weights[f"{p}.norm2.bias"], eps)
    h = linear(gelu(linear(h, weights, f"{p}.mlp.fc1")), weights, f"{p}.mlp.fc2")
    return (z + h).astype(np.float32)


def encode(
    seq: TokenSequence, weights: Weights, cfg: ModelConfig
) -> tuple[TokenSequence, SkipFeatures]:
    """Run the transformer blocks; return all N+1 final tokens and the four skip grids."""
    tokens = seq.tokens
    if tokens.ndim != 2 or tokens.shape[1] != cfg.embed_dim:
        raise ShapeMismatch(f"tokens must be (N+1, {cfg.embed_dim}), got {tokens.shape}")
    gh, gw = seq.grid
    if tokens.shape[0] != gh * gw + 1:
        raise ShapeMismatch(f"{tokens.shape[0]} tokens do not fit grid {seq.grid} plus one")
    wanted = set(cfg.skip_depths)
    captured: list[np.ndarray] = []
    z = tokens
    for i in range(cfg.depth):
        z = transformer_block(z, weights, cfg, i)
        if i + 1 in wanted:
            captured.append(tokens_to_grid(TokenSequence(tokens=z, grid=seq.grid)))
    final = TokenSequence(tokens=z, grid=seq.grid)
    skips = SkipFeatures(levels=(captured[0], captured[1], captured[2], captured[3]))
    return final, skips


def tissue_logits(final: TokenSequence, weights: Weights) -> np.ndarray:
    """Linear tissue classifier on the final class token."""
    return linear(final.class_token, weights, "tissue_head").astype(np.float32)


def tissue_probabilities(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max()
    e = np.exp(shifted.astype(np.float64))
    return (e / e.sum()).astype(np.float32)


__all__ = [
    "SkipFeatures",
    "encode",
    "tissue_logits",
    "tissue_probabilities",
    "tokens_to_grid",
    "transformer_block",
]
