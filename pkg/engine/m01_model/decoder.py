"""U-shaped decoder from token skips and an image stem to pixel maps.

With ``S = log2(P)`` stages, the final tokens are upsampled x2 per stage.
Stages 1..3 (when not the last) fuse a shared skip built from the tokens of
blocks 3L/4, 2L/4 and L/4, each brought to the stage resolution by that many
deconvolution blocks. The last stage fuses a two-convolution stem computed on
the input image. Each branch ends with a 1x1 head.
"""

from __future__ import annotations

import numpy as np

from engine.lib.errors import ShapeMismatch
from engine.m01_model.bundle import PredictionBundle
from engine.m01_model.config import ModelConfig
from engine.m01_model.encoder import SkipFeatures, tissue_logits
from engine.m01_model.layers import batch_norm, conv3x3, deconv2x, linear, relu, softmax
from engine.m01_model.tokens import TokenSequence
from engine.m01_model.weights import Weights

_SKIP_LEVEL = {1: 2, 2: 1, 3: 0}


def _conv_bn_relu(x: np.ndarray, weights: Weights, conv: str, bn: str, eps: float) -> np.ndarray:
    return relu(batch_norm(conv3x3(x, weights, conv), weights, bn, eps))


def stem(image: np.ndarray, weights: Weights, cfg: ModelConfig) -> np.ndarray:
    x = _conv_bn_relu(image, weights, "stem.conv1", "stem.bn1", cfg.bn_eps)
    return _conv_bn_relu(x, weights, "stem.conv2", "stem.bn2", cfg.bn_eps)


def skip_path(skips: SkipFeatures, weights: Weights, cfg: ModelConfig, stage: int) -> np.ndarray:
    x = skips.levels[_SKIP_LEVEL[stage]]
    for t in range(1, stage + 1):
        p = f"skip{stage}.block{t}"
        x = deconv2x(x, weights, f"{p}.up")
        x = _conv_bn_relu(x, weights, f"{p}.conv", f"{p}.bn", cfg.bn_eps)
    return x


def _branch(
    name: str,
    bottleneck: np.ndarray,
    shared: dict[int, np.ndarray],
    stem_map: np.ndarray,
    weights: Weights,
    cfg: ModelConfig,
) -> np.ndarray:
    eps = cfg.bn_eps
    n_stages = cfg.n_stages
    if n_stages == 0:
        x = np.concatenate([bottleneck, stem_map], axis=-1)
        x = _conv_bn_relu(x, weights, f"{name}.fuse0", f"{name}.fuse0.bn", eps)
        return linear(x, weights, f"{name}.head")
    x = bottleneck
    for s in range(1, n_stages + 1):
        x = deconv2x(x, weights, f"{name}.up{s}")
        parts = [x]
        if s in shared:
            parts.append(shared[s])
        if s == n_stages:
            parts.append(stem_map)
        if len(parts) > 1:
            x = np.concatenate(parts, axis=-1)
        x = _conv_bn_relu(x, weights, f"{name}.fuse{s}", f"{name}.fuse{s}.bn", eps)
    return linear(x, weights, f"{name}.head")


def decode(
    skips: SkipFeatures,
    image: np.ndarray,
    weights: Weights,
    cfg: ModelConfig,
    *,
    final: TokenSequence,
) -> PredictionBundle:
    """Turn encoder skips and the input image into dense head outputs.

    ``final`` supplies the class token for the tissue head and the patch
    tokens returned as embeddings.
    """
    gh, gw = skips.grid
    p = cfg.patch_size
    if image.shape[:2] != (gh * p, gw * p):
        raise ShapeMismatch(f"image {image.shape[:2]} does not match token grid {skips.grid}")
    if final.grid != skips.grid:
        raise ShapeMismatch(f"final tokens on grid {final.grid}, skips on {skips.grid}")
    bottleneck = skips.deepest
    stem_map = stem(image, weights, cfg)
    shared = {
        s: skip_path(skips, weights, cfg, s)
        for s in range(1, cfg.n_stages + 1)
        if cfg.has_token_skip(s)
    }
    outputs = {
        name: _branch(name, bottleneck, shared, stem_map, weights, cfg)
        for name in cfg.branch_channels()
    }
    star_pd = star_rd = None
    if "pd" in outputs:
        star_pd = (1.0 / (1.0 + np.exp(-outputs["pd"][..., 0]))).astype(np.float32)
        star_rd = relu(outputs["rd"]).astype(np.float32)
    return PredictionBundle(
        np_map=softmax(outputs["np"]).astype(np.float32),
        hv_map=np.clip(outputs["hv"], -1.0, 1.0).astype(np.float32),
        nt_map=softmax(outputs["nt"]).astype(np.float32),
        tissue_logits=tissue_logits(final, weights),
        tokens_final=np.ascontiguousarray(final.patch_tokens, dtype=np.float32),
        pd_map=star_pd,
        rd_map=star_rd,
    )


__all__ = ["decode", "skip_path", "stem"]
