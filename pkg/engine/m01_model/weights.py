"""Tensor inventory of the network and deterministic initialization.

Names are dotted paths (``blocks.3.attn.qkv.weight``). Each tensor draws from
its own generator keyed on ``(seed, name)`` so adding a tensor never shifts the
values of the others.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np

from engine.lib.errors import ShapeMismatch
from engine.lib.rng import seed_for
from engine.m01_model.config import ModelConfig
from engine.m07_persist.binary import load_weights as _load_tensors
from engine.m07_persist.binary import save_weights as _save_tensors

Init = Literal["uniform", "zeros", "ones"]
Weights = Mapping[str, np.ndarray]


@dataclass(frozen=True)
class TensorSpec:
    shape: tuple[int, ...]
    init: Init
    fan_in: int = 1


def _norm(specs: dict[str, TensorSpec], prefix: str, width: int) -> None:
    specs[f"{prefix}.gain"] = TensorSpec((width,), "ones")
    specs[f"{prefix}.bias"] = TensorSpec((width,), "zeros")


def _batch_norm(specs: dict[str, TensorSpec], prefix: str, width: int) -> None:
    _norm(specs, prefix, width)
    specs[f"{prefix}.mean"] = TensorSpec((width,), "zeros")
    specs[f"{prefix}.var"] = TensorSpec((width,), "ones")


def _dense(specs: dict[str, TensorSpec], prefix: str, cin: int, cout: int) -> None:
    specs[f"{prefix}.weight"] = TensorSpec((cin, cout), "uniform", cin)
    specs[f"{prefix}.bias"] = TensorSpec((cout,), "zeros")


def _conv(specs: dict[str, TensorSpec], prefix: str, k: int, cin: int, cout: int) -> None:
    specs[f"{prefix}.weight"] = TensorSpec((k, k, cin, cout), "uniform", k * k * cin)
    specs[f"{prefix}.bias"] = TensorSpec((cout,), "zeros")


def encoder_specs(cfg: ModelConfig) -> dict[str, TensorSpec]:
    d = cfg.embed_dim
    g = cfg.trained_pos_grid
    specs: dict[str, TensorSpec] = {}
    _dense(specs, "patch_embed", cfg.patch_size * cfg.patch_size * cfg.in_channels, d)
    specs["cls_token"] = TensorSpec((d,), "uniform", d)
    specs["pos_embed"] = TensorSpec((g * g + 1, d), "uniform", d)
    for i in range(cfg.depth):
        p = f"blocks.{i}"
        _norm(specs, f"{p}.norm1", d)
        _dense(specs, f"{p}.attn.qkv", d, 3 * d)
        _dense(specs, f"{p}.attn.proj", d, d)
        _norm(specs, f"{p}.norm2", d)
        _dense(specs, f"{p}.mlp.fc1", d, cfg.mlp_ratio * d)
        _dense(specs, f"{p}.mlp.fc2", cfg.mlp_ratio * d, d)
    _dense(specs, "tissue_head", d, cfg.num_tissue_classes)
    return specs


def decoder_specs(cfg: ModelConfig) -> dict[str, TensorSpec]:
    d = cfg.embed_dim
    stem = cfg.stem_channels
    n_stages = cfg.n_stages
    specs: dict[str, TensorSpec] = {}

    _conv(specs, "stem.conv1", 3, cfg.in_channels, stem)
    _batch_norm(specs, "stem.bn1", stem)
    _conv(specs, "stem.conv2", 3, stem, stem)
    _batch_norm(specs, "stem.bn2", stem)

    # token skips are shared by every branch
    for s in range(1, n_stages + 1):
        if not cfg.has_token_skip(s):
            continue
        cin = d
        for t in range(1, s + 1):
            cout = cfg.stage_width(t)
            _conv(specs, f"skip{s}.block{t}.up", 2, cin, cout)
            _conv(specs, f"skip{s}.block{t}.conv", 3, cout, cout)
            _batch_norm(specs, f"skip{s}.block{t}.bn", cout)
            cin = cout

    for branch, out_ch in cfg.branch_channels().items():
        if n_stages == 0:
            _conv(specs, f"{branch}.fuse0", 3, d + stem, stem)
            _batch_norm(specs, f"{branch}.fuse0.bn", stem)
            _dense(specs, f"{branch}.head", stem, out_ch)
            continue
        cin = d
        for s in range(1, n_stages + 1):
            width = cfg.stage_width(s)
            _conv(specs, f"{branch}.up{s}", 2, cin, width)
            fused = width
            if cfg.has_token_skip(s):
                fused += width
            if s == n_stages:
                fused += stem
            _conv(specs, f"{branch}.fuse{s}", 3, fused, width)
            _batch_norm(specs, f"{branch}.fuse{s}.bn", width)
            cin = width
        _dense(specs, f"{branch}.head", cin, out_ch)
    return specs


def weight_specs(cfg: ModelConfig) -> dict[str, TensorSpec]:
    return {**encoder_specs(cfg), **decoder_specs(cfg)}


def init_weights(cfg: ModelConfig, seed: int) -> dict[str, np.ndarray]:
    """Uniform(+-1/sqrt(fan_in)) weights, zero biases, unit norm gains."""
    out: dict[str, np.ndarray] = {}
    for name, spec in weight_specs(cfg).items():
        if spec.init == "zeros":
            out[name] = np.zeros(spec.shape, dtype=np.float32)
        elif spec.init == "ones":
            out[name] = np.ones(spec.shape, dtype=np.float32)
        else:
            bound = 1.0 / np.sqrt(spec.fan_in)
            rng = seed_for(seed, name)
            out[name] = rng.uniform(-bound, bound, size=spec.shape).astype(np.float32)
    return out


def check_weights(weights: Weights, cfg: ModelConfig) -> None:
    """Raise :class:`ShapeMismatch` unless ``weights`` fits ``cfg`` exactly."""
    specs = weight_specs(cfg)
    missing = sorted(set(specs) - set(weights))
    if missing:
        raise ShapeMismatch(f"missing tensors: {missing[:5]}{'...' if len(missing) > 5 else ''}")
    for name, spec in specs.items():
        if tuple(weights[name].shape) != spec.shape:
            raise ShapeMismatch(f"{name}: expected {spec.shape}, got {weights[name].shape}")


def save_model_weights(path: str | Path, weights: Weights) -> Path:
    return _save_tensors(path, weights)


def load_model_weights(path: str | Path, cfg: ModelConfig | None = None) -> dict[str, np.ndarray]:
    tensors = _load_tensors(path)
    if cfg is not None:
        check_weights(tensors, cfg)
    return tensors


__all__ = [
    "TensorSpec",
    "Weights",
    "check_weights",
    "decoder_specs",
    "encoder_specs",
    "init_weights",
    "load_model_weights",
    "save_model_weights",
    "weight_specs",
]
