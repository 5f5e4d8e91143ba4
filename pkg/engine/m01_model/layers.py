"""Inference-only building blocks on channel-last float32 arrays."""

from __future__ import annotations

from collections.abc import Mapping

import numpy as np
from scipy import special

_SQRT1_2 = np.float32(1.0 / np.sqrt(2.0))


def linear(x: np.ndarray, w: Mapping[str, np.ndarray], prefix: str) -> np.ndarray:
    return x @ w[f"{prefix}.weight"] + w[f"{prefix}.bias"]


def layer_norm(x: np.ndarray, gain: np.ndarray, bias: np.ndarray, eps: float) -> np.ndarray:
    mean = x.mean(axis=-1, keepdims=True)
    var = ((x - mean) ** 2).mean(axis=-1, keepdims=True)
    return ((x - mean) / np.sqrt(var + eps)) * gain + bias


def gelu(x: np.ndarray) -> np.ndarray:
    """Exact GELU, ``x * Phi(x)``."""
    return (0.5 * x * (1.0 + special.erf(x * _SQRT1_2))).astype(np.float32)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def batch_norm(x: np.ndarray, w: Mapping[str, np.ndarray], prefix: str, eps: float) -> np.ndarray:
    scale = w[f"{prefix}.gain"] / np.sqrt(w[f"{prefix}.var"] + eps)
    shift = w[f"{prefix}.bias"] - w[f"{prefix}.mean"] * scale
    return (x * scale + shift).astype(np.float32)


def conv3x3(x: np.ndarray, w: Mapping[str, np.ndarray], prefix: str) -> np.ndarray:
    """Same-padded 3x3 convolution of an ``(H, W, Cin)`` map.

    Accumulates nine shifted matrix products instead of materialising the
    im2col buffer, which would be nine times the input size.
    """
    kernel = w[f"{prefix}.weight"]
    h, wd, _ = x.shape
    padded = np.pad(x, ((1, 1), (1, 1), (0, 0)))
    out = np.empty((h, wd, kernel.shape[-1]), dtype=np.float32)
    out[...] = w[f"{prefix}.bias"]
    for dy in range(3):
        for dx in range(3):
            out += padded[dy : dy + h, dx : dx + wd] @ kernel[dy, dx]
    return out


def deconv2x(x: np.ndarray, w: Mapping[str, np.ndarray], prefix: str) -> np.ndarray:
    """2x2 transposed convolution with stride 2: ``(H, W, Cin) -> (2H, 2W, Cout)``."""
    kernel = w[f"{prefix}.weight"]
    h, wd, _ = x.shape
    cout = kernel.shape[-1]
    y = np.einsum("hwc,ijcd->hiwjd", x, kernel, optimize=True)
    return (y.reshape(2 * h, 2 * wd, cout) + w[f"{prefix}.bias"]).astype(np.float32)


def attention(
    x: np.ndarray, w: Mapping[str, np.ndarray], prefix: str, heads: int
) -> np.ndarray:
    """Multi-head self-attention over ``(N, D)`` tokens."""
    n, d = x.shape
    dh = d // heads
    qkv = linear(x, w, f"{prefix}.qkv").reshape(n, 3, heads, dh).transpose(1, 2, 0, 3)
    q, k, v = qkv[0], qkv[1], qkv[2]
    scores = (q @ k.transpose(0, 2, 1)) / np.float32(np.sqrt(dh))
    mixed = softmax(scores, axis=-1) @ v
    merged = mixed.transpose(1, 0, 2).reshape(n, d)
    return linear(merged, w, f"{prefix}.proj")


__all__ = [
    "attention",
    "batch_norm",
    "conv3x3",
    "deconv2x",
    "gelu",
    "layer_norm",
    "linear",
    "relu",
    "softmax",
]
