"""Per-nucleus embeddings from the final encoder tokens."""

from __future__ import annotations

import numpy as np

from engine.lib.errors import ShapeMismatch
from engine.m04_postproc.types import InstanceMap


def token_footprints(inst: InstanceMap, token_size: int) -> dict[int, np.ndarray]:
    """Row-major indices of the tokens whose footprint holds at least one pixel of a nucleus."""
    h, w = inst.shape
    if h % token_size or w % token_size:
        raise ShapeMismatch(f"labels {h}x{w} do not tile into {token_size}-px tokens")
    gw = w // token_size
    rr, cc = np.nonzero(inst.labels)
    if rr.size == 0:
        return {}
    tok = (rr // token_size) * gw + cc // token_size
    n_tok = (h // token_size) * gw
    codes = np.unique(inst.labels[rr, cc].astype(np.int64) * n_tok + tok)
    ids, toks = np.divmod(codes, n_tok)
    split = np.flatnonzero(np.diff(ids)) + 1
    return {
        int(group_ids[0]): group_toks
        for group_ids, group_toks in zip(np.split(ids, split), np.split(toks, split), strict=True)
    }


def associate_embeddings(
    inst: InstanceMap, tokens_final: np.ndarray, token_size: int
) -> dict[int, np.ndarray]:
    """Unweighted mean of the token vectors each nucleus touches.

    ``tokens_final`` is ``(N, D)`` in row-major token order without the class
    token. The mean is taken in float64 and returned as float32.
    """
    h, w = inst.shape
    n_expected = (h // token_size) * (w // token_size)
    if tokens_final.ndim != 2 or tokens_final.shape[0] != n_expected:
        raise ShapeMismatch(f"expected {n_expected} tokens, got {tokens_final.shape}")
    table = tokens_final.astype(np.float64)
    return {
        inst_id: table[toks].mean(axis=0).astype(np.float32)
        for inst_id, toks in token_footprints(inst, token_size).items()
    }


__all__ = ["associate_embeddings", "token_footprints"]
