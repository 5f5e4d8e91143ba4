from __future__ import annotations

import numpy as np

from engine.lib.errors import ConfigError, DegenerateMax, DomainError, ShapeMismatch
from engine.lib.rng import seed_for


class AliasSampler:
    """Walker's alias method over non-negative weights.

    Only positive weights enter the table, so zero-weight items are never
    returned regardless of rounding in the table construction.
    """

    def __init__(self, weights: np.ndarray) -> None:
        w = np.asarray(weights, dtype=np.float64)
        if w.ndim != 1:
            raise ShapeMismatch(f"weights must be a vector, got shape {w.shape}")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise DomainError("weights must be finite and non-negative")
        support = np.flatnonzero(w > 0)
        if support.size == 0:
            raise DegenerateMax("no positive weight to sample from")
        self._support = support
        self._prob, self._alias = self._build(w[support])

    @staticmethod
    def _build(w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        n = w.size
        scaled = w * (n / w.sum())
        prob = np.ones(n)
        alias = np.arange(n)
        small = [i for i in range(n) if scaled[i] < 1.0]
        large = [i for i in range(n) if scaled[i] >= 1.0]
        while small and large:
            s = small.pop()
            g = large.pop()
            prob[s] = scaled[s]
            alias[s] = g
            # steal from the rich to fill the poor pocket
            scaled[g] -= 1.0 - scaled[s]
            (small if scaled[g] < 1.0 else large).append(g)
        # leftovers are 1 up to rounding
        for i in small + large:
            prob[i] = 1.0
        return prob, alias

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        n_cols = self._prob.size
        cols = rng.integers(0, n_cols, size=n)
        keep = rng.random(n) < self._prob[cols]
        picked = np.where(keep, cols, self._alias[cols])
        return self._support[picked]


def draw_epoch(weights: np.ndarray, n_samples: int | None = None, seed: int = 0) -> list[int]:
    """Draw ``n_samples`` indices with replacement, proportional to ``weights``.

    ``n_samples`` defaults to the number of weights (one epoch).
    """
    w = np.asarray(weights, dtype=np.float64)
    count = w.size if n_samples is None else n_samples
    if count < 0:
        raise ConfigError("n_samples must be non-negative")
    sampler = AliasSampler(w)
    return [int(i) for i in sampler.sample(seed_for(seed, "epoch"), count)]


__all__ = ["AliasSampler", "draw_epoch"]
