from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _word(obj: object) -> int:
    return int.from_bytes(hashlib.blake2b(repr(obj).encode("utf-8"), digest_size=8).digest(), "big")


def seed_sequence(seed: int, *ids: object) -> np.random.SeedSequence:
    """Entropy ``[seed, blake2b(repr(id)) for id in ids]`` as a numpy seed sequence."""
    return np.random.SeedSequence([seed & _MASK64, *(_word(obj) for obj in ids)])


def seed_for(seed: int, *ids: object) -> np.random.Generator:
    """Return a PCG64 generator keyed on ``seed`` and the given identifiers.

    The same ``(seed, *ids)`` always yields the same stream, independent of the
    order in which other streams were created.
    """
    return np.random.Generator(np.random.PCG64(seed_sequence(seed, *ids)))


__all__ = ["seed_for", "seed_sequence"]
