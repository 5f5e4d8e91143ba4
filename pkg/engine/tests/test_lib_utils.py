from __future__ import annotations

import numpy as np
import pytest

from engine.lib.config import WORKERS_ENV, workers_from_env
from engine.lib.errors import (
    CellVitError,
    ChecksumMismatch,
    ConfigError,
    IoError,
    ShapeMismatch,
    TileFailure,
)
from engine.lib.result import Err, Ok, capture, first_err
from engine.lib.rng import seed_for, seed_sequence
from engine.lib.tensor import as_f32, grad_like, require_same_shape


def test_capture_wraps_values_and_errors() -> None:
    assert capture(lambda: 3) == Ok(3)
    res = capture(lambda: 1 // 0)
    assert isinstance(res, Err)
    assert isinstance(res.error, ZeroDivisionError)


def test_first_err_position() -> None:
    assert first_err([Ok(1), Ok(2)]) is None
    boom = ValueError("boom")
    assert first_err([Ok(1), Err(boom), Err(KeyError())]) == (1, boom)


def test_seed_for_determinism() -> None:
    r1 = seed_for(42, "a", 1)
    r2 = seed_for(42, "a", 1)
    seq1 = [r1.random() for _ in range(3)]
    seq2 = [r2.random() for _ in range(3)]
    assert seq1 == seq2

    r3 = seed_for(42, "a", 2)
    seq3 = [r3.random() for _ in range(3)]
    assert seq1 != seq3
    assert seed_sequence(7, "x").entropy == seed_sequence(7, "x").entropy


def test_workers_from_env(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.delenv(WORKERS_ENV, raising=False)
    assert workers_from_env(4) == 4
    monkeypatch.setenv(WORKERS_ENV, "8")
    assert workers_from_env(1) == 8
    monkeypatch.setenv(WORKERS_ENV, " ")
    assert workers_from_env(2) == 2
    for bad in ("zero", "0", "-3"):
        monkeypatch.setenv(WORKERS_ENV, bad)
        with pytest.raises(ConfigError):
            workers_from_env()


def test_error_hierarchy() -> None:
    assert issubclass(ShapeMismatch, ValueError)
    assert issubclass(ChecksumMismatch, IoError)
    assert issubclass(IoError, OSError)
    failure = TileFailure((960, 0), IoError("unreadable"))
    assert isinstance(failure, CellVitError)
    assert failure.origin == (960, 0)
    assert "(960, 0)" in str(failure)


def test_tensor_helpers() -> None:
    out = as_f32([[1, 2], [3, 4]], rank=2)
    assert out.dtype == np.float32 and out.flags["C_CONTIGUOUS"]
    with pytest.raises(ShapeMismatch):
        as_f32([1, 2], rank=2, name="tile")
    with pytest.raises(ShapeMismatch):
        require_same_shape(np.zeros(2), np.zeros(3), "maps")
    assert grad_like(np.ones(2), np.zeros(2, dtype=np.float32)).dtype == np.float32
    assert grad_like(np.ones(2), np.zeros(2)).dtype == np.float64
