from __future__ import annotations

from collections.abc import Callable, Iterable
from dataclasses import dataclass
from typing import Generic, TypeVar, Union

T = TypeVar("T")
E = TypeVar("E")


@dataclass(frozen=True)
class Ok(Generic[T]):
    """A unit of work that finished; ``value`` is its output."""

    value: T


@dataclass(frozen=True)
class Err(Generic[E]):
    """A unit of work that failed; ``error`` is kept instead of being raised."""

    error: E


Result = Union[Ok[T], Err[E]]


def capture(fn: Callable[[], T]) -> Result[T, Exception]:
    """Run ``fn`` and wrap its return value or exception."""
    try:
        return Ok(fn())
    except Exception as exc:  # noqa: BLE001 - workers never let errors escape
        return Err(exc)


def first_err(results: Iterable[Result[T, E]]) -> tuple[int, E] | None:
    """Return ``(position, error)`` of the first failed result, if any."""
    for pos, res in enumerate(results):
        if isinstance(res, Err):
            return pos, res.error
    return None


__all__ = ["Err", "Ok", "Result", "capture", "first_err"]
