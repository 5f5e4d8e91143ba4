from __future__ import annotations

from collections import deque
from collections.abc import Callable, Iterable, Iterator
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Generic, TypeVar

import structlog

from engine.lib.config import TilingDefaults
from engine.lib.errors import ConfigError
from engine.lib.result import Result, capture

T = TypeVar("T")
R = TypeVar("R")

log = structlog.get_logger(__name__)


@dataclass
class TilePool(Generic[T, R]):
    """Bounded thread pool mapping a job over tiles.

    At most ``workers * in_flight_per_worker`` jobs are submitted ahead of the
    consumer, so only that many tile outputs are alive at once. Results come
    back in input order, wrapped in ``Ok``/``Err``. One worker runs inline.
    """

    workers: int = 1
    in_flight_per_worker: int = TilingDefaults().in_flight_per_worker
    _executor: ThreadPoolExecutor | None = field(default=None, init=False, repr=False)

    def __post_init__(self) -> None:
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if self.in_flight_per_worker < 1:
            raise ConfigError("in_flight_per_worker must be >= 1")

    @property
    def window(self) -> int:
        return self.workers * self.in_flight_per_worker

    def __enter__(self) -> TilePool[T, R]:
        if self.workers > 1:
            self._executor = ThreadPoolExecutor(
                max_workers=self.workers, thread_name_prefix="cellvit-tile"
            )
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()

    def close(self) -> None:
        if self._executor is not None:
            self._executor.shutdown(wait=True, cancel_futures=True)
            self._executor = None

    def map(self, job: Callable[[T], R], items: Iterable[T]) -> Iterator[Result[R, Exception]]:
        if self._executor is None:
            for item in items:
                yield capture(lambda item=item: job(item))  # type: ignore[misc]
            return
        pending: deque[Future[Result[R, Exception]]] = deque()
        executor = self._executor
        for item in items:
            pending.append(executor.submit(capture, lambda item=item: job(item)))
            if len(pending) >= self.window:
                yield pending.popleft().result()
        while pending:
            yield pending.popleft().result()


__all__ = ["TilePool"]
