from time import perf_counter_ns
from types import TracebackType
from typing import Optional


class StopWatch:
    """Wall-clock timer used as a context manager."""

    def __init__(self) -> None:
        self._start: int | None = None
        self._elapsed: int | None = None

    def __enter__(self) -> "StopWatch":
        self._start = perf_counter_ns()
        self._elapsed = None
        return self

    def __exit__(
        self,
        exc_type: Optional[type[BaseException]],
        exc_value: Optional[BaseException],
        traceback: Optional[TracebackType],
    ) -> bool:
        if self._start is not None:
            self._elapsed = perf_counter_ns() - self._start
        return False

    @property
    def running(self) -> bool:
        return self._start is not None and self._elapsed is None

    def elapsed_ms(self) -> int:
        if self._start is None:
            raise RuntimeError("stopwatch was never started")
        elapsed = self._elapsed if self._elapsed is not None else perf_counter_ns() - self._start
        return round(elapsed / 1_000_000)
