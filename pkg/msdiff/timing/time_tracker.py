import csv
from pathlib import Path
from types import TracebackType
from typing import Optional, Sequence

from typing_extensions import override

from msdiff.timing.stopwatch import StopWatch


class TimeTracker:
    """Collects ``task,elapsed_ms`` rows and writes them as CSV on exit.

    Nested task names are joined with ``|`` and always start with the base
    task, e.g. ``simulate|integrate``.
    """

    def __init__(self, csv_path: Path | None, base_task: str) -> None:
        # may be set by a command once its output directory is known
        self.csv_path = csv_path
        self._base_task = base_task
        self._rows: list[tuple[str, int]] = []

    def __enter__(self) -> "TimeTracker":
        self._rows.clear()
        return self

    def __exit__(
        self,
        exc_type: Optional[type[BaseException]],
        exc_value: Optional[BaseException],
        traceback: Optional[TracebackType],
    ) -> bool:
        self.write()
        return False

    @property
    def rows(self) -> list[tuple[str, int]]:
        return list(self._rows)

    def _qualify(self, task: Sequence[str]) -> str:
        if not task or task[0] != self._base_task:
            task = [self._base_task, *task]
        return "|".join(task)

    def task(self, *task: str) -> "TimeTrackerWatch":
        return TimeTrackerWatch(self, self._qualify(task))

    def save_time_ms(self, task: Sequence[str] | str, elapsed_ms: int) -> None:
        name = task if isinstance(task, str) else self._qualify(task)
        self._rows.append((name, elapsed_ms))

    def write(self) -> None:
        if self.csv_path is None or not self.csv_path.parent.exists():
            return
        with open(self.csv_path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(("task", "elapsed_ms"))
            writer.writerows(self._rows)


class TimeTrackerWatch(StopWatch):
    def __init__(self, time_tracker: TimeTracker, task: str) -> None:
        super().__init__()
        self._time_tracker = time_tracker
        self._task = task

    @override
    def __exit__(
        self,
        exc_type: Optional[type[BaseException]],
        exc_value: Optional[BaseException],
        traceback: Optional[TracebackType],
    ) -> bool:
        super().__exit__(exc_type, exc_value, traceback)
        self._time_tracker.save_time_ms(self._task, self.elapsed_ms())
        return False
