from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")


class RunPool:
    """Runs independent seeded jobs side by side; results keep submission order."""

    def __init__(self, max_workers: int = 4) -> None:
        self._max_workers = max_workers

    def map(self, func: Callable[[T], R], items: Sequence[T]) -> list[R]:
        if len(items) <= 1:
            return [func(item) for item in items]
        workers = min(self._max_workers, len(items))
        with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="run-worker") as executor:
            futures = [executor.submit(func, item) for item in items]
            return [future.result() for future in futures]
