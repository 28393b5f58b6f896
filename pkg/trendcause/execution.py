"""
Execution engine for batch work

ThreadedExecutor fans independent, pure tasks (Granger pairs, per-style
forecasts, timestamp queries) out over worker threads. Results are merged
by input position, so the output never depends on the thread count.
"""

import logging
import threading
from typing import Callable, List, Optional, Sequence, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


class ThreadedExecutor:
    """
    Background thread execution model.

    Workers pull task indices from a shared cursor under a lock and write
    each result into its own slot. ``threads=1`` runs inline.
    """

    def __init__(self, threads: int = 1, name: str = "trendcause"):
        """Initialize threaded executor.

        Args:
            threads: Maximum worker threads (values below 1 mean 1)
            name: Prefix for worker thread names
        """
        self.threads = max(1, int(threads))
        self.name = name

        self._lock = threading.Lock()
        self._cursor = 0

    def map(self, func: Callable[[T], R], items: Sequence[T]) -> List[R]:
        """Apply ``func`` to every item; results in input order.

        The first exception raised by any task is re-raised after all
        workers have stopped.
        """
        items = list(items)
        if self.threads == 1 or len(items) <= 1:
            return [func(item) for item in items]

        results: List[Optional[R]] = [None] * len(items)
        errors: List[BaseException] = []
        self._cursor = 0

        def _run_loop():
            while True:
                with self._lock:
                    if errors or self._cursor >= len(items):
                        return
                    index = self._cursor
                    self._cursor += 1
                try:
                    results[index] = func(items[index])
                except BaseException as e:
                    with self._lock:
                        errors.append(e)
                    logger.error(f"Task {index} failed in {self.name} executor: {e}")
                    return

        workers = [
            threading.Thread(target=_run_loop, name=f"{self.name}-{i}", daemon=True)
            for i in range(min(self.threads, len(items)))
        ]
        logger.debug(f"ThreadedExecutor started {len(workers)} workers for {len(items)} tasks")
        for worker in workers:
            worker.start()
        for worker in workers:
            worker.join()

        if errors:
            raise errors[0]
        return results  # type: ignore[return-value]
