"""Order-preserving trial execution across processes."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable


def run_trials(fn: Callable[[int], object], trials: int, workers: int = 1) -> list:
    """``[fn(0), ..., fn(trials - 1)]``, optionally across processes.

    ``fn`` must be picklable when ``workers > 1``.  Results come back in
    index order whatever the scheduling.
    """
    if workers <= 1 or trials < 2:
        return [fn(k) for k in range(trials)]
    chunk = max(1, trials // (workers * 4))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(trials), chunksize=chunk))
