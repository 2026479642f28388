"""Order-preserving map over an optional process pool."""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

WORKERS_ENV = "BOXEN_MAX_WORKERS"


def worker_cap() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, os.cpu_count() or 1)))
    except ValueError:
        return 1


def parallel_map(fn, items, workers: int = 1) -> list:
    """``[fn(x) for x in items]``, optionally across processes.

    Results come back in input order whatever the completion order, so the
    output does not depend on the worker count.
    """
    items = list(items)
    workers = min(workers, worker_cap(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))
