from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor


def default_jobs() -> int:
    return os.cpu_count() or 1


def pmap(fn, items, jobs: int | None = 1) -> list:
    """Order-preserving map; uses worker processes when ``jobs > 1``.

    ``fn`` and the items must be picklable when running in parallel.
    """
    items = list(items)
    jobs = default_jobs() if jobs is None else int(jobs)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as ex:
        return list(ex.map(fn, items))
