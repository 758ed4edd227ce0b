"""Ordered process-pool map with single-threaded BLAS in every task."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor

from threadpoolctl import threadpool_limits


def _call(fn, item):
    with threadpool_limits(1):
        return fn(item)


def ordered_map(fn, items, workers: int = 1) -> list:
    """``[fn(x) for x in items]``; results keep input order for any worker count.

    BLAS is pinned to one thread so results are bit-identical between serial
    and parallel runs.
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [_call(fn, x) for x in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(_call, [fn] * len(items), items))
