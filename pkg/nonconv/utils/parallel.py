"""Ordered replica execution."""
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, TypeVar

T = TypeVar("T")


def map_replicas(fn: Callable[[int], T], count: int, threads: int = 1) -> List[T]:
    """
    Evaluate ``fn(r)`` for r = 0..count-1 and return results in replica order.

    Results are reduced by the caller in this order, so any thread count
    yields identical statistics.
    """
    if threads <= 1 or count <= 1:
        return [fn(r) for r in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(count)))
