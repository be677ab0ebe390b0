"""Chunk dispatch helper shared by the Monte-Carlo estimators.

Work is always partitioned into the same chunks regardless of worker count
and partial results are combined in chunk order, so outputs are bit-for-bit
identical whether chunks run sequentially or on a thread pool. NumPy
releases the GIL in the array fills and contractions that dominate each
chunk, so threads give real parallelism here.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def map_ordered(fn: Callable[[T], R], items: Sequence[T],
                workers: int = 1) -> list[R]:
    """Apply `fn` to every item, preserving input order in the result."""
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if workers == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
