"""Deterministic thread-parallel helpers.

Work items are mapped in a fixed order and merged positionally, and every
reduction in the package is an exact-integer sum, so results are
bit-identical for any thread count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence


def ordered_map(fn: Callable, items: Sequence, threads: int = 1) -> list:
    """Apply fn to each item, preserving order; threads > 1 uses a pool."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
