"""Small shared helpers: deterministic parallel map and seed derivation."""

from concurrent.futures import ThreadPoolExecutor

import numpy as np


def pmap(fn, items, threads=1):
    """Map `fn` over `items`, optionally on a thread pool.

    Results are collected in input order, so the reduction is
    deterministic regardless of the thread count.
    """
    items = list(items)
    if threads is None or threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def derived_rng(seed, *indices):
    """Independent generator for a sub-task, reproducible from (seed, indices)."""
    return np.random.default_rng([int(seed) & 0xFFFFFFFF, *[int(i) for i in indices]])
