"""Order-preserving thread pool used by the fitting and explanation loops.

The heavy kernels are numba functions compiled with ``nogil=True``, so
threads give real concurrency. Results always come back in input order,
which keeps every reported number independent of the worker count.
"""

import os
from concurrent.futures import ThreadPoolExecutor

_default_threads = 1


def set_default_threads(n):
    global _default_threads
    _default_threads = resolve_threads(n)


def resolve_threads(n=None):
    if n is None:
        return _default_threads
    if n <= 0:
        return os.cpu_count() or 1
    return int(n)


def map_ordered(fn, items, threads=None):
    items = list(items)
    threads = resolve_threads(threads)
    if threads == 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(fn, items))
