"""Ordered parallel map capped by ``INDEXFLOW_THREADS``."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def thread_count(default: int = 1) -> int:
    raw = os.environ.get("INDEXFLOW_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        return default
    return max(1, n)


def pmap(fn, items, threads: int | None = None) -> list:
    """``[fn(x) for x in items]`` with results in input order."""
    items = list(items)
    n = threads or thread_count()
    if n <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=min(n, len(items))) as ex:
        return list(ex.map(fn, items))
