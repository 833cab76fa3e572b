"""Worker-pool plumbing honoring the PATHLENS_THREADS environment variable.

PATHLENS_THREADS caps the worker count; 0 means auto (one per CPU); unset
means single-threaded. Tasks always derive their randomness from their own
index, so results are identical regardless of scheduling.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def worker_count() -> int:
    raw = os.environ.get("PATHLENS_THREADS")
    if raw is None:
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"PATHLENS_THREADS must be an integer, got {raw!r}") from None
    if value < 0:
        raise ValueError("PATHLENS_THREADS must be >= 0")
    if value == 0:
        return os.cpu_count() or 1
    return value


def map_indexed(fn, items, workers: int) -> list:
    """Apply fn over items, preserving order; threaded when workers > 1."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
