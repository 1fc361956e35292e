"""Process-pool dispatch for sweep points and Monte Carlo batches.

`map_tasks` preserves input order, so aggregation does not depend on worker
scheduling; callers sort records again before emission anyway. The
MA_ISAC_THREADS environment variable overrides whatever thread count the
config or command line asked for.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

from .errors import ConfigError

__all__ = ["THREADS_ENV", "resolve_threads", "map_tasks"]

THREADS_ENV = "MA_ISAC_THREADS"


def resolve_threads(requested: int) -> int:
    """Worker count: MA_ISAC_THREADS wins over the requested value."""
    raw = os.environ.get(THREADS_ENV)
    if raw is not None and raw.strip():
        try:
            value = int(raw)
        except ValueError as exc:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from exc
        if value < 1:
            raise ConfigError(f"{THREADS_ENV} must be >= 1, got {value}")
        return value
    if requested < 1:
        raise ConfigError(f"thread count must be >= 1, got {requested}")
    return requested


def map_tasks(fn, items, threads: int) -> list:
    """fn over items, in order; a process pool when threads > 1 and it pays off."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(fn, items))
