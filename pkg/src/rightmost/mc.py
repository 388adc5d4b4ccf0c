"""Deterministic Monte Carlo scheduling.

Samples are addressed by index and every index owns its random stream, so
results are identical for any worker count; chunks are returned in index
order.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence

WORKERS_ENV = "RIGHTMOST_WORKERS"


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            value = int(env)
        except ValueError as exc:
            raise ValueError(f"{WORKERS_ENV} must be an integer, got {env!r}") from exc
        if value < 1:
            raise ValueError(f"{WORKERS_ENV} must be >= 1")
        return value
    return os.cpu_count() or 1


def chunked(start: int, count: int, size: int) -> list[tuple[int, int]]:
    return [(k, min(size, start + count - k)) for k in range(start, start + count, size)]


def map_chunks(
    fn: Callable[[int, int], Sequence],
    count: int,
    workers: int | None = None,
    chunk: int = 16,
    start: int = 0,
) -> list:
    """Flattened ``fn(first_index, length)`` over ``[start, start + count)``.

    ``fn`` must be picklable (a module-level function or a ``partial`` of one)
    when more than one worker is used.
    """
    if count <= 0:
        return []
    workers = default_workers() if workers is None else workers
    jobs = chunked(start, count, max(1, chunk))
    if workers <= 1 or len(jobs) == 1:
        parts = [fn(a, m) for a, m in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(fn, *zip(*jobs)))
    return [item for part in parts for item in part]
