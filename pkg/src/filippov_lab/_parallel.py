"""Deterministic work mapping with an env-controlled thread cap.

FILIPPOV_LAB_THREADS sets the worker count; 0, 1, or unset mean sequential.
Results always come back in input order, so concurrency never changes output.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")

ENV_VAR = "FILIPPOV_LAB_THREADS"


def worker_count() -> int:
    raw = os.environ.get(ENV_VAR, "").strip()
    if not raw:
        return 1
    try:
        k = int(raw)
    except ValueError:
        return 1
    return max(1, k)


def map_indexed(fn: Callable[[T], R], items: Sequence[T]) -> list[R]:
    """Like list(map(fn, items)); threads bounded by FILIPPOV_LAB_THREADS."""
    workers = worker_count()
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
