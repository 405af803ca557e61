"""Replica scheduling.

Results come back in replica order whatever the worker count, and each
replica derives its own seed from (master seed, tag, index), so the output
never depends on scheduling.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")

WORKERS_ENV = "FPP_LAB_WORKERS"


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def replica_map(fn: Callable[[T], R], items: Sequence[T], workers: int | None = None) -> list[R]:
    # the compiled kernels release the GIL, so threads give real overlap
    workers = default_workers() if workers is None else max(1, int(workers))
    if workers == 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
