"""Deterministic fan-out: fixed chunking, results merged in submission order."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, Optional, Sequence

ENV_WORKERS = "BADFLOW_WORKERS"


def resolve_workers(flag: Optional[int] = None) -> int:
    """Flag wins, then the environment variable, then the CPU count."""
    if flag is not None:
        w = int(flag)
    elif os.environ.get(ENV_WORKERS):
        w = int(os.environ[ENV_WORKERS])
    else:
        w = os.cpu_count() or 1
    if w < 1:
        raise ValueError("worker count must be positive")
    return w


def chunked(seq: Sequence, size: int) -> list:
    return [seq[i:i + size] for i in range(0, len(seq), size)]


def pmap(fn: Callable, items: Iterable, workers: int = 1) -> list:
    """map(fn, items) with optional processes; output order equals input order."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as ex:
        return list(ex.map(fn, items))
