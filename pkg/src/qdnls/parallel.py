"""Order-preserving parallel map used by the spectral sweeps."""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def default_workers() -> int:
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1)


def parallel_map(fn: Callable[[T], R], items: Iterable[T], threads: int | None = 1) -> list[R]:
    """Map ``fn`` over ``items`` and return results in input order.

    ``threads <= 1`` runs serially in-process.  Work is split by the caller
    into fixed-size chunks, so results never depend on the worker count.
    """
    items = list(items)
    n = default_workers() if threads is None else int(threads)
    if n <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=min(n, len(items))) as ex:
        return list(ex.map(fn, items))


def chunked(seq: Sequence[T], size: int) -> list[Sequence[T]]:
    if size < 1:
        raise ValueError("chunk size must be positive")
    return [seq[i:i + size] for i in range(0, len(seq), size)]
