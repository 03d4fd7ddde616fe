"""Deterministic element-chunked map.

Work is split into contiguous element ranges; each range is processed by a
batched numpy kernel (which releases the GIL inside LAPACK) and written to a
disjoint slice of the output, so results do not depend on scheduling.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

_threads = 1


def set_threads(n: int) -> None:
    global _threads
    if n < 1:
        raise ValueError("thread count must be >= 1")
    _threads = int(n)


def get_threads() -> int:
    return _threads


def chunk_ranges(n: int, nchunks: int) -> list[slice]:
    bounds = np.linspace(0, n, max(1, min(nchunks, n)) + 1).astype(int)
    return [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def element_map(func, n: int, threads: int | None = None, min_chunk: int = 2048):
    """Apply ``func(slice)`` over contiguous chunks of ``range(n)``.

    `func` returns a tuple of arrays whose leading axis is the chunk; the
    concatenated tuple is returned.
    """
    threads = _threads if threads is None else threads
    nchunks = max(1, min(4 * threads, -(-n // min_chunk)))
    ranges = chunk_ranges(n, nchunks)
    if threads == 1 or len(ranges) == 1:
        parts = [func(r) for r in ranges]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(func, ranges))
    return tuple(np.concatenate([p[i] for p in parts]) for i in range(len(parts[0])))
