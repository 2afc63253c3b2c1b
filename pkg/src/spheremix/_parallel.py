"""Row-chunked evaluation with optional thread parallelism.

numpy releases the GIL inside matmul/exp, so threads give real speedups on
the big (points x components) blocks used everywhere in this package.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

CHUNK_ELEMENTS = 1 << 22


def resolve_threads(threads: int | None = None) -> int:
    """``threads`` if positive, else ``SPHEREMIX_THREADS``, else CPU count."""
    if threads is None or threads <= 0:
        env = os.environ.get("SPHEREMIX_THREADS", "")
        threads = int(env) if env.strip().isdigit() and int(env) > 0 else 0
    if threads <= 0:
        threads = os.cpu_count() or 1
    return threads


def map_rows(func, rows: np.ndarray, width: int, threads: int | None = 1) -> np.ndarray:
    """Apply ``func`` to row chunks of ``rows`` and concatenate.

    ``width`` is the per-row element count of the intermediate that ``func``
    builds (used to size chunks so they stay around 4M elements).
    """
    n = len(rows)
    step = max(1, CHUNK_ELEMENTS // max(1, width))
    if n <= step:
        return func(rows)
    chunks = [rows[i : i + step] for i in range(0, n, step)]
    nthreads = resolve_threads(threads) if threads != 1 else 1
    if nthreads == 1:
        return np.concatenate([func(c) for c in chunks])
    with ThreadPoolExecutor(nthreads) as pool:
        return np.concatenate(list(pool.map(func, chunks)))
