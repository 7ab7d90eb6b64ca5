"""Thread-count control with bit-reproducible results.

The OTSELECT_THREADS environment variable caps parallelism for the heavy
inner kernels (feature projection, cost/Gram products). Outputs must be
byte-identical no matter the cap, so parallelism is only applied across
disjoint row blocks of fixed size: every output element is produced by
exactly one single-threaded BLAS call whose operands do not depend on the
worker count. BLAS-internal threading is pinned to one thread inside the
kernels because its reduction order varies with its pool size.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from threadpoolctl import threadpool_limits

# Rows per task. Fixed so block boundaries never depend on the thread cap.
_BLOCK_ROWS = 256

_ENV_VAR = "OTSELECT_THREADS"

_process_limits = None


def configure_process() -> None:
    """Make the whole process bit-reproducible regardless of OTSELECT_THREADS.

    Pins every BLAS pool to one thread for the process lifetime; the only
    parallelism left is the block-level kind in :func:`matmul`, which is
    reduction-order stable. Called by the CLI and service entry points.
    """
    global _process_limits
    if _process_limits is None:
        _process_limits = threadpool_limits(limits=1, user_api="blas")


def thread_cap() -> int:
    """Effective thread cap: OTSELECT_THREADS if set and valid, else all cores."""
    raw = os.environ.get(_ENV_VAR, "")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n < 1:
        n = os.cpu_count() or 1
    return n


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Compute ``a @ b`` with deterministic, thread-count-independent bits.

    Parallelism is across row blocks of ``a``; each block is one
    single-threaded GEMM writing a disjoint slice of the output.
    """
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    n = a.shape[0]
    out = np.empty((n, b.shape[1]), dtype=np.float64)
    starts = list(range(0, n, _BLOCK_ROWS))
    workers = min(thread_cap(), max(1, len(starts)))

    def run(i0: int) -> None:
        i1 = min(i0 + _BLOCK_ROWS, n)
        np.matmul(a[i0:i1], b, out=out[i0:i1])

    # The same block decomposition runs under every cap; only the executor
    # changes. Blocks write disjoint slices, so completion order is moot.
    with threadpool_limits(limits=1, user_api="blas"):
        if workers == 1:
            for i0 in starts:
                run(i0)
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                list(pool.map(run, starts))
    return out
