"""Process-level parallelism and BLAS thread control.

The numerical kernels here work on small matrices, where BLAS thread pools
cost more in contention than they return; replicate-level process parallelism
is the productive axis.  ``limit_blas_threads`` pins the in-process pools to
one thread, and ``parallel_map`` fans work out over seeded worker processes.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor


def limit_blas_threads(n: int = 1) -> None:
    """Pin numpy/scipy BLAS pools to n threads (no-op if threadpoolctl is absent)."""
    try:
        import threadpoolctl

        threadpoolctl.threadpool_limits(limits=n)
    except Exception:
        pass
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, str(n))


def default_workers() -> int:
    return max(1, os.cpu_count() or 1)


def _init_worker():
    limit_blas_threads(1)


def parallel_map(fn, items, n_jobs: int | None = None):
    """Map fn over items with a process pool; order-preserving, deterministic.

    n_jobs=1 runs serially in-process (useful under profilers and debuggers).
    """
    items = list(items)
    if n_jobs is None:
        n_jobs = default_workers()
    if n_jobs <= 1 or len(items) <= 1:
        _init_worker()
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=n_jobs, initializer=_init_worker) as pool:
        return list(pool.map(fn, items))
