"""Worker-thread configuration for the parallel pooling kernels.

The BEVPOOL_THREADS environment variable caps parallelism (0 = one
worker per CPU). Import this module before anything imports numba: the
numba thread pool is sized once per process, so we widen it here to at
least four workers so benchmark runs can request parallelism >= 4 on
small machines.
"""

from __future__ import annotations

import os
import sys

from .errors import ConfigurationError


def requested_threads() -> int:
    """Parse BEVPOOL_THREADS; 0 means automatic."""
    raw = os.environ.get("BEVPOOL_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigurationError(
            f"BEVPOOL_THREADS must be a non-negative integer, got {raw!r}"
        ) from None
    if n < 0:
        raise ConfigurationError(f"BEVPOOL_THREADS must be >= 0, got {n}")
    return n


if "numba" not in sys.modules:
    if "NUMBA_NUM_THREADS" not in os.environ:
        _pool = max(os.cpu_count() or 1, requested_threads(), 4)
        os.environ["NUMBA_NUM_THREADS"] = str(_pool)
    # omp supports set_num_threads and is quiet about TBB versions
    os.environ.setdefault("NUMBA_THREADING_LAYER", "omp")

import numba  # noqa: E402


def set_parallelism(n: int | None = None) -> int:
    """Pin the worker count; None reads BEVPOOL_THREADS, 0 = automatic.

    Returns the count actually in effect (clamped to the pool size).
    """
    if n is None:
        n = requested_threads()
    if n == 0:
        n = os.cpu_count() or 1
    n = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)
    return n


def get_parallelism() -> int:
    return numba.get_num_threads()


# Import-time default: honor the environment, otherwise one worker per CPU.
set_parallelism()
