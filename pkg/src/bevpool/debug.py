"""Operation counters, used to assert that hot paths skip expensive stages.

Counting is off by default and costs one branch per call site when off.
"""

from contextlib import contextmanager

_enabled = False

counters = {"unproject": 0, "quantize": 0}


def count(name: str, n: int = 1) -> None:
    if _enabled:
        counters[name] += n


def reset() -> None:
    for key in counters:
        counters[key] = 0


@contextmanager
def counting():
    """Enable the counters inside a `with` block, resetting them on entry."""
    global _enabled
    reset()
    _enabled = True
    try:
        yield counters
    finally:
        _enabled = False
