"""Order-preserving parallel map, capped by ``TRACKFOLD_THREADS``."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager

ENV_VAR = "TRACKFOLD_THREADS"


def thread_count(env=None) -> int:
    """Worker count from the environment; 0 or unset means one per CPU."""
    env = os.environ if env is None else env
    raw = env.get(ENV_VAR, "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{ENV_VAR} must be an integer, got {raw!r}") from None
    if n < 0:
        raise ValueError(f"{ENV_VAR} must be >= 0, got {n}")
    return n if n > 0 else (os.cpu_count() or 1)


@contextmanager
def parallel_map(threads: int | None = None):
    """Yield a ``map``-like callable; results keep input order."""
    n = thread_count() if threads is None else threads
    if n <= 1:
        yield map
        return
    with ThreadPoolExecutor(max_workers=n) as pool:
        yield pool.map
