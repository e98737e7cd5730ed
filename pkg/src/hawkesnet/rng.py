"""Counter-based random streams.

Every realization owns one Philox stream spawned from the master seed, so
replica ``r`` draws the same numbers whatever the worker count or order.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np


def generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def replica_generators(seed, n: int, key: int = 0) -> list[np.random.Generator]:
    """``n`` independent streams for replicas ``0..n-1``.

    ``key`` separates unrelated experiments sharing a master seed.
    """
    root = np.random.SeedSequence(seed, spawn_key=(key,))
    return [np.random.Generator(np.random.Philox(s)) for s in root.spawn(n)]


def default_workers() -> int:
    env = os.environ.get("HAWKESNET_THREADS")
    if env:
        return max(1, int(env))
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1)


def map_replicas(fn, rngs, workers: int | None = None) -> list:
    """Apply ``fn`` to every stream; results keep replica order."""
    workers = default_workers() if workers is None else workers
    if workers <= 1 or len(rngs) <= 1:
        return [fn(g) for g in rngs]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, rngs))
