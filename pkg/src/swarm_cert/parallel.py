"""Thread fan-out with deterministic result order.

The worker count is capped by the ``SWARM_CERT_THREADS`` environment variable
(default: number of CPUs). Results always come back in input order.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

ENV_THREADS = "SWARM_CERT_THREADS"


def worker_count():
    cpu = os.cpu_count() or 1
    raw = os.environ.get(ENV_THREADS)
    if not raw:
        return cpu
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)


def pmap(fn, items):
    """``[fn(x) for x in items]`` fanned out over a thread pool."""
    items = list(items)
    n = min(worker_count(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


def child_rngs(rng, count):
    """Independent generators, one per task, derived from ``rng``."""
    seeds = np.random.SeedSequence(int(rng.integers(0, 2**63))).spawn(count)
    return [np.random.default_rng(s) for s in seeds]
