"""Fan out per-index sample generation over worker processes.

A batch function is a jitted kernel called as
``batch(*args, samples_root, start, stop, out, ctr)`` that writes sample
``i`` to ``out[i - start]`` using only streams derived from
``(samples_root, i)``.  Results therefore do not depend on how indices are
split across workers.
"""

from __future__ import annotations

import importlib
import multiprocessing as mp
import os
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .exact import new_counters
from .rng import derive, root_state

SAMPLES, PILOTS = 0, 1


def stream_root(seed: int, purpose: int) -> np.ndarray:
    return derive(root_state(np.uint64(seed)), np.uint64(purpose))


def default_workers() -> int:
    try:
        return max(1, len(os.sched_getaffinity(0)))
    except AttributeError:
        return max(1, os.cpu_count() or 1)


def _resolve(ref):
    # jitted kernels travel by name: a pickled dispatcher recompiles in the child
    module, name = ref
    return getattr(importlib.import_module(module), name)


def _run_chunk(batch, args, root, start, stop):
    if isinstance(batch, tuple):
        batch = _resolve(batch)
    out = np.empty(stop - start)
    ctr = new_counters()
    batch(*args, root, start, stop, out, ctr)
    return out, ctr


def run_samples(batch, args: tuple, n: int, root: np.ndarray, workers: int = 1,
                chunk: int | None = None):
    """Run ``n`` samples; returns ``(values, counters, wall_seconds)``."""
    # an empty batch loads or compiles the kernel outside the timed region
    batch(*args, root, 0, 0, np.empty(0), new_counters())
    t0 = time.perf_counter()
    if workers <= 1 or n < 2 * workers:
        values, ctr = _run_chunk(batch, args, root, 0, n)
        return values, ctr, time.perf_counter() - t0
    if chunk is None:
        chunk = max(1, -(-n // (4 * workers)))
    bounds = [(a, min(a + chunk, n)) for a in range(0, n, chunk)]
    values = np.empty(n)
    ctr = new_counters()
    ctx = mp.get_context("fork") if "fork" in mp.get_all_start_methods() else None
    ref = (batch.py_func.__module__, batch.py_func.__name__)
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
        futures = [pool.submit(_run_chunk, ref, args, root, a, b) for a, b in bounds]
        for (a, b), fut in zip(bounds, futures):
            out, c = fut.result()
            values[a:b] = out
            ctr += c
    return values, ctr, time.perf_counter() - t0
