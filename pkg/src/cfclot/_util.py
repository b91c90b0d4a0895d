"""Shared plumbing: order-free summation, seed derivation, thread sizing."""
from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from functools import lru_cache
from typing import Callable, TypeVar

import numpy as np

T = TypeVar("T")

_SEED_MASK = (1 << 64) - 1


def stable_sum(values: np.ndarray) -> float:
    """Exactly rounded float sum, independent of element order.

    Plain float accumulation depends on the order the elements are visited,
    so two mathematically identical sums can disagree in the last bits.
    ``math.fsum`` tracks the exact intermediate value instead, which makes
    the result a function of the element multiset only. The relabeling
    invariances of the closeness statistics rely on this.
    """
    arr = np.asarray(values, dtype=float)
    return math.fsum(arr.ravel().tolist())


def offdiag_sum(matrix: np.ndarray) -> float:
    """Order-free sum of the off-diagonal entries of a square matrix."""
    arr = np.asarray(matrix, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError("offdiag_sum expects a square matrix")
    # Difference of two exactly rounded sums; both are order-free, so the
    # result is too.
    return stable_sum(arr) - stable_sum(np.diagonal(arr))


@lru_cache(maxsize=16)
def _triu_indices(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.triu_indices(n, k=1)


def sym_offdiag_sum(matrix: np.ndarray) -> float:
    """Off-diagonal sum of a symmetric matrix, order-free.

    Sums the strict upper triangle exactly and doubles it; doubling is an
    exponent shift, so the result is still exactly rounded.
    """
    arr = np.asarray(matrix, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError("sym_offdiag_sum expects a square matrix")
    rows, cols = _triu_indices(arr.shape[0])
    return 2.0 * stable_sum(arr[rows, cols])


def derive_seed(*parts: int) -> int:
    """Deterministic child seed from a tuple of integer parts."""
    entropy = [int(p) & _SEED_MASK for p in parts]
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0])


def substream(seed: int, index: int) -> np.random.Generator:
    """Independent generator for replicate ``index`` of master ``seed``.

    Uses a counter construction (spawn keys), so stream ``index`` is the
    same no matter how many replicates run, in what order, or on how many
    threads.
    """
    ss = np.random.SeedSequence(int(seed) & _SEED_MASK, spawn_key=(int(index),))
    return np.random.default_rng(ss)


def thread_count() -> int:
    """Worker cap from the CLOT_THREADS environment variable (default 1)."""
    raw = os.environ.get("CLOT_THREADS", "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        warnings.warn(f"ignoring non-integer CLOT_THREADS={raw!r}")
        return 1
    return max(1, n)


def map_indexed(fn: Callable[[int], T], count: int) -> list[T]:
    """Apply ``fn`` to ``0..count-1``, results assembled in index order.

    Runs on a thread pool when CLOT_THREADS asks for one. Each task must
    depend only on its index for the output to be identical across pool
    sizes; callers pair this with :func:`substream`.
    """
    workers = thread_count()
    if workers <= 1 or count <= 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(count)))
