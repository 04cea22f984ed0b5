"""Deterministic chunked reductions.

Every grid reduction is split into chunks whose shape depends only on the
problem (never on the number of workers). Chunk partials are then combined by a
fixed pairwise tree, so results are bitwise identical for any ``threads``.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")

#: target number of grid points per chunk
CHUNK_POINTS = 1 << 16


def pairwise_sum(values: Sequence[T]) -> T:
    """Sum ``values`` along a balanced binary tree of fixed shape."""
    vals = list(values)
    if not vals:
        raise ValueError("pairwise_sum of an empty sequence")
    while len(vals) > 1:
        nxt = [vals[i] + vals[i + 1] for i in range(0, len(vals) - 1, 2)]
        if len(vals) % 2:
            nxt.append(vals[-1])
        vals = nxt
    return vals[0]


def map_chunks(fn: Callable[[int], T], n_chunks: int, threads: int = 1) -> list[T]:
    """Evaluate ``fn(i)`` for every chunk index, in order, on up to ``threads`` workers."""
    if threads is None or threads <= 1 or n_chunks <= 1:
        return [fn(i) for i in range(n_chunks)]
    with ThreadPoolExecutor(max_workers=int(threads)) as pool:
        return list(pool.map(fn, range(n_chunks)))


def split_leading(n_per_axis: int, n_axes: int) -> tuple[int, int]:
    """Choose how many leading grid axes to peel off into chunks.

    Returns ``(lead_axes, n_chunks)`` for a tensor grid of ``n_axes`` axes of
    ``n_per_axis`` points each, so that a chunk has at most about
    :data:`CHUNK_POINTS` points.
    """
    lead = 0
    points = n_per_axis**n_axes
    while lead < n_axes - 1 and points > CHUNK_POINTS:
        lead += 1
        points //= n_per_axis
    return lead, n_per_axis**lead


def complex_sum(arr: np.ndarray) -> complex:
    """Sum of a complex array as separate real/imag reductions (``np.sum`` is pairwise)."""
    return complex(float(np.sum(arr.real)), float(np.sum(arr.imag)))
