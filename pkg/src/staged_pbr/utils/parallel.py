"""Chunked, order-preserving parallel map over pixel index ranges."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, TypeVar

from staged_pbr.utils.exceptions import ParameterError

T = TypeVar("T")


def chunk_bounds(count: int, chunk_size: int) -> list[tuple[int, int]]:
    """Split [0, count) into consecutive [start, stop) ranges of chunk_size."""
    if chunk_size < 1:
        raise ParameterError(f"chunk_size must be >= 1, got {chunk_size}")
    return [(start, min(start + chunk_size, count)) for start in range(0, count, chunk_size)]


def map_chunks(
    fn: Callable[[int, int], T],
    count: int,
    chunk_size: int,
    threads: int = 1,
) -> list[T]:
    """Apply fn(start, stop) to every chunk and return results in chunk order.

    Chunk boundaries depend only on count and chunk_size, never on threads,
    so any reduction the caller performs over the results is reproducible.
    """
    if threads < 1:
        raise ParameterError(f"threads must be >= 1, got {threads}")
    bounds = chunk_bounds(count, chunk_size)
    if threads == 1 or len(bounds) <= 1:
        return [fn(start, stop) for start, stop in bounds]
    with ThreadPoolExecutor(max_workers=threads, thread_name_prefix="staged-pbr") as pool:
        return list(pool.map(lambda bound: fn(*bound), bounds))


__all__ = ["chunk_bounds", "map_chunks"]
