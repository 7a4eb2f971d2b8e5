"""Counter-based random streams.

A stream is identified by ``(master_seed, stream_index)``.  The pair is mixed
through splitmix64 into a 64-bit seed for a PCG64 generator, so a given pair
always yields the same sequence no matter which worker consumes it.  Work that
is split into chunks takes ``stream.child(k)`` for chunk ``k``; the chunk
layout never depends on the number of workers.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

T = TypeVar("T")


def splitmix64(x: int) -> int:
    """One round of the splitmix64 finalizer on a 64-bit unsigned integer."""
    z = (x + _GOLDEN) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


@dataclass(frozen=True)
class RngStream:
    master_seed: int
    stream_index: int = 0

    def __post_init__(self):
        for name in ("master_seed", "stream_index"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 0 or v > _MASK:
                raise ValueError(f"{name} must be a 64-bit unsigned integer, got {v!r}")

    @property
    def seed(self) -> int:
        return splitmix64(splitmix64(int(self.master_seed)) ^ int(self.stream_index))

    def generator(self) -> np.random.Generator:
        """A fresh generator positioned at the start of this stream."""
        return np.random.Generator(np.random.PCG64(self.seed))

    def child(self, k: int) -> "RngStream":
        """Independent sub-stream number ``k`` of this stream."""
        idx = splitmix64((int(self.stream_index) * _GOLDEN + int(k) + 1) & _MASK)
        return RngStream(self.master_seed, idx)


def as_stream(rng) -> RngStream:
    """Accept an ``RngStream`` or a plain integer seed."""
    if isinstance(rng, RngStream):
        return rng
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng))
    raise TypeError(f"expected RngStream or int seed, got {type(rng).__name__}")


def worker_count() -> int:
    """Worker cap from ``BLOCKRIP_THREADS`` (0 or unset means one per CPU)."""
    raw = os.environ.get("BLOCKRIP_THREADS", "0").strip() or "0"
    n = int(raw)
    if n < 0:
        raise ValueError("BLOCKRIP_THREADS must be >= 0")
    return n if n > 0 else (os.cpu_count() or 1)


def chunk_sizes(total: int, chunk: int) -> list[int]:
    """Fixed chunk layout for ``total`` trials; independent of worker count."""
    sizes = [chunk] * (total // chunk)
    if total % chunk:
        sizes.append(total % chunk)
    return sizes


def ordered_map(fn: Callable[..., T], items: Sequence | Iterable, workers: int | None = None) -> list[T]:
    """``list(map(fn, items))`` on a thread pool, results in input order."""
    items = list(items)
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))
