"""Seeded, worker-count independent Monte-Carlo blocks.

Work is cut into fixed-size blocks; block ``b`` always draws from the
generator seeded by ``(seed, stream, b)``, so results depend only on the
master seed, never on how blocks are scheduled.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")

DEFAULT_SEED = 20100101
BLOCK_SIZE = 4096


def default_seed() -> int:
    """Seed used when none is given; ``POLARLAB_SEED`` overrides it."""
    value = os.environ.get("POLARLAB_SEED")
    return int(value) if value else DEFAULT_SEED


def block_rng(seed: int, stream: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(stream, block))))


def block_sizes(total: int, block_size: int = BLOCK_SIZE) -> list[int]:
    full, rest = divmod(total, block_size)
    return [block_size] * full + ([rest] if rest else [])


def map_blocks(
    fn: Callable[[np.random.Generator, int], T],
    total: int,
    seed: int,
    stream: int,
    workers: int = 1,
    block_size: int = BLOCK_SIZE,
) -> list[T]:
    """Run ``fn(rng, size)`` on every block; results come back in block order."""
    sizes = block_sizes(total, block_size)

    def job(b: int) -> T:
        return fn(block_rng(seed, stream, b), sizes[b])

    if workers <= 1 or len(sizes) <= 1:
        return [job(b) for b in range(len(sizes))]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, range(len(sizes))))


def ordered_sum(parts: Sequence[np.ndarray]) -> np.ndarray:
    """Left fold in block order (fixed reduction tree)."""
    acc = np.array(parts[0], copy=True)
    for p in parts[1:]:
        acc = acc + p
    return acc
