"""Counter-based random streams.

Every random draw in the laboratory comes from a generator returned by
`seed_stream`. Streams are Philox generators keyed by (master seed, stream index),
so distinct pairs give distinct keys and the same pair always reproduces the
same stream.
"""

from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from typing import TypeVar

import numpy as np

from core.config import settings

T = TypeVar("T")

_KEY_MASK = (1 << 64) - 1


def seed_stream(master_seed: int, stream_index: int) -> np.random.Generator:
    """
    Derive an independent generator for one block of work.

    Args:
        master_seed: Run-level seed (taken modulo 2**64)
        stream_index: Index of the block, stream or experiment component

    Returns:
        A numpy Generator backed by a Philox bit generator
    """
    if stream_index < 0:
        raise ValueError(f"stream_index must be nonnegative, got {stream_index}")
    key = ((stream_index & _KEY_MASK) << 64) | (master_seed & _KEY_MASK)
    return np.random.Generator(np.random.Philox(key=key))


def block_streams(
    master_seed: int, n_blocks: int, offset: int = 0
) -> list[np.random.Generator]:
    """Generators for blocks offset, offset+1, ..., in block order."""
    return [seed_stream(master_seed, offset + i) for i in range(n_blocks)]


def block_sizes(total: int, block_size: int | None = None) -> list[int]:
    """Split total samples into blocks of settings.mc_block_size (last one shorter)."""
    size = block_size or settings.mc_block_size
    full, rest = divmod(total, size)
    return [size] * full + ([rest] if rest else [])


def map_blocks(
    worker: Callable[[np.random.Generator, int], T],
    master_seed: int,
    total: int,
    offset: int = 0,
    block_size: int | None = None,
) -> list[T]:
    """
    Run worker(rng, block_samples) over seeded blocks, results in block order.

    Blocks run on settings.threads worker threads; block i always draws from
    seed_stream(master_seed, offset + i), so the result does not depend on the
    thread count.
    """
    sizes = block_sizes(total, block_size)
    streams = block_streams(master_seed, len(sizes), offset)
    if settings.threads == 1 or len(sizes) <= 1:
        return [worker(rng, n) for rng, n in zip(streams, sizes, strict=True)]
    with ThreadPoolExecutor(max_workers=settings.threads) as pool:
        return list(pool.map(worker, streams, sizes))
