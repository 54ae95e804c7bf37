"""Counter-based random streams for reproducible parallel path simulation.

Paths are split into fixed-size blocks; each block draws from its own Philox
stream keyed by (seed, block index).  The block layout is independent of the
worker count, so any parallel schedule reproduces the same numbers.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor

import numpy as np

BLOCK_SIZE = 1024

_U64 = (1 << 64) - 1


def stage_seed(global_seed: int, stage: str) -> int:
    """Derive a per-stage seed from the global seed by hashing the stage name."""
    h = hashlib.sha256(f"{global_seed}:{stage}".encode()).digest()
    return int.from_bytes(h[:8], "little")


def block_generator(seed: int, block_index: int) -> np.random.Generator:
    """Philox stream for one path block; the key fixes it independently of
    scheduling order."""
    return np.random.Generator(
        np.random.Philox(key=[seed & _U64, block_index & _U64])
    )


def path_blocks(n_paths: int, block_size: int = BLOCK_SIZE):
    """Yield (block_index, slice) covering range(n_paths) in fixed order."""
    for b, lo in enumerate(range(0, n_paths, block_size)):
        yield b, slice(lo, min(lo + block_size, n_paths))


def map_blocks(fn, blocks, threads: int = 1) -> list:
    """Apply fn over blocks, preserving block order in the result list.

    fn must only write to disjoint state; results are merged by the caller in
    the returned (deterministic) order.
    """
    blocks = list(blocks)
    if threads <= 1 or len(blocks) <= 1:
        return [fn(b) for b in blocks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, blocks))
