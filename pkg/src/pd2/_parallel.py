"""Fixed-block batch execution.

Replicas are cut into blocks of a size that never depends on the worker
count. Block ``b`` draws from ``stream.substream("block", b)``, and block
results are concatenated in block order. The output is therefore identical
for any number of workers.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .special import RngStream


def block_tasks(stream: RngStream, size: int, block: int):
    if size < 0 or block < 1:
        raise ValueError("size must be >= 0 and block >= 1")
    nblocks = -(-size // block)
    return [(stream.substream("block", b), min(block, size - b * block)) for b in range(nblocks)]


def _call(args):
    fn, sub, count, kwargs = args
    return fn(sub, count, **kwargs)


def map_blocks(fn, stream: RngStream, size: int, block: int, workers: int = 1, **kwargs) -> dict:
    """Run ``fn(substream, count, **kwargs) -> dict[str, ndarray]`` over all blocks.

    Arrays with the same key are concatenated along axis 0 in block order.
    """
    tasks = [(fn, sub, count, kwargs) for sub, count in block_tasks(stream, size, block)]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_call, tasks))
    else:
        parts = [_call(t) for t in tasks]
    if not parts:
        return {}
    return {key: np.concatenate([p[key] for p in parts]) for key in parts[0]}
