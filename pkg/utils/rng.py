"""
Counter-based random streams on numpy's Philox.

A draw is a pure function of (key, row), so a batch can be split into
chunks, evaluated in any order or on any number of threads, and still see
exactly the same numbers. Rows are grouped into fixed blocks of ROW_BLOCK;
each block owns a disjoint Philox counter range under the stream key.
"""

from typing import Iterable

import numpy as np

ROW_BLOCK = 64
_MASK64 = (1 << 64) - 1
# block index lives in the top counter word; draws within a block advance the low words
_BLOCK_SHIFT = 192


def stream_key(*ids: int) -> int:
    """Hash integer identifiers into a single 64-bit stream key."""
    state = np.random.SeedSequence([int(i) & _MASK64 for i in ids]).generate_state(1, np.uint64)
    return int(state[0])


def block_generator(key: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(key) & _MASK64, counter=int(block) << _BLOCK_SHIFT))


def indexed_normal(key: int, rows: Iterable[int], shape_tail: tuple) -> np.ndarray:
    """
    Normal noise for a set of row indices: result[i] depends only on
    (key, rows[i]) and the position inside `shape_tail`.
    """
    rows = np.asarray(list(rows) if not isinstance(rows, np.ndarray) else rows, dtype=np.int64)
    shape_tail = tuple(shape_tail)
    out = np.empty((len(rows),) + shape_tail)
    if len(rows) == 0:
        return out
    blocks = rows // ROW_BLOCK
    for block in np.unique(blocks):
        draws = block_generator(key, block).standard_normal((ROW_BLOCK,) + shape_tail)
        hit = blocks == block
        out[hit] = draws[rows[hit] - block * ROW_BLOCK]
    return out
