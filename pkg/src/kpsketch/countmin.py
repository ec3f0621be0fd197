"""Count-Min compression of stacked sketch blocks.

d length-m blocks are hashed into t rows of B buckets; each bucket stores
the entrywise sum of the blocks that land in it. Recovery of block j
returns, per row, the bucket j hashed to: the block itself plus the sum
of its colliding neighbors. When the blocks are scaled p-stable vectors
that collision noise is itself a scaled p-stable vector, with scale

    err_j(row) = (sum over colliding j' of scale_{j'}^p)^{1/p},

so a downstream stable-median estimator absorbs it as extra mass. Rows
are sized so that at least half of them have small err for every j with
high probability; queries take a median across rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .backend import kernels as _k
from .rng import SeedCtx


def rows_for(d: int, delta: float) -> int:
    """Row count making the per-block majority-good bound hold: ceil(2 ln(2d/delta))."""
    return max(1, math.ceil(2.0 * math.log(2.0 * d / delta)))


def buckets_for(eps: float, p: float) -> int:
    """Bucket count ceil(10 / eps^p); keeps expected collision mass <= eps^p/10 per unit."""
    return math.ceil(10.0 / eps ** p)


@dataclass
class NoisyBlock:
    """One recovered block: the stored bucket for j in a given row.

    err is the exact collision scale when true block scales were supplied
    at recovery (test mode); None in production, where the consumer never
    needs its numeric value.
    """

    values: np.ndarray
    err: float | None
    row: int


@dataclass
class CountMinTable:
    rows: int
    buckets: int
    block_len: int
    seed_ctx: SeedCtx
    cells: np.ndarray  # [rows, buckets, block_len]

    def bucket_of(self, row: int, j: int) -> int:
        return int(self._hashes(j + 1)[row, j])

    def _hashes(self, d: int) -> np.ndarray:
        return _k.bucket_matrix(np.uint64(self.seed_ctx.master_seed),
                                np.uint64(self.seed_ctx.stream_id),
                                self.rows, d, self.buckets)

    def __add__(self, other: "CountMinTable") -> "CountMinTable":
        if (self.rows, self.buckets, self.block_len) != (other.rows, other.buckets, other.block_len) \
                or self.seed_ctx != other.seed_ctx:
            raise ValueError("tables are not mergeable: shape or seeds differ")
        return CountMinTable(self.rows, self.buckets, self.block_len,
                             self.seed_ctx, self.cells + other.cells)


def compress(blocks: np.ndarray, rows: int, buckets: int, seed_ctx: SeedCtx) -> CountMinTable:
    """Hash the d stacked blocks into a fresh table. Linear in the blocks."""
    blocks = np.asarray(blocks, dtype=np.float64)
    if blocks.ndim != 2:
        raise ValueError("blocks must be a [d, m] array of equal-length blocks")
    d, m = blocks.shape
    table = CountMinTable(rows, buckets, m, seed_ctx,
                          np.zeros((rows, buckets, m)))
    h = table._hashes(d)
    for row in range(rows):
        np.add.at(table.cells[row], h[row], blocks)
    return table


def recover(table: CountMinTable, j: int, d: int | None = None,
            true_scales=None, p: float | None = None) -> list[NoisyBlock]:
    """Return block j's bucket from every row.

    Supplying (true_scales, p) computes each row's exact collision scale
    for property tests; otherwise err stays None.
    """
    scales = None
    if true_scales is not None:
        if p is None:
            raise ValueError("p is required to evaluate collision scales")
        scales = np.asarray(true_scales, dtype=np.float64)
        d = scales.size
    if d is None:
        raise ValueError("either d or true_scales must be given")
    if not (0 <= j < d):
        raise IndexError(f"block index {j} out of range for d={d}")
    h = table._hashes(d)
    out = []
    for row in range(table.rows):
        bkt = h[row, j]
        err = None
        if scales is not None:
            colliding = (h[row] == bkt)
            colliding[j] = False
            err = float(np.sum(scales[colliding] ** p) ** (1.0 / p))
        out.append(NoisyBlock(table.cells[row, bkt].copy(), err, row))
    return out


def collision_scales(table: CountMinTable, d: int, true_scales, p: float) -> np.ndarray:
    """Exact err matrix [rows, d] by direct hash-collision enumeration."""
    scales = np.asarray(true_scales, dtype=np.float64)
    h = table._hashes(d)
    mass = scales ** p
    out = np.empty((table.rows, d))
    for row in range(table.rows):
        bucket_mass = np.bincount(h[row], weights=mass, minlength=table.buckets)
        out[row] = np.maximum(bucket_mass[h[row]] - mass, 0.0) ** (1.0 / p)
    return out
