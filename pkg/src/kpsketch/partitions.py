"""Set-partition enumeration via restricted growth strings."""

from __future__ import annotations

from typing import Iterator

import numpy as np

MAX_ENUMERABLE = 14


def rgs_partitions(n: int, max_blocks: int) -> Iterator[np.ndarray]:
    """Yield every partition of range(n) into at most max_blocks blocks.

    Partitions are encoded as restricted growth strings: a[0] = 0 and
    a[i] <= max(a[:i]) + 1, capped below max_blocks. The yielded array is
    reused between iterations; copy it if you keep it.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if n > MAX_ENUMERABLE:
        raise ValueError(f"partition enumeration capped at n={MAX_ENUMERABLE}, got {n}")
    if max_blocks < 1:
        raise ValueError("max_blocks must be positive")
    a = np.zeros(n, dtype=np.int64)
    b = np.zeros(n, dtype=np.int64)  # b[i] = max(a[:i+1])
    yield a
    while True:
        i = n - 1
        while i > 0 and (a[i] >= b[i - 1] + 1 or a[i] + 1 >= max_blocks):
            i -= 1
        if i == 0:
            return
        a[i] += 1
        b[i] = max(b[i - 1], a[i])
        for j in range(i + 1, n):
            a[j] = 0
            b[j] = b[i]
        yield a


def partition_blocks(a: np.ndarray) -> list[np.ndarray]:
    """Member indices per nonempty block of an RGS-encoded partition."""
    k = int(a.max()) + 1
    return [np.flatnonzero(a == blk) for blk in range(k)]


def count_partitions(n: int, max_blocks: int) -> int:
    """Number of partitions of an n-set into at most max_blocks blocks."""
    # Stirling-number recurrence, summed over block counts
    table = np.zeros((n + 1, max_blocks + 1), dtype=object)
    table[0, 0] = 1
    for i in range(1, n + 1):
        for j in range(1, min(i, max_blocks) + 1):
            table[i, j] = j * table[i - 1, j] + table[i - 1, j - 1]
    return int(sum(table[n, j] for j in range(1, max_blocks + 1)))
