"""Two-pass streaming estimation of the medoid cost.

Pass 1 maintains one linear sketch of the vertical stack of all points.
Pass 2 replays the multiset: each point, stacked against itself n times,
is subtracted from the sketch by linearity, and the resulting norm
estimate scores that point as the candidate center. The first half of
the sketch rows picks the best candidate and the disjoint second half
prices it, so the running minimum does not ride the estimation noise.

One pass cannot do this: scoring a candidate requires knowing the whole
stack, which is only available after the first pass. The API enforces the
two-phase protocol.
"""

from __future__ import annotations

import math

import numpy as np

from .backend import kernels as _k
from .rng import SeedCtx, StableParams, median_abs_stable, TAG_MEDOID


class PassOrderError(RuntimeError):
    """Pass-2 operation attempted before pass 1 was sealed, or vice versa."""


def default_width(eps: float, n_hint: int = 1000, delta: float = 0.1) -> int:
    """Sketch rows covering a union bound over n_hint candidate queries.

    Each candidate is priced from half the rows (the other half picks the
    running argmin), so the per-candidate estimate sees width/2 entries.
    """
    return max(64, math.ceil(8.0 * math.log(2.0 * n_hint / delta) / eps ** 2))


class MedoidSketch:
    """Two-pass medoid-cost estimator for points in R^d."""

    def __init__(self, d: int, p: float, eps: float, seed: int | SeedCtx,
                 width: int | None = None):
        if not (1.0 <= p <= 2.0):
            raise ValueError(f"p must be in [1, 2], got {p}")
        self.d = d
        self.p = p
        self.eps = eps
        ctx = seed if isinstance(seed, SeedCtx) else SeedCtx(seed)
        self.ctx = ctx.child(TAG_MEDOID)
        self.width = width or default_width(eps)
        self._med_abs = median_abs_stable(StableParams(p))
        self._sk = np.zeros(self.width)
        self._n_pass1 = 0
        self._sealed = False
        self._n_pass2 = 0
        self._block_sums: np.ndarray | None = None
        self._best_pick = math.inf
        self._running_min = math.inf

    # -- pass 1 -------------------------------------------------------------

    def pass1_ingest(self, x):
        if self._sealed:
            raise PassOrderError("pass 1 is sealed; cannot ingest more points")
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.d,):
            raise ValueError(f"expected dimension {self.d}, got {x.shape}")
        cols = (self._n_pass1 * self.d + np.arange(self.d)).astype(np.int64)
        self._sk += _k.apply_weighted(np.uint64(self.ctx.master_seed),
                                      np.uint64(self.ctx.stream_id),
                                      self.p, self.width, 0, cols, x)
        self._n_pass1 += 1

    def seal_pass1(self):
        if self._sealed:
            raise PassOrderError("pass 1 already sealed")
        if self._n_pass1 == 0:
            raise ValueError("no points ingested in pass 1")
        self._sealed = True
        # column sums over all stacked blocks; scoring a candidate is then
        # a single [width, d] product instead of n block applications
        n, d, s = self._n_pass1, self.d, self.width
        sums = np.zeros((s, d))
        for i in range(n):
            e = _k.stable_matrix(np.uint64(self.ctx.master_seed),
                                 np.uint64(self.ctx.stream_id),
                                 self.p, 0, s, i * d, d)
            sums += e
        self._block_sums = sums

    # -- pass 2 -------------------------------------------------------------

    def pass2_score(self, x) -> float:
        """Score one replayed point as candidate center; returns the running min."""
        if not self._sealed:
            raise PassOrderError("seal pass 1 before scoring candidates")
        if self._n_pass2 >= self._n_pass1:
            raise ValueError("pass 2 saw more points than pass 1")
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.d,):
            raise ValueError(f"expected dimension {self.d}, got {x.shape}")
        q = self._sk - self._block_sums @ x
        half = self.width // 2
        pick = _k.median_abs(q[:half])
        value = (_k.median_abs(q[half:]) / self._med_abs) ** self.p
        self._n_pass2 += 1
        if pick < self._best_pick:
            self._best_pick = pick
            self._running_min = value
        return self._running_min

    def result(self) -> float:
        if not self._sealed:
            raise PassOrderError("passes not complete")
        if self._n_pass2 != self._n_pass1:
            raise ValueError(
                f"pass 2 replayed {self._n_pass2} of {self._n_pass1} points")
        return self._running_min


def estimate_medoid_cost(points, p: float, eps: float, seed: int | SeedCtx,
                         width: int | None = None) -> float:
    """Run both passes over an in-memory point set."""
    pts = np.asarray(points, dtype=np.float64)
    sk = MedoidSketch(pts.shape[1], p, eps, seed,
                      width=width or default_width(eps, n_hint=max(2, pts.shape[0])))
    for x in pts:
        sk.pass1_ingest(x)
    sk.seal_pass1()
    for x in pts:
        sk.pass2_score(x)
    return sk.result()
