"""Insertion-only streaming estimation of (k,p)-clustering cost.

Each arriving point is folded into small linear sketches and the raw
vector is discarded: one distance sketch (for the reducer's approximate
pairwise distances) and, for every candidate cluster size m up to the
coreset capacity and every slot j in [m], the full median-cost pipeline
state of the point sitting in column j of the size-m instance. Cluster
weights are unknown until query time; a cluster is then evaluated by the
weighted centered recombination of its members' stored slot states.

The coreset itself is maintained by merge-and-reduce: arriving entries
buffer into capacity-sized blocks that carry up a binary counter of
levels, reducing to capacity on every merge. The level count is capped
(top level folds in place), so live sketch floats are bounded by a
constant independent of the stream length. Queries flatten the blocks,
reduce once more if needed, and score every partition of the surviving
entries into at most k clusters.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass

import numpy as np

from .backend import kernels as _k
from .mediancost import MedianSketchConfig, ResolvedDims, _StreamTable
from .partitions import MAX_ENUMERABLE, partition_blocks, rgs_partitions
from .rng import (SeedCtx, StableParams, median_abs_stable,
                  TAG_DIST, TAG_FAMILY, TAG_REDUCE)

_MAGIC = b"KPSS"
_VERSION = 1


class KRangeError(ValueError):
    """k is outside [1, coreset size]."""


class EnumerationCapError(ValueError):
    """Coreset too large for exhaustive partition enumeration."""


class OversizeReductionError(ValueError):
    """A reducer returned (or would need to return) more than capacity entries."""


@dataclass(frozen=True)
class StreamConfig:
    """Knobs for the streaming estimator.

    cluster configures the per-cluster cost estimator; the default is a
    deliberately light profile because every coreset point stores
    capacity*(capacity+1)/2 copies of its state.
    """

    p: float
    capacity: int = 12
    reducer: str = "sensitivity"
    dist_width: int = 64
    max_levels: int = 6
    cluster: MedianSketchConfig | None = None

    def cluster_config(self) -> MedianSketchConfig:
        if self.cluster is not None:
            if self.cluster.p != self.p:
                raise ValueError("cluster config p differs from stream p")
            return self.cluster
        return MedianSketchConfig(p=self.p, eps=0.8, delta=0.7,
                                  t_samples=8, reps=1, z_width=96,
                                  inner_width=8, cm_rows=4, cm_buckets=12,
                                  grid_eps=0.9)

    def fingerprint(self) -> int:
        reducer = self.reducer if isinstance(self.reducer, str) \
            else getattr(self.reducer, "__name__", "custom")
        text = repr((self.p, self.capacity, reducer, self.dist_width,
                     self.max_levels, self.cluster_config().fingerprint()))
        return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "little")


@dataclass
class CoresetEntry:
    """One surviving stream point: weight plus all of its sketches."""

    point_id: int
    weight: float
    dist_sketch: np.ndarray
    slots: list[np.ndarray]  # slots[m-1] has shape [m, state_size]

    def float_count(self) -> int:
        return self.dist_sketch.size + sum(s.size for s in self.slots)


@dataclass(frozen=True)
class KCostResult:
    k: int
    estimate: float
    partition_count: int
    seed: int


# ---------------------------------------------------------------------------
# reducer plugins: weighted set in, weighted subset out, raw coordinates
# never touched (only weights and sketch distances are available)

def passthrough_reducer(entries, capacity, ctx, dist, p):
    if len(entries) > capacity:
        raise OversizeReductionError(
            f"passthrough cannot reduce {len(entries)} entries to {capacity}")
    return list(entries)


def _rescale_exact(entries, target_mass):
    got = sum(e.weight for e in entries)
    if got <= 0:
        raise ValueError("reduction lost all weight")
    factor = target_mass / got
    for e in entries:
        e.weight *= factor
    return entries


def uniform_reducer(entries, capacity, ctx, dist, p):
    """Keep a uniform without-replacement sample, reweighted to exact mass."""
    m = len(entries)
    if m <= capacity:
        return list(entries)
    total = sum(e.weight for e in entries)
    draws = _k.uniform_vector(np.uint64(ctx.master_seed), np.uint64(ctx.stream_id), capacity)
    pool = list(range(m))
    kept = []
    for t in range(capacity):
        pick = int(draws[t] * (m - t))
        if pick >= m - t:
            pick = m - t - 1
        kept.append(pool[pick])
        pool[pick] = pool[m - t - 1]
    out = []
    for idx in sorted(kept):
        e = entries[idx]
        out.append(CoresetEntry(e.point_id, e.weight * m / capacity,
                                e.dist_sketch, e.slots))
    return _rescale_exact(out, total)


def sensitivity_reducer(entries, capacity, ctx, dist, p):
    """Sample by distance-to-approximate-center plus a uniform term.

    The center proxy is the entry minimizing the weighted sum of p-th
    powered sketch distances; sampling is with replacement, duplicates
    merge, and inverse-probability weights are rescaled to the exact
    input mass.
    """
    m = len(entries)
    if m <= capacity:
        return list(entries)
    total = sum(e.weight for e in entries)
    w = np.array([e.weight for e in entries])
    dmat = np.zeros((m, m))
    for i in range(m):
        for j in range(i + 1, m):
            dmat[i, j] = dmat[j, i] = dist(entries[i], entries[j])
    center_cost = (dmat ** p) @ w
    c_star = int(np.argmin(center_cost))
    point_cost = w * dmat[c_star] ** p
    mean_cost = point_cost.sum() / w.sum()
    scores = point_cost + w * mean_cost
    if scores.sum() <= 0:
        scores = w.copy()
    q = scores / scores.sum()
    # without-replacement draw proportional to q: exponential race keys
    u = _k.uniform_vector(np.uint64(ctx.master_seed), np.uint64(ctx.stream_id), m)
    keys = -np.log(u) / q
    kept = np.sort(np.argsort(keys, kind="stable")[:capacity])
    out = []
    for idx in kept:
        e = entries[idx]
        out.append(CoresetEntry(e.point_id, w[idx] / (capacity * q[idx]),
                                e.dist_sketch, e.slots))
    return _rescale_exact(out, total)


REDUCERS = {
    "passthrough": passthrough_reducer,
    "uniform": uniform_reducer,
    "sensitivity": sensitivity_reducer,
}


class _Family:
    """Per-cluster-size pipeline plan: dims plus the size's own streams."""

    def __init__(self, m: int, dims: ResolvedDims, ctx: SeedCtx):
        self.m = m
        self.dims = dims
        self.ctx = ctx
        self.streams = _StreamTable(ctx, dims.reps, dims.t_samples)


class ClusteringStream:
    """Streaming (k,p)-clustering cost estimator over one fixed dimension."""

    def __init__(self, d: int, config: StreamConfig, seed: int | SeedCtx):
        self.d = d
        self.config = config
        self.ctx = seed if isinstance(seed, SeedCtx) else SeedCtx(seed)
        self.cluster_cfg = config.cluster_config()
        self._dims = self.cluster_cfg.resolve(d)
        fam_root = self.ctx.child(TAG_FAMILY)
        self._families = [_Family(m, self._dims, fam_root.child(m))
                          for m in range(1, config.capacity + 1)]
        self._dist_ctx = self.ctx.child(TAG_DIST)
        self._reduce_ctx = self.ctx.child(TAG_REDUCE)
        self._med_abs = median_abs_stable(StableParams(config.p))
        self._reducer = REDUCERS[config.reducer] if isinstance(config.reducer, str) \
            else config.reducer
        self._buffer: list[CoresetEntry] = []
        self._levels: list[list[CoresetEntry] | None] = []
        self._n_seen = 0
        self._reduce_count = 0
        self._peak_floats = 0

    # -- ingestion ---------------------------------------------------------

    def _make_entry(self, x: np.ndarray, point_id: int, weight: float) -> CoresetEntry:
        master = np.uint64(self.ctx.master_seed)
        dist_sk = _k.apply_weighted(master, np.uint64(self._dist_ctx.stream_id),
                                    self.config.p, self.config.dist_width, 0,
                                    np.arange(self.d, dtype=np.int64), x)
        slots = []
        one = np.ones(1)
        row = np.ascontiguousarray(x[None, :])
        dm = self._dims
        for fam in self._families:
            block = np.zeros((fam.m, dm.state_size))
            for j in range(fam.m):
                _k.build_state_serial(block[j], master, self.config.p, row, one,
                                      np.full(1, j, dtype=np.int64),
                                      fam.streams.z, fam.streams.exp, fam.streams.rec,
                                      fam.streams.opt, fam.streams.cm1, fam.streams.cm2,
                                      dm.z_width, dm.t_samples, dm.s1, dm.t1, dm.b1,
                                      dm.s2, dm.t2, dm.b2)
            slots.append(block)
        return CoresetEntry(point_id, weight, dist_sk, slots)

    def ingest(self, x, point_id: int | None = None):
        """Sketch one point and fold it into the merge-and-reduce buffer."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.d,):
            raise ValueError(f"expected a point of dimension {self.d}, got {x.shape}")
        pid = self._n_seen if point_id is None else point_id
        entry = self._make_entry(x, pid, 1.0)
        self._n_seen += 1
        self._buffer.append(entry)
        self._note_peak()
        if len(self._buffer) >= self.config.capacity:
            block = self._buffer
            self._buffer = []
            self._carry(block, 0)

    def _reduce(self, entries: list[CoresetEntry]) -> list[CoresetEntry]:
        ctx = self._reduce_ctx.child(self._reduce_count)
        self._reduce_count += 1
        out = self._reducer(entries, self.config.capacity, ctx,
                            self._distance, self.config.p)
        if len(out) > self.config.capacity:
            raise OversizeReductionError(
                f"reducer produced {len(out)} entries over capacity {self.config.capacity}")
        return out

    def _carry(self, block: list[CoresetEntry], level: int):
        # binary-counter merge-and-reduce with a capped height: a carry
        # past the top level folds back into the top, so live entries are
        # bounded by capacity * (max_levels + 2) regardless of stream length
        while True:
            lvl = min(level, self.config.max_levels)
            if lvl >= len(self._levels):
                self._levels.extend([None] * (lvl + 1 - len(self._levels)))
            if self._levels[lvl] is None:
                self._levels[lvl] = block
                self._note_peak()
                return
            merged = self._levels[lvl] + block
            self._levels[lvl] = None
            self._note_peak(extra=sum(e.float_count() for e in merged))
            block = self._reduce(merged)
            level = lvl + 1

    def _note_peak(self, extra: int = 0):
        self._peak_floats = max(self._peak_floats, self.float_count() + extra)

    # -- reducer support ----------------------------------------------------

    def _distance(self, a: CoresetEntry, b: CoresetEntry) -> float:
        return _k.median_abs(a.dist_sketch - b.dist_sketch) / self._med_abs

    # -- accounting ----------------------------------------------------------

    def float_count(self) -> int:
        total = 0
        for e in self._buffer:
            total += e.float_count()
        for blk in self._levels:
            if blk:
                total += sum(e.float_count() for e in blk)
        return total

    @property
    def peak_float_count(self) -> int:
        return self._peak_floats

    @property
    def points_seen(self) -> int:
        return self._n_seen

    def entries(self) -> list[CoresetEntry]:
        """All live entries (unreduced), ordered by arrival id."""
        out = list(self._buffer)
        for blk in self._levels:
            if blk:
                out.extend(blk)
        out.sort(key=lambda e: e.point_id)
        return out

    def coreset(self) -> list[CoresetEntry]:
        """The query-time coreset: live entries folded down to capacity.

        Non-mutating; the fold consumes reduce sub-streams past the ones
        used so far, so repeated calls are bit-identical.
        """
        blocks = [list(self._buffer)] + [blk for blk in self._levels if blk]
        blocks = [b for b in blocks if b]
        if not blocks:
            return []
        counter = self._reduce_count
        acc = blocks[0]
        for blk in blocks[1:]:
            merged = acc + blk
            if len(merged) > self.config.capacity:
                ctx = self._reduce_ctx.child(counter)
                counter += 1
                merged = self._reducer(merged, self.config.capacity, ctx,
                                       self._distance, self.config.p)
                if len(merged) > self.config.capacity:
                    raise OversizeReductionError(
                        f"reducer produced {len(merged)} entries over capacity")
            acc = merged
        acc.sort(key=lambda e: e.point_id)
        return acc

    # -- queries -------------------------------------------------------------

    def cluster_cost(self, entries: list[CoresetEntry]) -> float:
        """Weighted cost estimate of one cluster of coreset entries."""
        members = sorted(entries, key=lambda e: e.point_id)
        m = len(members)
        if m == 0:
            raise ValueError("empty cluster")
        if m > self.config.capacity:
            raise EnumerationCapError(f"cluster of {m} exceeds capacity {self.config.capacity}")
        fam = self._families[m - 1]
        dm = self._dims
        allstates = np.stack([e.slots[m - 1] for e in members])
        w = np.array([e.weight for e in members])
        total_w = w.sum()
        lam = w / total_w
        lamp = lam ** (1.0 / self.config.p)
        out = np.empty(dm.state_size)
        scratch = np.empty(dm.state_size)
        _k.combine_cluster(allstates, np.arange(m, dtype=np.int64), lam, lamp,
                           out, scratch)
        est = _k.state_cost(out, np.uint64(self.ctx.master_seed), self.config.p,
                            self._med_abs, lamp, np.arange(m, dtype=np.int64),
                            fam.streams.z, fam.streams.exp, fam.streams.cm1,
                            fam.streams.cm2, fam.streams.opt, dm.d, dm.z_width,
                            dm.t_samples, dm.s1, dm.t1, dm.b1, dm.s2, dm.t2,
                            dm.b2, dm.grid_t)
        return float(est) * total_w

    def _subset_costs(self, entries: list[CoresetEntry], k: int) -> dict[int, float]:
        """Cost of every cluster that can appear in a <= k partition, by bitmask.

        Same-size clusters share one slot family and are priced in one
        batched kernel call.
        """
        from itertools import combinations

        s = len(entries)
        w = np.array([e.weight for e in entries])
        dm = self._dims
        costs: dict[int, float] = {}
        sizes = [s] if k == 1 else range(1, s + 1)
        for m in sizes:
            combos = list(combinations(range(s), m))
            members = np.array(combos, dtype=np.int64).reshape(len(combos), m)
            allstates = np.stack([e.slots[m - 1] for e in entries])
            fam = self._families[m - 1]
            vals = _k.cluster_costs_batch(
                allstates, members, w[members], np.uint64(self.ctx.master_seed),
                self.config.p, self._med_abs, fam.streams.z, fam.streams.exp,
                fam.streams.cm1, fam.streams.cm2, fam.streams.opt,
                dm.d, dm.z_width, dm.t_samples, dm.s1, dm.t1, dm.b1,
                dm.s2, dm.t2, dm.b2, dm.grid_t)
            for row, val in zip(combos, vals):
                mask = 0
                for i in row:
                    mask |= 1 << i
                costs[mask] = float(val)
        return costs

    def query_k_cost(self, k: int) -> KCostResult:
        """Minimum summed cluster cost over all partitions into <= k clusters."""
        entries = self.coreset()
        s = len(entries)
        if s == 0:
            raise ValueError("no points ingested")
        if not (1 <= k <= s):
            raise KRangeError(f"k must be in [1, {s}], got {k}")
        if s > MAX_ENUMERABLE:
            raise EnumerationCapError(
                f"coreset of {s} entries exceeds the enumeration cap {MAX_ENUMERABLE}")
        costs = self._subset_costs(entries, k)
        best = math.inf
        count = 0
        for a in rgs_partitions(s, k):
            count += 1
            cost = 0.0
            for members in partition_blocks(a):
                mask = 0
                for i in members:
                    mask |= 1 << int(i)
                cost += costs[mask]
                if cost >= best:
                    break
            if cost < best:
                best = cost
        return KCostResult(k=k, estimate=best, partition_count=count,
                           seed=self.ctx.master_seed)

    # -- merging and serialization --------------------------------------------

    def merge_from(self, other: "ClusteringStream") -> "ClusteringStream":
        """Union of coresets (one merge step), reducing if over capacity."""
        if self.ctx != other.ctx or self.config.fingerprint() != other.config.fingerprint():
            raise ValueError("streams differ in seed or config; cannot merge")
        merged = ClusteringStream(self.d, self.config, self.ctx)
        mine = self.coreset()
        theirs = other.coreset()
        ids = {e.point_id for e in mine}
        if ids & {e.point_id for e in theirs}:
            raise ValueError("overlapping point ids; partitions must be disjoint")
        union = mine + theirs
        merged._n_seen = self._n_seen + other._n_seen
        merged._reduce_count = max(self._reduce_count, other._reduce_count)
        if len(union) > self.config.capacity:
            ctx = merged._reduce_ctx.child(merged._reduce_count)
            merged._reduce_count += 1
            union = merged._reducer(union, self.config.capacity, ctx,
                                    merged._distance, self.config.p)
        union.sort(key=lambda e: e.point_id)
        merged._buffer = union
        merged._note_peak()
        return merged

    def to_bytes(self) -> bytes:
        entries = self.coreset()
        dm = self._dims
        head = struct.pack("<4sH QQ Q IIQQI",
                           _MAGIC, _VERSION,
                           self.ctx.master_seed, self.ctx.stream_id,
                           self.config.fingerprint(),
                           self.d, self.config.capacity,
                           self._n_seen, self._reduce_count, len(entries))
        parts = [head]
        for e in entries:
            parts.append(struct.pack("<Qd", e.point_id, e.weight))
            parts.append(e.dist_sketch.astype("<f8").tobytes())
            for block in e.slots:
                parts.append(block.astype("<f8").tobytes())
        return b"".join(parts)

    @staticmethod
    def from_bytes(data: bytes, config: StreamConfig, seed: int | SeedCtx) -> "ClusteringStream":
        ctx = seed if isinstance(seed, SeedCtx) else SeedCtx(seed)
        fmt = "<4sH QQ Q IIQQI"
        (magic, version, master, stream_id, fp, d, capacity,
         n_seen, reduce_count, n_entries) = struct.unpack_from(fmt, data, 0)
        if magic != _MAGIC or version != _VERSION:
            raise ValueError("bad stream frame header")
        if fp != config.fingerprint():
            raise ValueError("frame does not match the coordinator config")
        if (master, stream_id) != (ctx.master_seed, ctx.stream_id):
            raise ValueError("frame seed mismatch: public coin violated")
        out = ClusteringStream(d, config, ctx)
        out._n_seen = n_seen
        out._reduce_count = reduce_count
        off = struct.calcsize(fmt)
        dm = out._dims
        for _ in range(n_entries):
            pid, weight = struct.unpack_from("<Qd", data, off)
            off += 16
            dist_sk = np.frombuffer(data, dtype="<f8", count=config.dist_width,
                                    offset=off).copy()
            off += config.dist_width * 8
            slots = []
            for m in range(1, capacity + 1):
                cnt = m * dm.state_size
                block = np.frombuffer(data, dtype="<f8", count=cnt,
                                      offset=off).reshape(m, dm.state_size).copy()
                off += cnt * 8
                slots.append(block)
            out._buffer.append(CoresetEntry(pid, weight, dist_sk, slots))
        out._buffer.sort(key=lambda e: e.point_id)
        out._note_peak()
        return out
