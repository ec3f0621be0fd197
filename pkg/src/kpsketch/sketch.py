"""Linear l_p sketches over weighted vectors.

A sketch config addresses an implicit s x n matrix of i.i.d. p-stable
entries through the counter-based generator; entries are regenerated on
demand and never stored. Applying the matrix to a weighted vector gives a
short SketchVector from which norms, shifted norms against a scalar
center, and the best scalar center over a bounded grid can be estimated.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .backend import kernels as _k
from .rng import (SeedCtx, StableParams, median_abs_stable, prf_unit,
                  sample_p_stable, _fmix64)

MIN_WIDTH = 8
MAX_EPS = 0.9


@dataclass(frozen=True)
class LpSketchConfig:
    """Addressing for an implicit s x n p-stable sketch matrix.

    columns bounds the valid column range when set; leave None for an
    unbounded (streaming) column space.
    """

    p: float
    width: int
    seed_ctx: SeedCtx
    columns: int | None = None

    def __post_init__(self):
        if not (1.0 <= self.p <= 2.0):
            raise ValueError(f"p must be in [1, 2], got {self.p}")
        if self.width < MIN_WIDTH:
            raise ValueError(f"width must be >= {MIN_WIDTH}, got {self.width}")

    @property
    def config_id(self) -> int:
        h = _fmix64(self.seed_ctx.master_seed ^ _fmix64(self.seed_ctx.stream_id))
        h = _fmix64(h ^ struct.unpack("<Q", struct.pack("<d", self.p))[0])
        return _fmix64(h ^ self.width)

    def entry(self, row: int, col: int) -> float:
        """The (row, col) matrix entry, derived on the fly."""
        self._check_col(col)
        theta_src, r_src = prf_unit(self.seed_ctx, row, col)
        return sample_p_stable(StableParams(self.p), theta_src, r_src)

    def _check_col(self, col: int):
        if col < 0 or (self.columns is not None and col >= self.columns):
            raise IndexError(f"column {col} outside configured range")


@dataclass
class SketchVector:
    """s accumulated sketch entries tied to the config that produced them."""

    entries: np.ndarray
    config: LpSketchConfig

    @property
    def config_id(self) -> int:
        return self.config.config_id

    def _check_same(self, other: "SketchVector"):
        if self.config_id != other.config_id:
            raise ValueError("sketch vectors come from different configs")

    def __add__(self, other: "SketchVector") -> "SketchVector":
        self._check_same(other)
        return SketchVector(self.entries + other.entries, self.config)

    def __sub__(self, other: "SketchVector") -> "SketchVector":
        self._check_same(other)
        return SketchVector(self.entries - other.entries, self.config)

    def scaled(self, c: float) -> "SketchVector":
        return SketchVector(self.entries * c, self.config)

    def copy(self) -> "SketchVector":
        return SketchVector(self.entries.copy(), self.config)

    def to_bytes(self) -> bytes:
        head = struct.pack("<QI", self.config_id, self.entries.size)
        return head + self.entries.astype("<f8").tobytes()

    @staticmethod
    def from_bytes(data: bytes, config: LpSketchConfig) -> "SketchVector":
        cid, s = struct.unpack_from("<QI", data, 0)
        if cid != config.config_id:
            raise ValueError("serialized sketch does not match config")
        entries = np.frombuffer(data, dtype="<f8", count=s, offset=12).copy()
        return SketchVector(entries, config)


def _as_index_value_arrays(values):
    idx = np.asarray([iv[0] for iv in values], dtype=np.int64)
    val = np.asarray([iv[1] for iv in values], dtype=np.float64)
    return idx, val


def apply_sketch(config: LpSketchConfig, values, weights=None) -> SketchVector:
    """Fold (index, value) pairs into the sketch: sum_i E(., i) w_i^{1/p} x_i.

    weights aligns positionally with values; None means unit weights.
    Accumulation is streaming-incremental in the given order.
    """
    idx, val = _as_index_value_arrays(values)
    for c in idx:
        config._check_col(int(c))
    if weights is not None:
        w = np.asarray(weights, dtype=np.float64)
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        val = val * w ** (1.0 / config.p)
    entries = _k.apply_weighted(np.uint64(config.seed_ctx.master_seed),
                                np.uint64(config.seed_ctx.stream_id),
                                config.p, config.width, 0, idx, val)
    return SketchVector(entries, config)


def ones_sketch(config: LpSketchConfig, weights) -> np.ndarray:
    """Sketch of the all-ones vector scaled by lambda^{1/p} per coordinate."""
    w = np.asarray(weights, dtype=np.float64)
    idx = np.arange(w.size, dtype=np.int64)
    return _k.apply_weighted(np.uint64(config.seed_ctx.master_seed),
                             np.uint64(config.seed_ctx.stream_id),
                             config.p, config.width, 0, idx, w ** (1.0 / config.p))


def estimate_norm(sk: SketchVector) -> float:
    """Median-of-magnitudes estimator, normalized by the stable median."""
    scale = median_abs_stable(StableParams(sk.config.p))
    return _k.median_abs(sk.entries) / scale


def estimate_shifted_norm(sk: SketchVector, config: LpSketchConfig, weights, y: float) -> float:
    """Estimate the weighted l_p distance to the constant vector y."""
    if y == 0.0:
        return estimate_norm(sk)
    shifted = sk.entries - y * ones_sketch(config, weights)
    scale = median_abs_stable(StableParams(config.p))
    return _k.median_abs(shifted) / scale


def center_grid(gamma: float, p: float, eps: float) -> np.ndarray:
    """Candidate centers: an even grid over [-4 gamma, 4 gamma].

    The candidate count is ceil(16 * 2^p / eps); both endpoints are
    included, so the spacing refines 8 gamma / count slightly. gamma = 0
    degenerates to the single candidate 0.
    """
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    eps = min(eps, MAX_EPS)
    if gamma == 0.0:
        return np.zeros(1)
    count = math.ceil(16.0 * 2.0 ** p / eps)
    return np.linspace(-4.0 * gamma, 4.0 * gamma, count)


def minimize_center(sk: SketchVector, config: LpSketchConfig, weights,
                    gamma: float, eps: float) -> float:
    """Smallest shifted-norm estimate over the candidate-center grid.

    gamma must be a norm estimate for the unshifted data; the true
    optimal center then lies inside [-4 gamma, 4 gamma] for centered
    weighted data, so the grid covers it.
    """
    grid = center_grid(gamma, config.p, eps)
    scale = median_abs_stable(StableParams(config.p))
    if grid.size == 1 and grid[0] == 0.0:
        return estimate_norm(sk)
    ones = ones_sketch(config, weights)
    best = math.inf
    for y in grid:
        est = _k.median_abs(sk.entries - y * ones) / scale
        if est < best:
            best = est
    return best
