"""Deterministic, counter-addressable randomness.

All variates in the library derive from a keyed hash of
``(master_seed, stream_id, row, col)``: uniform pairs come straight from
the hash, exponentials by inversion, and p-stable variates through the
Chambers-Mallows-Stuck transform of the uniform pair. Nothing is ever
stored; regenerating a cell always yields the same value, which is what
makes the linear sketches mergeable and replayable.

The scalar functions here are the reference implementation; the vector
kernels in the selected backend compute the same integer mixing
bit-for-bit (covered by tests).
"""

from __future__ import annotations

import math
import statistics
import threading
from dataclasses import dataclass

import numpy as np

from .backend import kernels as _k

_MASK = (1 << 64) - 1
_M1 = 0xFF51AFD7ED558CCD
_M2 = 0xC4CEB9FE1A85EC53
_GOLD = 0x9E3779B97F4A7C15
_ROWC = 0xD1B54A32D192ED03
_COLC = 0x94D049BB133111EB
_TWO53 = 2.0 ** -53
_EDGE = 1e-12

# fixed internal seed for the cached median-scale Monte Carlo runs
_SCALE_SEED = 0x5EEDFACE0C0FFEE1
_SCALE_SAMPLES = 10_000_000


def _fmix64(z: int) -> int:
    z &= _MASK
    z ^= z >> 33
    z = (z * _M1) & _MASK
    z ^= z >> 33
    z = (z * _M2) & _MASK
    z ^= z >> 33
    return z


def _hash_base(master: int, stream: int) -> int:
    return _fmix64(_fmix64((master + _GOLD) & _MASK) ^ stream)


def _hash_cell(base: int, row: int, col: int) -> int:
    h = _fmix64(base ^ ((row * _ROWC + _GOLD) & _MASK))
    return _fmix64(h ^ ((col * _COLC + _GOLD) & _MASK))


def _to_unit(h: int) -> float:
    return ((h >> 11) + 0.5) * _TWO53


@dataclass(frozen=True)
class SeedCtx:
    """Addressable randomness source: a master seed plus a stream label.

    Distinct stream ids give statistically independent streams; the same
    (master_seed, stream_id, row, col) always yields the same variates.
    """

    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        object.__setattr__(self, "master_seed", self.master_seed & _MASK)
        object.__setattr__(self, "stream_id", self.stream_id & _MASK)

    def child(self, tag: int) -> "SeedCtx":
        """Derive an independent sub-stream for the given small-int tag."""
        sub = _fmix64(self.stream_id ^ _fmix64((tag + _GOLD) & _MASK))
        return SeedCtx(self.master_seed, sub)


# stream tags used across the library (values arbitrary but frozen)
TAG_Z = 1
TAG_REC = 2
TAG_OPT = 3
TAG_EXP = 4
TAG_CM_REC = 5
TAG_CM_OPT = 6
TAG_MEDOID = 7
TAG_DIST = 8
TAG_REDUCE = 9
TAG_FAMILY = 10
TAG_REP = 11
TAG_SAMPLE = 12
TAG_SKETCH = 13
TAG_GEN = 14
TAG_NOISE = 15


@dataclass(frozen=True)
class StableParams:
    """Norm exponent for the stable generator; p in (0, 2].

    The sketches restrict themselves to p in [1, 2]; the generator keeps
    the full range so its distributional identities can be tested where
    they are known in closed form.
    """

    p: float

    def __post_init__(self):
        if not (0.0 < self.p <= 2.0):
            raise ValueError(f"p must be in (0, 2], got {self.p}")


def prf_unit(ctx: SeedCtx, row: int, col: int) -> tuple[float, float]:
    """Return the (theta-source, r-source) uniform pair for a cell."""
    h = _hash_cell(_hash_base(ctx.master_seed, ctx.stream_id), row, col)
    return _to_unit(h), _to_unit(_fmix64((h + _GOLD) & _MASK))


def stable_magnitude(p: float, r: float, theta: float) -> float:
    """Magnitude transform of the stable generator on (r, theta).

    Defined on (0,1) x (0, pi/2); for theta drawn uniformly on the half
    interval this is the distribution of |X| for X standard p-stable.
    """
    w = math.log(1.0 / r)
    if p == 1.0:
        return math.tan(theta)
    if p == 2.0:
        return 2.0 * math.sin(theta) * math.sqrt(w)
    return (math.sin(p * theta) / math.cos(theta) ** (1.0 / p)
            * (math.cos(theta * (1.0 - p)) / w) ** ((1.0 - p) / p))


def sample_p_stable(params: StableParams, theta_src: float, r_src: float) -> float:
    """Map a uniform pair to a standard p-stable variate.

    theta_src parametrizes the angle theta = (theta_src - 1/2) * pi; p=1
    reduces to tan(theta) (Cauchy) and p=2 to a polar-transform Gaussian
    with variance 2 (characteristic function exp(-t^2)).
    """
    p = params.p
    t = min(max(theta_src, _EDGE), 1.0 - _EDGE)
    r = min(max(r_src, _EDGE), 1.0 - _EDGE)
    theta = (t - 0.5) * math.pi
    if p == 1.0:
        return math.tan(theta)
    w = -math.log(r)
    if p == 2.0:
        return 2.0 * math.sin(theta) * math.sqrt(w)
    a = math.sin(p * theta) / math.cos(theta) ** (1.0 / p)
    b = (math.cos(theta * (1.0 - p)) / w) ** ((1.0 - p) / p)
    return a * b


def sample_exponential(u: float) -> float:
    """Exp(1) by inversion: -ln(u) for u in (0,1), clamped at the edges."""
    u = min(max(u, _EDGE), 1.0 - _EDGE)
    return -math.log(u)


def stable_vector(ctx: SeedCtx, p: float, n: int) -> np.ndarray:
    """n independent standard p-stable variates from cells (0, 0..n-1)."""
    return _k.stable_vector(np.uint64(ctx.master_seed), np.uint64(ctx.stream_id), p, n)


def exponential_vector(ctx: SeedCtx, n: int) -> np.ndarray:
    """n independent Exp(1) variates from cells (0, 0..n-1)."""
    return _k.exp_vector(np.uint64(ctx.master_seed), np.uint64(ctx.stream_id), n)


def uniform_vector(ctx: SeedCtx, n: int) -> np.ndarray:
    return _k.uniform_vector(np.uint64(ctx.master_seed), np.uint64(ctx.stream_id), n)


_NORMAL_Q3 = statistics.NormalDist().inv_cdf(0.75)

_scale_cache: dict[float, float] = {}
_scale_lock = threading.Lock()


def median_abs_stable(params: StableParams) -> float:
    """Median of |X| for X standard p-stable; the estimator's scale unit.

    Closed forms: 1 for p=1 (Cauchy) and sqrt(2) times the third standard
    normal quartile for p=2. Every other p uses a cached Monte Carlo
    median over 1e7 draws from a fixed internal seed, so the constant is
    reproducible. (The magnitude transform evaluated at its coordinate
    medians (1/2, pi/4) is NOT the median of the output for p != 1 --
    medians do not compose through a two-argument function -- so no
    further closed form is available.)
    """
    p = params.p
    if p == 1.0:
        return 1.0
    if p == 2.0:
        return math.sqrt(2.0) * _NORMAL_Q3
    with _scale_lock:
        cached = _scale_cache.get(p)
        if cached is None:
            ctx = SeedCtx(_SCALE_SEED).child(TAG_NOISE)
            draws = stable_vector(ctx, p, _SCALE_SAMPLES)
            cached = float(np.median(np.abs(draws)))
            _scale_cache[p] = cached
    return cached
