"""Brute-force ground truth at desk scale.

Everything the sketches estimate is recomputed here exactly (or to
quadrature precision): per-coordinate one-dimensional minimization for
median costs, full partition enumeration for k-clustering costs, a double
loop for medoid costs, and the per-coordinate sampling distribution. The
estimators are validated against these, never against themselves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .partitions import MAX_ENUMERABLE, partition_blocks, rgs_partitions

MAX_POINTS = 200
MAX_DIM = 50

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class ExactInstance:
    """A small weighted point set with its norm exponent."""

    points: np.ndarray
    weights: np.ndarray
    p: float

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.ndim != 2:
            raise ValueError("points must be an [n, d] array")
        n, d = self.points.shape
        if n > MAX_POINTS or d > MAX_DIM:
            raise ValueError(f"oracle instances capped at n<={MAX_POINTS}, d<={MAX_DIM}")
        if self.weights is None:
            self.weights = np.full(n, 1.0 / n)
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.shape != (n,):
            raise ValueError("weights must align with points")
        if not (1.0 <= self.p <= 2.0):
            raise ValueError(f"p must be in [1, 2], got {self.p}")

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


def uniform_instance(points, p: float) -> ExactInstance:
    points = np.asarray(points, dtype=np.float64)
    return ExactInstance(points, np.full(points.shape[0], 1.0 / points.shape[0]), p)


def golden_section(f, lo: float, hi: float, tol: float = 1e-10) -> float:
    """Minimize a unimodal f on [lo, hi] to the given bracket width."""
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def coordinate_min_cost(values: np.ndarray, weights: np.ndarray, p: float) -> float:
    """min_c sum_i w_i |v_i - c|^p for one coordinate.

    Weighted median for p=1, weighted mean for p=2, golden-section search
    otherwise; the objective is convex for p >= 1 and its minimizer lies
    in [min v, max v].
    """
    if values.size == 0:
        return 0.0
    if p == 1.0:
        order = np.argsort(values, kind="stable")
        v, w = values[order], weights[order]
        cum = np.cumsum(w)
        med = v[np.searchsorted(cum, 0.5 * cum[-1])]
        return float(np.sum(w * np.abs(v - med)))
    if p == 2.0:
        mean = float(np.sum(weights * values) / np.sum(weights))
        return float(np.sum(weights * (values - mean) ** 2))

    def objective(c):
        return float(np.sum(weights * np.abs(values - c) ** p))

    lo, hi = float(values.min()), float(values.max())
    if hi <= lo:
        return 0.0
    tol = 1e-10 * max(1.0, hi - lo)
    best = golden_section(objective, lo, hi, tol)
    return objective(best)


def exact_median_cost(instance: ExactInstance) -> float:
    """min_y sum_i w_i ||x_i - y||_p^p, by independent per-coordinate solves."""
    total = 0.0
    for j in range(instance.d):
        total += coordinate_min_cost(instance.points[:, j], instance.weights, instance.p)
    return total


def exact_k_cost(instance: ExactInstance, k: int) -> float:
    """Minimum over all partitions into at most k blocks of summed block costs."""
    n = instance.n
    if n > MAX_ENUMERABLE:
        raise ValueError(f"exact_k_cost enumerates partitions only for n<={MAX_ENUMERABLE}")
    if not (1 <= k <= n):
        raise ValueError(f"k must be in [1, n], got {k}")
    cache: dict[int, float] = {}

    def block_cost(members: np.ndarray) -> float:
        mask = int(np.sum(1 << members))
        hit = cache.get(mask)
        if hit is None:
            sub = ExactInstance(instance.points[members], instance.weights[members], instance.p)
            hit = exact_median_cost(sub)
            cache[mask] = hit
        return hit

    best = math.inf
    for a in rgs_partitions(n, k):
        cost = 0.0
        for members in partition_blocks(a):
            cost += block_cost(members)
            if cost >= best:
                break
        if cost < best:
            best = cost
    return best


def exact_medoid_cost(instance: ExactInstance) -> float:
    """min over centers z restricted to the points of sum_i ||x_i - z||_p^p."""
    x = instance.points
    diffs = np.abs(x[:, None, :] - x[None, :, :]) ** instance.p
    costs = diffs.sum(axis=2).sum(axis=0)
    return float(costs.min())


def exact_sampling_dist(instance: ExactInstance) -> np.ndarray:
    """Per-coordinate mass distribution: Pr[j] proportional to sum_i w_i |x_ij|^p."""
    mass = np.sum(instance.weights[:, None] * np.abs(instance.points) ** instance.p, axis=0)
    z = mass.sum()
    if z == 0.0:
        raise ValueError("sampling distribution undefined for all-zero input")
    return mass / z


def center_instance(instance: ExactInstance) -> ExactInstance:
    mean = np.sum(instance.weights[:, None] * instance.points, axis=0)
    return ExactInstance(instance.points - mean, instance.weights, instance.p)


def verify_ratio_bounds(instance: ExactInstance) -> bool:
    """Check 2^-p <= min-cost_j / mass_j <= 1 for every coordinate, post-centering.

    Coordinates with zero mass (identical values equal to the mean) are
    skipped; both sides vanish there.
    """
    centered = center_instance(instance)
    p = centered.p
    lo = 2.0 ** (-p)
    for j in range(centered.d):
        col = centered.points[:, j]
        mass = float(np.sum(centered.weights * np.abs(col) ** p))
        if mass <= 0.0:
            continue
        ratio = coordinate_min_cost(col, centered.weights, p) / mass
        if not (lo - 1e-9 <= ratio <= 1.0 + 1e-9):
            return False
    return True


def stable_abs_quantile(p: float, q: float = 0.75, t_max: float = 4000.0,
                        n_pts: int = 400001) -> float:
    """Quantile of a standard symmetric p-stable variate by quadrature.

    Inverts the characteristic function exp(-|t|^p):
    F(x) = 1/2 + (1/pi) int_0^inf sin(tx) exp(-t^p) / t dt, then bisects.
    Independent of the sampling path; used to validate generator scale
    constants. The q=0.75 quantile is the median of |X|.
    """
    t = np.linspace(1e-12, t_max, n_pts)
    w = np.exp(-t ** p) / t
    h = t[1] - t[0]

    def cdf(x: float) -> float:
        integrand = np.sin(t * x) * w
        s = integrand[0] + integrand[-1] + 4.0 * integrand[1:-1:2].sum() \
            + 2.0 * integrand[2:-1:2].sum()
        return 0.5 + (h * s / 3.0) / math.pi

    lo, hi = 0.0, 50.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if cdf(mid) < q:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
