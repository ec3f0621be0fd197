import numpy as np
import pytest


def two_blobs(rng, n, d, sep):
    """Two equal gaussian blobs separated by `sep` along every coordinate."""
    half = n // 2
    a = rng.normal(size=(half, d))
    b = rng.normal(size=(n - half, d)) + sep
    return np.vstack([a, b])


def ks_critical(n, alpha=1e-3, m=None):
    """Kolmogorov-Smirnov rejection threshold at significance alpha.

    One-sample when m is None, else two-sample with sizes (n, m).
    """
    c = np.sqrt(-np.log(alpha / 2.0) / 2.0)
    if m is None:
        return c / np.sqrt(n)
    return c * np.sqrt((n + m) / (n * m))


def ks_statistic_one_sample(samples, cdf):
    xs = np.sort(samples)
    f = cdf(xs)
    n = xs.size
    hi = np.arange(1, n + 1) / n
    lo = np.arange(0, n) / n
    return max(np.max(hi - f), np.max(f - lo))


def ks_statistic_two_sample(a, b):
    sa, sb = np.sort(a), np.sort(b)
    grid = np.concatenate([sa, sb])
    fa = np.searchsorted(sa, grid, side="right") / sa.size
    fb = np.searchsorted(sb, grid, side="right") / sb.size
    return np.max(np.abs(fa - fb))


@pytest.fixture(scope="session")
def gauss_points():
    rng = np.random.default_rng(20240817)
    return rng.normal(size=(20, 10))
