"""Numba implementations of the hot kernels.

Every random quantity in the library is a pure function of a
``(master, stream)`` uint64 pair plus small integer cell indices, so any
matrix entry can be regenerated on demand instead of being stored. The
mixing function is the 64-bit murmur finalizer chained over stream, row
and column; it is shared bit-for-bit with the numpy twin module and with
the scalar reference in ``rng``.

Layout of a flat pipeline state vector (see ``mediancost``):

    [reps * z_width]                      stacked-norm sketch, one per rep
    then for rep in reps, sample in t_samples:
        [t1 * B1 * s1]                    bucketed recovery blocks
        [t2 * B2 * s2]                    bucketed center-search blocks
"""

import math

import numpy as np
from numba import njit, prange

NAME = "numba"

_M1 = np.uint64(0xFF51AFD7ED558CCD)
_M2 = np.uint64(0xC4CEB9FE1A85EC53)
_GOLD = np.uint64(0x9E3779B97F4A7C15)
_ROWC = np.uint64(0xD1B54A32D192ED03)
_COLC = np.uint64(0x94D049BB133111EB)
_S33 = np.uint64(33)
_S11 = np.uint64(11)
_TWO53 = 1.1102230246251565e-16  # 2**-53
_EDGE = 1e-12


@njit(cache=True, inline="always")
def _fmix64(z):
    z ^= z >> _S33
    z *= _M1
    z ^= z >> _S33
    z *= _M2
    z ^= z >> _S33
    return z


@njit(cache=True, inline="always")
def _base(master, stream):
    return _fmix64(_fmix64(master + _GOLD) ^ stream)


@njit(cache=True, inline="always")
def _cell(base, row, col):
    h = _fmix64(base ^ (np.uint64(row) * _ROWC + _GOLD))
    return _fmix64(h ^ (np.uint64(col) * _COLC + _GOLD))


@njit(cache=True, inline="always")
def _unit(h):
    # strictly inside (0,1): offset by half a grid step of the 53-bit lattice
    return (np.float64(h >> _S11) + 0.5) * _TWO53


@njit(cache=True, inline="always")
def _unit2(h):
    return _unit(_fmix64(h + _GOLD))


@njit(cache=True, inline="always")
def _stable_from_units(p, t_src, r_src):
    if t_src < _EDGE:
        t_src = _EDGE
    elif t_src > 1.0 - _EDGE:
        t_src = 1.0 - _EDGE
    if r_src < _EDGE:
        r_src = _EDGE
    elif r_src > 1.0 - _EDGE:
        r_src = 1.0 - _EDGE
    theta = (t_src - 0.5) * math.pi
    if p == 1.0:
        return math.tan(theta)
    w = -math.log(r_src)
    if p == 2.0:
        return 2.0 * math.sin(theta) * math.sqrt(w)
    a = math.sin(p * theta) / math.cos(theta) ** (1.0 / p)
    b = (math.cos(theta * (1.0 - p)) / w) ** ((1.0 - p) / p)
    return a * b


@njit(cache=True, inline="always")
def _stable_cell(base, row, col, p):
    h = _cell(base, row, col)
    return _stable_from_units(p, _unit(h), _unit2(h))


@njit(cache=True)
def unit_pair_matrix(master, stream, row0, n_rows, col0, n_cols):
    u = np.empty((n_rows, n_cols))
    v = np.empty((n_rows, n_cols))
    b = _base(master, stream)
    for r in range(n_rows):
        for c in range(n_cols):
            h = _cell(b, row0 + r, col0 + c)
            u[r, c] = _unit(h)
            v[r, c] = _unit2(h)
    return u, v


@njit(cache=True)
def stable_matrix(master, stream, p, row0, n_rows, col0, n_cols):
    out = np.empty((n_rows, n_cols))
    b = _base(master, stream)
    for r in range(n_rows):
        for c in range(n_cols):
            out[r, c] = _stable_cell(b, row0 + r, col0 + c, p)
    return out


@njit(cache=True)
def stable_vector(master, stream, p, n):
    out = np.empty(n)
    b = _base(master, stream)
    for i in range(n):
        out[i] = _stable_cell(b, 0, i, p)
    return out


@njit(cache=True)
def exp_vector(master, stream, n):
    out = np.empty(n)
    b = _base(master, stream)
    for i in range(n):
        out[i] = -math.log(_unit(_cell(b, 0, i)))
    return out


@njit(cache=True)
def uniform_vector(master, stream, n):
    out = np.empty(n)
    b = _base(master, stream)
    for i in range(n):
        out[i] = _unit(_cell(b, 0, i))
    return out


@njit(cache=True)
def bucket_matrix(master, stream, n_rows, d, n_buckets):
    out = np.empty((n_rows, d), dtype=np.int64)
    nb = np.uint64(n_buckets)
    b = _base(master, stream)
    for r in range(n_rows):
        for j in range(d):
            out[r, j] = np.int64(_cell(b, r, j) % nb)
    return out


@njit(cache=True)
def apply_weighted(master, stream, p, s, row0, cols, vals):
    """Accumulate sum_i E(row, cols[i]) * vals[i] over s rows."""
    out = np.zeros(s)
    b = _base(master, stream)
    for i in range(cols.size):
        v = vals[i]
        if v != 0.0:
            c = cols[i]
            for r in range(s):
                out[r] += _stable_cell(b, row0 + r, c, p) * v
    return out


@njit(cache=True, inline="always")
def _median_sorted(a, n):
    h = n // 2
    if n % 2 == 1:
        return a[h]
    return 0.5 * (a[h - 1] + a[h])


@njit(cache=True)
def median_abs(vec):
    n = vec.size
    tmp = np.empty(n)
    for i in range(n):
        tmp[i] = abs(vec[i])
    tmp.sort()
    return _median_sorted(tmp, n)


def _build_state_impl(state, master, p, points, lamp, colidx,
                      z_streams, exp_streams, rec_streams, opt_streams,
                      cm1_streams, cm2_streams,
                      z_width, t_samples, s1, t1, b1, s2, t2, b2):
    """Add the contribution of `points` (rows scaled by lamp) into `state`.

    colidx[i] is the sketch column the i-th row occupies; the same kernel
    therefore serves batch ingestion (colidx = 0..n-1) and single-point
    slot states (one row, colidx = slot). Parallel instances write
    disjoint state slices, so the result does not depend on scheduling;
    the serial variant computes bit-identical values.
    """
    n, d = points.shape
    reps = z_streams.size
    for rep in prange(reps):
        off = rep * z_width
        bz = _base(master, z_streams[rep])
        for i in range(n):
            w = lamp[i]
            if w != 0.0:
                cbase = colidx[i] * d
                for c in range(d):
                    v = w * points[i, c]
                    if v != 0.0:
                        for r in range(z_width):
                            state[off + r] += _stable_cell(bz, r, cbase + c, p) * v
    t1sz = t1 * b1 * s1
    t2sz = t2 * b2 * s2
    table0 = reps * z_width
    for k in prange(reps * t_samples):
        off = table0 + k * (t1sz + t2sz)
        z1 = np.empty(s1)
        z2 = np.empty(s2)
        bexp = _base(master, exp_streams[k])
        brec = _base(master, rec_streams[k])
        bopt = _base(master, opt_streams[k])
        bh1 = _base(master, cm1_streams[k])
        bh2 = _base(master, cm2_streams[k])
        for c in range(d):
            invu = (-math.log(_unit(_cell(bexp, 0, c)))) ** (-1.0 / p)
            for r in range(s1):
                z1[r] = 0.0
            for r in range(s2):
                z2[r] = 0.0
            touched = False
            for i in range(n):
                v = lamp[i] * points[i, c] * invu
                if v != 0.0:
                    touched = True
                    col = colidx[i]
                    r1 = c * s1
                    for r in range(s1):
                        z1[r] += _stable_cell(brec, r1 + r, col, p) * v
                    r2 = c * s2
                    for r in range(s2):
                        z2[r] += _stable_cell(bopt, r2 + r, col, p) * v
            if touched:
                for tr in range(t1):
                    bkt = np.int64(_cell(bh1, tr, c) % np.uint64(b1))
                    pos = off + tr * (b1 * s1) + bkt * s1
                    for r in range(s1):
                        state[pos + r] += z1[r]
                base2 = off + t1sz
                for tr in range(t2):
                    bkt = np.int64(_cell(bh2, tr, c) % np.uint64(b2))
                    pos = base2 + tr * (b2 * s2) + bkt * s2
                    for r in range(s2):
                        state[pos + r] += z2[r]



build_state = njit(cache=True, parallel=True)(_build_state_impl)
build_state_serial = njit(cache=True)(_build_state_impl)

@njit(cache=True)
def _recover_alphas(state, off1, bh1, med_abs_p, d, s1, t1, b1, alphas, tmp, rows_tmp):
    for c in range(d):
        for tr in range(t1):
            bkt = np.int64(_cell(bh1, tr, c) % np.uint64(b1))
            pos = off1 + tr * (b1 * s1) + bkt * s1
            for r in range(s1):
                tmp[r] = abs(state[pos + r])
            tmp.sort()
            rows_tmp[tr] = _median_sorted(tmp, s1) / med_abs_p
        rows_tmp.sort()
        alphas[c] = _median_sorted(rows_tmp, t1)


@njit(cache=True)
def recover_alphas(state, off1, master, cm1_stream, med_abs_p, d, s1, t1, b1):
    alphas = np.empty(d)
    tmp = np.empty(s1)
    rows_tmp = np.empty(t1)
    _recover_alphas(state, off1, _base(master, cm1_stream), med_abs_p,
                    d, s1, t1, b1, alphas, tmp, rows_tmp)
    return alphas


@njit(cache=True)
def _triple_impl(state, off1, off2, master, exp_stream, cm1_stream, cm2_stream,
                 opt_stream, p, med_abs_p, lamp, colidx, d,
                 s1, t1, b1, s2, t2, b2, grid_t,
                 alphas, tmp1, rows1, ones, tmp2, rows2):
    bh1 = _base(master, cm1_stream)
    _recover_alphas(state, off1, bh1, med_abs_p, d, s1, t1, b1, alphas, tmp1, rows1)
    j_hat = 0
    best = alphas[0]
    for c in range(1, d):
        if alphas[c] > best:
            best = alphas[c]
            j_hat = c
    gamma = best
    bexp = _base(master, exp_stream)
    u_j = -math.log(_unit(_cell(bexp, 0, j_hat)))
    upow = u_j ** (1.0 / p)
    alpha_hat = gamma * upow

    bopt = _base(master, opt_stream)
    r0 = j_hat * s2
    for r in range(s2):
        acc = 0.0
        for i in range(lamp.size):
            if lamp[i] != 0.0:
                acc += _stable_cell(bopt, r0 + r, colidx[i], p) * lamp[i]
        ones[r] = acc

    # Cross-fit the center search: the first half of the sketch entries
    # locates the best candidate, the disjoint second half evaluates it
    # (and y = 0 for the ratio denominator). Without the split, the argmin
    # over candidates rides the dips of the shared estimation noise and
    # biases the minimum low; with it, selection noise and evaluation
    # noise are independent, and numerator/denominator share the same
    # entries so their noise largely cancels in the ratio.
    bh2 = _base(master, cm2_stream)
    half = s2 // 2
    n_grid = grid_t if gamma > 0.0 else 1
    lo = -4.0 * gamma
    step = 0.0
    if n_grid > 1:
        step = 8.0 * gamma / (n_grid - 1)
    y_best = 0.0
    best_sel = np.inf
    for g in range(n_grid):
        y = lo + step * g if n_grid > 1 else 0.0
        for tr in range(t2):
            bkt = np.int64(_cell(bh2, tr, j_hat) % np.uint64(b2))
            pos = off2 + tr * (b2 * s2) + bkt * s2
            for r in range(half):
                tmp2[r] = abs(state[pos + r] - y * ones[r])
            sub = tmp2[:half]
            sub.sort()
            rows2[tr] = _median_sorted(sub, half)
        rows2.sort()
        est = _median_sorted(rows2, t2)
        if est < best_sel:
            best_sel = est
            y_best = y
    f0 = 0.0
    beta_y = 0.0
    nhalf = s2 - half
    for which in range(2):
        y = y_best if which == 0 else 0.0
        for tr in range(t2):
            bkt = np.int64(_cell(bh2, tr, j_hat) % np.uint64(b2))
            pos = off2 + tr * (b2 * s2) + bkt * s2
            for r in range(nhalf):
                tmp2[r] = abs(state[pos + half + r] - y * ones[half + r])
            sub = tmp2[:nhalf]
            sub.sort()
            rows2[tr] = _median_sorted(sub, nhalf) / med_abs_p
        rows2.sort()
        est = _median_sorted(rows2, t2)
        if which == 0:
            beta_y = est
        else:
            f0 = est
    if beta_y > f0:
        beta_y = f0  # y = 0 is always a feasible center
    beta_hat = beta_y * upow
    return j_hat, gamma, alpha_hat, beta_hat, beta_y, f0


@njit(cache=True)
def sample_triple(state, off1, off2, master, exp_stream, cm1_stream, cm2_stream,
                  opt_stream, p, med_abs_p, lamp, colidx, d,
                  s1, t1, b1, s2, t2, b2, grid_t):
    alphas = np.empty(d)
    tmp1 = np.empty(s1)
    rows1 = np.empty(t1)
    ones = np.empty(s2)
    tmp2 = np.empty(s2)
    rows2 = np.empty(t2)
    j_hat, a_y, a_hat, b_hat, beta_y, f0 = _triple_impl(
        state, off1, off2, master, exp_stream, cm1_stream,
        cm2_stream, opt_stream, p, med_abs_p, lamp, colidx, d,
        s1, t1, b1, s2, t2, b2, grid_t,
        alphas, tmp1, rows1, ones, tmp2, rows2)
    return j_hat, a_y, a_hat, b_hat


def _sample_ratios_impl(state, master, p, med_abs_p, lamp, colidx,
                   exp_streams, cm1_streams, cm2_streams, opt_streams,
                   d, z_width, reps, t_samples, s1, t1, b1, s2, t2, b2, grid_t):
    clamp_lo = 2.0 ** (-p)
    t1sz = t1 * b1 * s1
    t2sz = t2 * b2 * s2
    table0 = reps * z_width
    ratios = np.empty(reps * t_samples)
    for k in prange(reps * t_samples):
        off = table0 + k * (t1sz + t2sz)
        alphas = np.empty(d)
        tmp1 = np.empty(s1)
        rows1 = np.empty(t1)
        ones = np.empty(s2)
        tmp2 = np.empty(s2)
        rows2 = np.empty(t2)
        j_hat, a_y, a_hat, b_hat, beta_y, f0 = _triple_impl(
            state, off, off + t1sz, master, exp_streams[k], cm1_streams[k],
            cm2_streams[k], opt_streams[k], p, med_abs_p, lamp, colidx, d,
            s1, t1, b1, s2, t2, b2, grid_t,
            alphas, tmp1, rows1, ones, tmp2, rows2)
        if f0 <= 0.0:
            ratio = 1.0
        else:
            ratio = (beta_y / f0) ** p
            if ratio < clamp_lo:
                ratio = clamp_lo
            elif ratio > 1.0:
                ratio = 1.0
        ratios[k] = ratio
    return ratios



sample_ratios = njit(cache=True, parallel=True)(_sample_ratios_impl)
sample_ratios_serial = njit(cache=True)(_sample_ratios_impl)

@njit(cache=True)
def _finish_cost(state, ratios, z_streams, z_width, t_samples, med_abs_p, p):
    reps = z_streams.size
    ztmp = np.empty(z_width)
    rep_est = np.empty(reps)
    for rep in range(reps):
        zoff = rep * z_width
        for r in range(z_width):
            ztmp[r] = abs(state[zoff + r])
        ztmp.sort()
        z_hat = (_median_sorted(ztmp, z_width) / med_abs_p) ** p
        acc = 0.0
        for ell in range(t_samples):
            acc += ratios[rep * t_samples + ell]
        rep_est[rep] = z_hat * (acc / t_samples)
    rep_est.sort()
    return _median_sorted(rep_est, reps)


@njit(cache=True)
def _state_cost_jit(state, master, p, med_abs_p, lamp, colidx,
                    z_streams, exp_streams, cm1_streams, cm2_streams, opt_streams,
                    d, z_width, t_samples, s1, t1, b1, s2, t2, b2, grid_t):
    ratios = sample_ratios_serial(
        state, master, p, med_abs_p, lamp, colidx,
        exp_streams, cm1_streams, cm2_streams, opt_streams,
        d, z_width, z_streams.size, t_samples, s1, t1, b1, s2, t2, b2, grid_t)
    return _finish_cost(state, ratios, z_streams, z_width, t_samples, med_abs_p, p)


def state_cost(state, master, p, med_abs_p, lamp, colidx,
               z_streams, exp_streams, cm1_streams, cm2_streams, opt_streams,
               d, z_width, t_samples, s1, t1, b1, s2, t2, b2, grid_t):
    """Full cost estimate from a state vector (python dispatch over variants).

    The parallel ratios kernel only pays off for many sample instances;
    small states (cluster evaluations) take the serial path. Both compute
    identical values.
    """
    reps = z_streams.size
    if reps * t_samples >= 64:
        ratios = sample_ratios(state, master, p, med_abs_p, lamp, colidx,
                               exp_streams, cm1_streams, cm2_streams, opt_streams,
                               d, z_width, reps, t_samples, s1, t1, b1, s2, t2, b2,
                               grid_t)
        return _finish_cost(state, ratios, z_streams, z_width, t_samples,
                            med_abs_p, p)
    return _state_cost_jit(state, master, p, med_abs_p, lamp, colidx,
                           z_streams, exp_streams, cm1_streams, cm2_streams,
                           opt_streams, d, z_width, t_samples, s1, t1, b1,
                           s2, t2, b2, grid_t)


@njit(cache=True, parallel=True)
def cluster_costs_batch(allstates, members, wmat, master, p, med_abs_p,
                        z_streams, exp_streams, cm1_streams, cm2_streams,
                        opt_streams, d, z_width, t_samples,
                        s1, t1, b1, s2, t2, b2, grid_t):
    """Weighted cluster-cost estimates for a batch of same-size clusters.

    allstates: [n_entries, m, F] slot states; members: [B, m] entry rows
    per cluster, sorted by arrival id; wmat: [B, m] member weights.
    Each cluster is the weighted centered recombination of its members'
    slot states, then priced by the full pipeline estimator and rescaled
    by its total weight.
    """
    bsz, m = members.shape
    f = allstates.shape[2]
    out = np.empty(bsz)
    for b in prange(bsz):
        state = np.zeros(f)
        scratch = np.empty(f)
        lam = np.empty(m)
        lamp = np.empty(m)
        total = 0.0
        for t in range(m):
            total += wmat[b, t]
        for t in range(m):
            lam[t] = wmat[b, t] / total
            lamp[t] = lam[t] ** (1.0 / p)
        for t in range(m):
            for r in range(f):
                scratch[r] = 0.0
            for h in range(m):
                wh = lam[h]
                row = allstates[members[b, h], t]
                for r in range(f):
                    scratch[r] += wh * row[r]
            wt = lamp[t]
            row = allstates[members[b, t], t]
            for r in range(f):
                state[r] += wt * (row[r] - scratch[r])
        colidx = np.arange(m)
        cost = _state_cost_jit(state, master, p, med_abs_p, lamp, colidx,
                               z_streams, exp_streams, cm1_streams, cm2_streams,
                               opt_streams, d, z_width, t_samples,
                               s1, t1, b1, s2, t2, b2, grid_t)
        out[b] = cost * total
    return out


@njit(cache=True)
def state_z(state, z_width, rep, med_abs_p, p):
    ztmp = np.empty(z_width)
    zoff = rep * z_width
    for r in range(z_width):
        ztmp[r] = abs(state[zoff + r])
    ztmp.sort()
    return (_median_sorted(ztmp, z_width) / med_abs_p) ** p


@njit(cache=True)
def combine_cluster(allstates, members, lam, lamp, out, scratch):
    """Weighted centered recombination of slot states.

    allstates: [n_entries, m, F]; members: [m] row indices sorted by
    arrival id; out accumulates sum_t lamp[t] * (state[mem[t], t]
    - sum_h lam[h] * state[mem[h], t]).
    """
    m = members.size
    f = out.size
    for r in range(f):
        out[r] = 0.0
    for t in range(m):
        for r in range(f):
            scratch[r] = 0.0
        for h in range(m):
            wh = lam[h]
            row = allstates[members[h], t]
            for r in range(f):
                scratch[r] += wh * row[r]
        wt = lamp[t]
        row = allstates[members[t], t]
        for r in range(f):
            out[r] += wt * (row[r] - scratch[r])


@njit(cache=True)
def medoid_pass1(master, stream, p, points, s):
    n, d = points.shape
    out = np.zeros(s)
    b = _base(master, stream)
    for i in range(n):
        cbase = i * d
        for c in range(d):
            v = points[i, c]
            if v != 0.0:
                for r in range(s):
                    out[r] += _stable_cell(b, r, cbase + c, p) * v
    return out


@njit(cache=True)
def medoid_score(master, stream, p, sk, x, n, med_abs_p):
    s = sk.size
    d = x.size
    tmp = sk.copy()
    b = _base(master, stream)
    for h in range(n):
        cbase = h * d
        for c in range(d):
            v = x[c]
            if v != 0.0:
                for r in range(s):
                    tmp[r] -= _stable_cell(b, r, cbase + c, p) * v
    return median_abs(tmp) / med_abs_p
