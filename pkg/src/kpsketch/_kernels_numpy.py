"""Pure-numpy implementations of the hot kernels.

Signature-compatible twin of ``_kernels_numba``; selected via the
``KPSKETCH_BACKEND`` environment variable (see ``backend``). The integer
mixing is identical bit-for-bit; floating-point reductions are vectorized
and may disagree with the numba loops in the last few ulps.
"""

import numpy as np

NAME = "numpy"

_M1 = np.uint64(0xFF51AFD7ED558CCD)
_M2 = np.uint64(0xC4CEB9FE1A85EC53)
_GOLD = np.uint64(0x9E3779B97F4A7C15)
_ROWC = np.uint64(0xD1B54A32D192ED03)
_COLC = np.uint64(0x94D049BB133111EB)
_S33 = np.uint64(33)
_S11 = np.uint64(11)
_TWO53 = 1.1102230246251565e-16  # 2**-53
_EDGE = 1e-12


def _fmix64(z):
    z = z ^ (z >> _S33)
    z = z * _M1
    z = z ^ (z >> _S33)
    z = z * _M2
    z = z ^ (z >> _S33)
    return z


def _base(master, stream):
    arr = np.array([master], dtype=np.uint64)
    st = np.array([stream], dtype=np.uint64)
    return _fmix64(_fmix64(arr + _GOLD) ^ st)[0]


def _cells(base, rows, cols):
    """Hash grid for rows[:, None] x cols[None, :] (uint64 arrays)."""
    h = _fmix64(base ^ (rows.astype(np.uint64) * _ROWC + _GOLD))
    return _fmix64(h[:, None] ^ (cols.astype(np.uint64) * _COLC + _GOLD)[None, :])


def _unit(h):
    return ((h >> _S11).astype(np.float64) + 0.5) * _TWO53


def _unit2(h):
    return _unit(_fmix64(h + _GOLD))


def _stable_from_units(p, t_src, r_src):
    t_src = np.clip(t_src, _EDGE, 1.0 - _EDGE)
    r_src = np.clip(r_src, _EDGE, 1.0 - _EDGE)
    theta = (t_src - 0.5) * np.pi
    if p == 1.0:
        return np.tan(theta)
    w = -np.log(r_src)
    if p == 2.0:
        return 2.0 * np.sin(theta) * np.sqrt(w)
    a = np.sin(p * theta) / np.cos(theta) ** (1.0 / p)
    b = (np.cos(theta * (1.0 - p)) / w) ** ((1.0 - p) / p)
    return a * b


def _stable_cells(base, rows, cols, p):
    h = _cells(base, rows, cols)
    return _stable_from_units(p, _unit(h), _unit2(h))


def unit_pair_matrix(master, stream, row0, n_rows, col0, n_cols):
    rows = np.arange(row0, row0 + n_rows, dtype=np.uint64)
    cols = np.arange(col0, col0 + n_cols, dtype=np.uint64)
    h = _cells(_base(master, stream), rows, cols)
    return _unit(h), _unit2(h)


def stable_matrix(master, stream, p, row0, n_rows, col0, n_cols):
    rows = np.arange(row0, row0 + n_rows, dtype=np.uint64)
    cols = np.arange(col0, col0 + n_cols, dtype=np.uint64)
    return _stable_cells(_base(master, stream), rows, cols, p)


def stable_vector(master, stream, p, n):
    return stable_matrix(master, stream, p, 0, 1, 0, n)[0]


def exp_vector(master, stream, n):
    rows = np.zeros(1, dtype=np.uint64)
    cols = np.arange(n, dtype=np.uint64)
    return -np.log(_unit(_cells(_base(master, stream), rows, cols)))[0]


def uniform_vector(master, stream, n):
    rows = np.zeros(1, dtype=np.uint64)
    cols = np.arange(n, dtype=np.uint64)
    return _unit(_cells(_base(master, stream), rows, cols))[0]


def bucket_matrix(master, stream, n_rows, d, n_buckets):
    rows = np.arange(n_rows, dtype=np.uint64)
    cols = np.arange(d, dtype=np.uint64)
    h = _cells(_base(master, stream), rows, cols)
    return (h % np.uint64(n_buckets)).astype(np.int64)


def apply_weighted(master, stream, p, s, row0, cols, vals):
    rows = np.arange(row0, row0 + s, dtype=np.uint64)
    e = _stable_cells(_base(master, stream), rows, cols.astype(np.uint64), p)
    return e @ vals


def median_abs(vec):
    return float(np.median(np.abs(vec)))


def _state_dims(z_width, t_samples, s1, t1, b1, s2, t2, b2):
    t1sz = t1 * b1 * s1
    t2sz = t2 * b2 * s2
    return t1sz, t2sz


def build_state(state, master, p, points, lamp, colidx,
                z_streams, exp_streams, rec_streams, opt_streams,
                cm1_streams, cm2_streams,
                z_width, t_samples, s1, t1, b1, s2, t2, b2):
    n, d = points.shape
    reps = z_streams.size
    scaled = points * lamp[:, None]
    zcols = (colidx[:, None] * d + np.arange(d)[None, :]).ravel().astype(np.uint64)
    zvals = scaled.ravel()
    zrows = np.arange(z_width, dtype=np.uint64)
    for rep in range(reps):
        ez = _stable_cells(_base(master, z_streams[rep]), zrows, zcols, p)
        state[rep * z_width:(rep + 1) * z_width] += ez @ zvals

    t1sz, t2sz = _state_dims(z_width, t_samples, s1, t1, b1, s2, t2, b2)
    rows1 = np.arange(d * s1, dtype=np.uint64)
    rows2 = np.arange(d * s2, dtype=np.uint64)
    ucols = colidx.astype(np.uint64)
    off = reps * z_width
    for rep in range(reps):
        for ell in range(t_samples):
            k = rep * t_samples + ell
            invu = exp_vector(master, exp_streams[k], d) ** (-1.0 / p)
            e1 = _stable_cells(_base(master, rec_streams[k]), rows1, ucols, p)
            e2 = _stable_cells(_base(master, opt_streams[k]), rows2, ucols, p)
            z1 = np.einsum('csn,nc->cs', e1.reshape(d, s1, n), scaled) * invu[:, None]
            z2 = np.einsum('csn,nc->cs', e2.reshape(d, s2, n), scaled) * invu[:, None]
            h1 = bucket_matrix(master, cm1_streams[k], t1, d, b1)
            h2 = bucket_matrix(master, cm2_streams[k], t2, d, b2)
            t1v = state[off:off + t1sz].reshape(t1, b1, s1)
            for tr in range(t1):
                np.add.at(t1v[tr], h1[tr], z1)
            t2v = state[off + t1sz:off + t1sz + t2sz].reshape(t2, b2, s2)
            for tr in range(t2):
                np.add.at(t2v[tr], h2[tr], z2)
            off += t1sz + t2sz


# single implementation serves both roles in this backend
build_state_serial = build_state


def recover_alphas(state, off1, master, cm1_stream, med_abs_p, d, s1, t1, b1):
    h1 = bucket_matrix(master, cm1_stream, t1, d, b1)
    t1v = state[off1:off1 + t1 * b1 * s1].reshape(t1, b1, s1)
    blocks = t1v[np.arange(t1)[:, None], h1]  # [t1, d, s1]
    ests = np.median(np.abs(blocks), axis=2) / med_abs_p
    return np.median(ests, axis=0)


def _triple(state, off1, off2, master, exp_stream, cm1_stream, cm2_stream,
            opt_stream, p, med_abs_p, lamp, colidx, d,
            s1, t1, b1, s2, t2, b2, grid_t):
    alphas = recover_alphas(state, off1, master, cm1_stream, med_abs_p, d, s1, t1, b1)
    j_hat = int(np.argmax(alphas))
    gamma = float(alphas[j_hat])
    u_j = float(exp_vector(master, exp_stream, d)[j_hat])
    upow = u_j ** (1.0 / p)
    alpha_hat = gamma * upow

    rows = np.arange(j_hat * s2, (j_hat + 1) * s2, dtype=np.uint64)
    eo = _stable_cells(_base(master, opt_stream), rows, colidx.astype(np.uint64), p)
    ones = eo @ lamp

    # Cross-fit the center search: first-half entries locate the best
    # candidate, the disjoint second half evaluates it and y = 0, so the
    # argmin does not ride the evaluation noise and the ratio's
    # numerator/denominator noise cancels (see the numba twin).
    half = s2 // 2
    if gamma > 0.0:
        grid = np.linspace(-4.0 * gamma, 4.0 * gamma, grid_t)
    else:
        grid = np.zeros(1)
    h2 = bucket_matrix(master, cm2_stream, t2, d, b2)
    t2v = state[off2:off2 + t2 * b2 * s2].reshape(t2, b2, s2)
    blocks = t2v[np.arange(t2), h2[:, j_hat]]  # [t2, s2]
    sel = np.abs(blocks[None, :, :half] - grid[:, None, None] * ones[None, None, :half])
    sel_curve = np.median(np.median(sel, axis=2), axis=1)
    y_best = float(grid[int(np.argmin(sel_curve))])
    pair = np.array([y_best, 0.0])
    ev = np.abs(blocks[None, :, half:] - pair[:, None, None] * ones[None, None, half:])
    curve = np.median(np.median(ev, axis=2) / med_abs_p, axis=1)
    f0 = float(curve[1])
    beta_y = min(float(curve[0]), f0)
    beta_hat = beta_y * upow
    return j_hat, gamma, alpha_hat, beta_hat, beta_y, f0


def sample_triple(state, off1, off2, master, exp_stream, cm1_stream, cm2_stream,
                  opt_stream, p, med_abs_p, lamp, colidx, d,
                  s1, t1, b1, s2, t2, b2, grid_t):
    j_hat, a_y, a_hat, b_hat, _, _ = _triple(
        state, off1, off2, master, exp_stream, cm1_stream, cm2_stream,
        opt_stream, p, med_abs_p, lamp, colidx, d,
        s1, t1, b1, s2, t2, b2, grid_t)
    return j_hat, a_y, a_hat, b_hat


def state_z(state, z_width, rep, med_abs_p, p):
    zoff = rep * z_width
    return (median_abs(state[zoff:zoff + z_width]) / med_abs_p) ** p


def state_cost(state, master, p, med_abs_p, lamp, colidx,
               z_streams, exp_streams, cm1_streams, cm2_streams, opt_streams,
               d, z_width, t_samples, s1, t1, b1, s2, t2, b2, grid_t):
    reps = z_streams.size
    clamp_lo = 2.0 ** (-p)
    t1sz, t2sz = _state_dims(z_width, t_samples, s1, t1, b1, s2, t2, b2)
    rep_est = np.empty(reps)
    off = reps * z_width
    for rep in range(reps):
        z_hat = state_z(state, z_width, rep, med_abs_p, p)
        acc = 0.0
        for ell in range(t_samples):
            k = rep * t_samples + ell
            _, _, _, _, beta_y, f0 = _triple(
                state, off, off + t1sz, master, exp_streams[k], cm1_streams[k],
                cm2_streams[k], opt_streams[k], p, med_abs_p, lamp, colidx, d,
                s1, t1, b1, s2, t2, b2, grid_t)
            if f0 <= 0.0:
                ratio = 1.0
            else:
                ratio = min(max((beta_y / f0) ** p, clamp_lo), 1.0)
            acc += ratio
            off += t1sz + t2sz
        rep_est[rep] = z_hat * (acc / t_samples)
    return float(np.median(rep_est))


def combine_cluster(allstates, members, lam, lamp, out, scratch):
    m = members.size
    g = allstates[members]  # [m(h), m(t), F]
    inner = np.tensordot(lam, g, axes=(0, 0))  # [m(t), F]
    diag = g[np.arange(m), np.arange(m)]       # [m(t), F]
    out[:] = lamp @ (diag - inner)


def cluster_costs_batch(allstates, members, wmat, master, p, med_abs_p,
                        z_streams, exp_streams, cm1_streams, cm2_streams,
                        opt_streams, d, z_width, t_samples,
                        s1, t1, b1, s2, t2, b2, grid_t):
    bsz, m = members.shape
    f = allstates.shape[2]
    out = np.empty(bsz)
    state = np.empty(f)
    scratch = np.empty(f)
    colidx = np.arange(m)
    for b in range(bsz):
        w = wmat[b]
        total = w.sum()
        lam = w / total
        lamp = lam ** (1.0 / p)
        combine_cluster(allstates, members[b], lam, lamp, state, scratch)
        cost = state_cost(state, master, p, med_abs_p, lamp, colidx,
                          z_streams, exp_streams, cm1_streams, cm2_streams,
                          opt_streams, d, z_width, t_samples,
                          s1, t1, b1, s2, t2, b2, grid_t)
        out[b] = cost * total
    return out


def medoid_pass1(master, stream, p, points, s):
    n, d = points.shape
    rows = np.arange(s, dtype=np.uint64)
    cols = np.arange(n * d, dtype=np.uint64)
    e = _stable_cells(_base(master, stream), rows, cols, p)
    return e @ points.ravel()


def medoid_score(master, stream, p, sk, x, n, med_abs_p):
    s = sk.size
    d = x.size
    rows = np.arange(s, dtype=np.uint64)
    cols = np.arange(n * d, dtype=np.uint64)
    e = _stable_cells(_base(master, stream), rows, cols, p)
    q = sk - e @ np.tile(x, n)
    return median_abs(q) / med_abs_p
