"""Hot loops of the compound-Poisson sampler.

Every function comes in two flavours with identical signatures: a loop
version compiled by numba and a vectorized numpy version.  Both consume the
same pre-drawn random numbers, so they agree up to floating point rounding.
The public dispatchers pick the numba path unless it is disabled (see
``_accel``).
"""

import numpy as np

from ._accel import USE_NUMBA, njit


@njit
def _resolve_points_nb(anchor, log_r, log_ratio, flip, root_sign, child, parent, edge):
    m, d = log_ratio.shape[0], log_ratio.shape[1] + 1
    z = np.zeros((m, d))
    n_exceed = np.zeros(m, dtype=np.int64)
    logw = np.empty(d)
    sgn = np.empty(d)
    for p in range(m):
        a = anchor[p]
        logw[a] = 0.0
        sgn[a] = root_sign[p]
        for k in range(d - 1):
            c = child[a, k]
            u = parent[a, k]
            e = edge[a, k]
            logw[c] = logw[u] + log_ratio[p, e]
            sgn[c] = -sgn[u] if flip[p, e] else sgn[u]
        lr = log_r[p]
        cnt = 0
        for c in range(d):
            lv = lr + logw[c]
            if lv >= 0.0:
                cnt += 1
            if lv > -np.inf:
                z[p, c] = sgn[c] * np.exp(lv)
        n_exceed[p] = cnt
    return z, n_exceed


def _resolve_points_np(anchor, log_r, log_ratio, flip, root_sign, child, parent, edge):
    m, d = log_ratio.shape[0], log_ratio.shape[1] + 1
    logw = np.zeros((m, d))
    sgn = np.zeros((m, d))
    for a in range(d):
        rows = np.nonzero(anchor == a)[0]
        if rows.size == 0:
            continue
        lw = np.zeros((rows.size, d))
        sg = np.empty((rows.size, d))
        sg[:, a] = root_sign[rows]
        for k in range(d - 1):
            c, u, e = child[a, k], parent[a, k], edge[a, k]
            lw[:, c] = lw[:, u] + log_ratio[rows, e]
            sg[:, c] = np.where(flip[rows, e], -sg[:, u], sg[:, u])
        logw[rows] = lw
        sgn[rows] = sg
    lv = log_r[:, None] + logw
    n_exceed = (lv >= 0.0).sum(axis=1).astype(np.int64)
    with np.errstate(over="ignore"):
        z = sgn * np.exp(lv)
    return z, n_exceed


@njit
def _accumulate_nb(rows, z, accept, alpha, c_plus, c_minus, n_rows):
    d = z.shape[1]
    out = np.zeros((n_rows, d))
    counts = np.zeros(n_rows, dtype=np.int64)
    for p in range(z.shape[0]):
        if not accept[p]:
            continue
        r = rows[p]
        counts[r] += 1
        for c in range(d):
            v = z[p, c]
            if v > 0.0:
                out[r, c] += (c_plus[c] * v) ** (1.0 / alpha[c])
            elif v < 0.0:
                out[r, c] -= (-c_minus[c] * v) ** (1.0 / alpha[c])
    return out, counts


def _accumulate_np(rows, z, accept, alpha, c_plus, c_minus, n_rows):
    d = z.shape[1]
    zr = z[accept]
    rr = rows[accept]
    pos = np.power(c_plus * np.maximum(zr, 0.0), 1.0 / alpha)
    neg = np.power(c_minus * np.maximum(-zr, 0.0), 1.0 / alpha)
    x = pos - neg
    out = np.empty((n_rows, d))
    for c in range(d):
        out[:, c] = np.bincount(rr, weights=x[:, c], minlength=n_rows)
    counts = np.bincount(rr, minlength=n_rows).astype(np.int64)
    return out, counts


@njit
def _simulate_chunk_nb(
    anchor, log_r, log_ratio, flip, root_sign, u_acc, rows, child, parent, edge, eps, alpha, c_plus, c_minus, n_rows
):
    m, d = log_ratio.shape[0], log_ratio.shape[1] + 1
    out = np.zeros((n_rows, d))
    counts = np.zeros(n_rows, dtype=np.int64)
    logw = np.empty(d)
    sgn = np.empty(d)
    inv_alpha = 1.0 / alpha
    log_eps = np.log(eps)
    for p in range(m):
        a = anchor[p]
        logw[a] = 0.0
        sgn[a] = root_sign[p]
        for k in range(d - 1):
            c = child[a, k]
            u = parent[a, k]
            e = edge[a, k]
            logw[c] = logw[u] + log_ratio[p, e]
            sgn[c] = -sgn[u] if flip[p, e] else sgn[u]
        lr = log_r[p]
        cnt = 0
        for c in range(d):
            if lr + logw[c] >= 0.0:
                cnt += 1
        if u_acc[p] * cnt >= 1.0:
            continue
        r = rows[p]
        counts[r] += 1
        for c in range(d):
            lv = lr + logw[c]
            if lv == -np.inf:
                continue
            lz = lv + log_eps
            if sgn[c] > 0:
                out[r, c] += np.exp((np.log(c_plus[c]) + lz) * inv_alpha[c])
            else:
                out[r, c] -= np.exp((np.log(c_minus[c]) + lz) * inv_alpha[c])
    return out, counts


def _simulate_chunk_np(
    anchor, log_r, log_ratio, flip, root_sign, u_acc, rows, child, parent, edge, eps, alpha, c_plus, c_minus, n_rows
):
    z, n_exceed = _resolve_points_np(anchor, log_r, log_ratio, flip, root_sign, child, parent, edge)
    accept = u_acc * n_exceed < 1.0
    return _accumulate_np(rows, z * eps, accept, alpha, c_plus, c_minus, n_rows)


def simulate_chunk(*args, backend=None):
    """Resolve proposals, thin them and sum accepted jumps per row (original scale)."""
    use_nb = USE_NUMBA if backend is None else backend == "numba"
    rows, n_rows = args[6], args[-1]
    if rows.shape[0] != args[0].shape[0] or (rows.size and (rows.min() < 0 or rows.max() >= n_rows)):
        raise ValueError("row indices must match proposals and lie in [0, n_rows)")
    return (_simulate_chunk_nb if use_nb else _simulate_chunk_np)(*args)


def resolve_points(*args, backend=None):
    use_nb = USE_NUMBA if backend is None else backend == "numba"
    return (_resolve_points_nb if use_nb else _resolve_points_np)(*args)


def accumulate(rows, z, accept, alpha, c_plus, c_minus, n_rows, backend=None):
    if not (rows.shape[0] == z.shape[0] == accept.shape[0]):
        raise ValueError("rows, z and accept must have the same length")
    if rows.size and (rows.min() < 0 or rows.max() >= n_rows):
        raise ValueError("row index out of range")
    args = (rows, z, accept, alpha, c_plus, c_minus, n_rows)
    use_nb = USE_NUMBA if backend is None else backend == "numba"
    return (_accumulate_nb if use_nb else _accumulate_np)(*args)
