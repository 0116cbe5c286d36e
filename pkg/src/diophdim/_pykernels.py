"""Numpy implementations of the hot kernels (fallback backend).

All kernels work on torus coordinates in 64-bit fixed point: a real number
``x`` is represented by ``F = floor(frac(x) * 2**64)`` with the true value in
``[F, F + 2)`` units.  uint64 arithmetic wraps modulo 2**64, which is exactly
reduction modulo Z.  Each kernel returns certified decisions plus the list of
indices it could not decide; callers resolve those at higher precision.
"""

import numpy as np

BLOCK = 1 << 16
INF = np.uint64(0xFFFFFFFFFFFFFFFF)


def _as_u64(values):
    return np.asarray([int(v) for v in values], dtype=np.uint64)


def _dist(x):
    return np.minimum(x, ~x + np.uint64(1))


def _point_dists(F, G, q):
    X = q[:, None] * F[None, :] - G[None, :]
    return _dist(X).max(axis=1)


def record_scan(F, G, q_start, q_stop, carry_lo, carry_hi):
    """Classify each q in [q_start, q_stop) as a new running minimum of
    ``|| q*F - G ||`` (certain), not a minimum (certain), or ambiguous.

    ``carry_lo``/``carry_hi`` are the minima of the lower/upper bounds over
    all earlier q.  Returns ``(records, ambiguous, carry_lo, carry_hi)``.
    """
    F = _as_u64(F)
    G = _as_u64(G)
    run_lo = np.uint64(carry_lo)
    run_hi = np.uint64(carry_hi)
    records, ambiguous = [], []
    for a in range(q_start, q_stop, BLOCK):
        b = min(a + BLOCK, q_stop)
        q = np.arange(a, b, dtype=np.uint64)
        D = _point_dists(F, G, q)
        E = np.uint64(2) * q + np.uint64(2)
        lo = np.where(D > E, D - E, np.uint64(0))
        hi = D + E
        prev_lo = np.minimum.accumulate(np.concatenate(([run_lo], lo)))
        prev_hi = np.minimum.accumulate(np.concatenate(([run_hi], hi)))
        is_rec = hi < prev_lo[:-1]
        not_rec = lo > prev_hi[:-1]
        amb = ~(is_rec | not_rec)
        records.append(q[is_rec].astype(np.int64))
        ambiguous.append(q[amb].astype(np.int64))
        run_lo, run_hi = prev_lo[-1], prev_hi[-1]
    empty = np.zeros(0, dtype=np.int64)
    return (
        np.concatenate(records) if records else empty,
        np.concatenate(ambiguous) if ambiguous else empty,
        int(run_lo),
        int(run_hi),
    )


def ball_scan(F, G, q_start, q_stop, r_lo, r_hi, want_members=False):
    """Points ``q*F`` (q in [q_start, q_stop)) within torus distance r of G.

    Returns ``(count_inside, members, ambiguous)``; ``members`` lists the
    certainly-inside q when requested (else an empty array).
    """
    F = _as_u64(F)
    G = _as_u64(G)
    r_lo = np.uint64(r_lo)
    r_hi = np.uint64(r_hi)
    count = 0
    members, ambiguous = [], []
    for a in range(q_start, q_stop, BLOCK):
        b = min(a + BLOCK, q_stop)
        q = np.arange(a, b, dtype=np.uint64)
        D = _point_dists(F, G, q)
        E = np.uint64(2) * q + np.uint64(2)
        inside = (D + E) <= r_lo
        outside = (D > E) & ((D - E) > r_hi)
        amb = ~(inside | outside)
        count += int(inside.sum())
        if want_members:
            members.append(q[inside].astype(np.int64))
        ambiguous.append(q[amb].astype(np.int64))
    empty = np.zeros(0, dtype=np.int64)
    return (
        count,
        np.concatenate(members) if members else empty,
        np.concatenate(ambiguous) if ambiguous else empty,
    )


def shell_minima(F, Q):
    """Bounds on min over integer q with |q|_inf = R of || sum q_i F_i ||.

    Returns arrays ``lo`` and ``hi`` of length Q + 1 (index 0 unused).
    """
    F = _as_u64(F)
    n = len(F)
    lo_arr = np.full(Q + 1, INF, dtype=np.uint64)
    hi_arr = np.full(Q + 1, INF, dtype=np.uint64)
    last = np.arange(-Q, Q + 1, dtype=np.int64)
    last_u = last.astype(np.uint64)
    abs_last = np.abs(last)
    if n > 1:
        grids = np.meshgrid(*([np.arange(-Q, Q + 1)] * (n - 1)), indexing="ij")
        prefixes = np.array(grids).reshape(n - 1, -1).T
    else:
        prefixes = np.zeros((1, 0), dtype=np.int64)
    head = [int(f) for f in F[:-1]]
    for pre in prefixes:
        base = sum(int(qi) * f for qi, f in zip(pre, head)) & 0xFFFFFFFFFFFFFFFF
        X = np.uint64(base) + last_u * F[-1]
        D = _dist(X)
        pre_abs = int(np.abs(pre).sum()) if len(pre) else 0
        E = np.uint64(2) * (np.uint64(pre_abs) + abs_last.astype(np.uint64))
        lo = np.where(D > E, D - E, np.uint64(0))
        hi = D + E
        m = int(np.abs(pre).max()) if len(pre) else 0
        R = np.maximum(abs_last, m)
        keep = R > 0
        np.minimum.at(lo_arr, R[keep], lo[keep])
        np.minimum.at(hi_arr, R[keep], hi[keep])
    return lo_arr, hi_arr


def ball_hits(C, x, R_lo, R_hi, err):
    """Indices of stored centers C (N x n, fixed point, error <= err units)
    within torus sup-distance R of x.  Returns ``(hits, ambiguous)``."""
    C = np.asarray(C, dtype=np.uint64)
    x = _as_u64(x)
    err = np.uint64(err)
    if C.shape[0] == 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty
    D = _dist(C - x[None, :]).max(axis=1)
    inside = (D + err) <= np.uint64(R_lo)
    outside = (D > err) & ((D - err) > np.uint64(R_hi))
    amb = ~(inside | outside)
    return np.nonzero(inside)[0].astype(np.int64), np.nonzero(amb)[0].astype(np.int64)
