# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the fixed-point torus kernels.

Semantics match ``_pykernels`` exactly; see that module for the fixed-point
conventions.  Unsigned 64-bit overflow is defined in C and performs the
reduction modulo Z.
"""

import numpy as np
from libc.stdint cimport uint64_t, int64_t

cdef uint64_t U64_MAX = 0xFFFFFFFFFFFFFFFF


cdef inline uint64_t _dist(uint64_t x) nogil:
    cdef uint64_t y = (~x) + 1
    return x if x < y else y


cdef uint64_t[::1] _u64(values):
    cdef Py_ssize_t i, n = len(values)
    out = np.empty(n, dtype=np.uint64)
    cdef uint64_t[::1] view = out
    for i in range(n):
        view[i] = <uint64_t>int(values[i])
    return view


def record_scan(F, G, long long q_start, long long q_stop, carry_lo, carry_hi):
    cdef uint64_t[::1] f = _u64(F)
    cdef uint64_t[::1] g = _u64(G)
    cdef Py_ssize_t n = f.shape[0], i
    cdef uint64_t run_lo = <uint64_t>int(carry_lo)
    cdef uint64_t run_hi = <uint64_t>int(carry_hi)
    cdef uint64_t q, d, x, dx, E, lo, hi
    records = []
    ambiguous = []
    for q in range(<uint64_t>q_start, <uint64_t>q_stop):
        d = 0
        for i in range(n):
            x = q * f[i] - g[i]
            dx = _dist(x)
            if dx > d:
                d = dx
        E = 2 * q + 2
        lo = d - E if d > E else 0
        hi = d + E
        if hi < run_lo:
            records.append(q)
        elif not (lo > run_hi):
            ambiguous.append(q)
        if lo < run_lo:
            run_lo = lo
        if hi < run_hi:
            run_hi = hi
    return (
        np.asarray(records, dtype=np.int64),
        np.asarray(ambiguous, dtype=np.int64),
        int(run_lo),
        int(run_hi),
    )


def ball_scan(F, G, long long q_start, long long q_stop, r_lo, r_hi, want_members=False):
    cdef uint64_t[::1] f = _u64(F)
    cdef uint64_t[::1] g = _u64(G)
    cdef Py_ssize_t n = f.shape[0], i
    cdef uint64_t rl = <uint64_t>int(r_lo)
    cdef uint64_t rh = <uint64_t>int(r_hi)
    cdef uint64_t q, d, x, dx, E
    cdef long long count = 0
    cdef bint want = want_members
    members = []
    ambiguous = []
    for q in range(<uint64_t>q_start, <uint64_t>q_stop):
        d = 0
        for i in range(n):
            x = q * f[i] - g[i]
            dx = _dist(x)
            if dx > d:
                d = dx
        E = 2 * q + 2
        if d + E <= rl:
            count += 1
            if want:
                members.append(q)
        elif not (d > E and d - E > rh):
            ambiguous.append(q)
    return (
        int(count),
        np.asarray(members, dtype=np.int64),
        np.asarray(ambiguous, dtype=np.int64),
    )


def shell_minima(F, long long Q):
    cdef uint64_t[::1] f = _u64(F)
    cdef Py_ssize_t n = f.shape[0], i
    lo_np = np.full(Q + 1, U64_MAX, dtype=np.uint64)
    hi_np = np.full(Q + 1, U64_MAX, dtype=np.uint64)
    cdef uint64_t[::1] lo_arr = lo_np
    cdef uint64_t[::1] hi_arr = hi_np
    cdef int64_t qv[8]
    cdef uint64_t x, d, E, lo, hi, a
    cdef int64_t R, t
    if n > 8:
        raise ValueError("shell_minima supports n <= 8")
    for i in range(n):
        qv[i] = -Q
    while True:
        x = 0
        a = 0
        R = 0
        for i in range(n):
            x += (<uint64_t>qv[i]) * f[i]
            t = qv[i] if qv[i] >= 0 else -qv[i]
            a += <uint64_t>t
            if t > R:
                R = t
        if R > 0:
            d = _dist(x)
            E = 2 * a
            lo = d - E if d > E else 0
            hi = d + E
            if lo < lo_arr[R]:
                lo_arr[R] = lo
            if hi < hi_arr[R]:
                hi_arr[R] = hi
        i = n - 1
        while i >= 0:
            if qv[i] < Q:
                qv[i] += 1
                break
            qv[i] = -Q
            i -= 1
        if i < 0:
            break
    return lo_np, hi_np


def ball_hits(C, x, R_lo, R_hi, err):
    C = np.ascontiguousarray(C, dtype=np.uint64)
    if C.ndim != 2 or C.shape[0] == 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty
    cdef uint64_t[:, ::1] c = C
    cdef uint64_t[::1] xv = _u64(x)
    cdef Py_ssize_t N = c.shape[0], n = c.shape[1], j, i
    cdef uint64_t rl = <uint64_t>int(R_lo)
    cdef uint64_t rh = <uint64_t>int(R_hi)
    cdef uint64_t e = <uint64_t>int(err)
    cdef uint64_t d, dx
    hits = []
    ambiguous = []
    for j in range(N):
        d = 0
        for i in range(n):
            dx = _dist(c[j, i] - xv[i])
            if dx > d:
                d = dx
        if d + e <= rl:
            hits.append(j)
        elif not (d > e and d - e > rh):
            ambiguous.append(j)
    return np.asarray(hits, dtype=np.int64), np.asarray(ambiguous, dtype=np.int64)
