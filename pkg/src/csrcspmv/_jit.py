"""Compiled inner loops. Every function releases the GIL so worker threads
of the parallel executor run them concurrently."""

import numpy as np
from numba import njit

_opts = dict(nogil=True, cache=True, fastmath=False)


@njit(**_opts)
def csr_rows(row_ptr, col_idx, values, x, y, r0, r1):
    for i in range(r0, r1):
        acc = 0.0
        for k in range(row_ptr[i], row_ptr[i + 1]):
            acc += values[k] * x[col_idx[k]]
        y[i] = acc


@njit(**_opts)
def csrc_rows(ad, ia, ja, al, au, rp, rc, rv, x, n, y, r0, r1):
    """Rows r0..r1-1 of a (possibly rectangular) CSRC product, added into y.

    The tail CSR (rp, rc, rv) reads x[n + col]; pass an all-zero rp for
    square matrices.
    """
    for i in range(r0, r1):
        xi = x[i]
        yi = ad[i] * xi
        for t in range(ia[i], ia[i + 1]):
            j = ja[t]
            yi += al[t] * x[j]
            y[j] += au[t] * xi
        for t in range(rp[i], rp[i + 1]):
            yi += rv[t] * x[n + rc[t]]
        y[i] += yi


@njit(**_opts)
def csrc_rowlist(ad, ia, ja, al, au, rp, rc, rv, x, n, y, rows, s0, s1):
    for s in range(s0, s1):
        i = rows[s]
        xi = x[i]
        yi = ad[i] * xi
        for t in range(ia[i], ia[i + 1]):
            j = ja[t]
            yi += al[t] * x[j]
            y[j] += au[t] * xi
        for t in range(rp[i], rp[i + 1]):
            yi += rv[t] * x[n + rc[t]]
        y[i] += yi


@njit(**_opts)
def fill_zero(v, lo, hi):
    for q in range(lo, hi):
        v[q] = 0.0


@njit(**_opts)
def sum_buffers(y, bufs, ids, lo, hi):
    """y[lo:hi] = sum of bufs[ids[0]], bufs[ids[1]], ... in that order."""
    b0 = ids[0]
    for q in range(lo, hi):
        y[q] = bufs[b0, q]
    for c in range(1, len(ids)):
        b = ids[c]
        for q in range(lo, hi):
            y[q] += bufs[b, q]


@njit(**_opts)
def add_buffer(y, buf, lo, hi, first):
    if first:
        for q in range(lo, hi):
            y[q] = buf[q]
    else:
        for q in range(lo, hi):
            y[q] += buf[q]


@njit(**_opts)
def sum_covering(y, bufs, cand, range_lo, range_hi, lo, hi):
    """y[q] for q in [lo, hi): ascending-id sum over the candidate buffers
    whose inclusive range [range_lo[b], range_hi[b]] contains q."""
    for q in range(lo, hi):
        acc = 0.0
        seen = False
        for c in range(len(cand)):
            b = cand[c]
            if range_lo[b] <= q and q <= range_hi[b]:
                if seen:
                    acc += bufs[b, q]
                else:
                    acc = bufs[b, q]
                    seen = True
        y[q] = acc


@njit(**_opts)
def greedy_color(adj_ptr, adj, order):
    n = len(order)
    color = np.full(n, -1, dtype=np.int64)
    mark = np.full(n + 1, -1, dtype=np.int64)
    for s in range(n):
        v = order[s]
        for k in range(adj_ptr[v], adj_ptr[v + 1]):
            c = color[adj[k]]
            if c >= 0:
                mark[c] = v
        c = 0
        while mark[c] == v:
            c += 1
        color[v] = c
    return color
