"""Sequential matrix-vector products and their analytic operation counts."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import _jit
from .core import CsrcMatrix, CsrcRectMatrix, CsrMatrix, INDEX_DTYPE

_NO_TAIL_CACHE: dict = {}


class Format(str, enum.Enum):
    CSR = "csr"
    CSRC = "csrc"
    CSRC_SYM = "csrc_sym"


@dataclass(frozen=True)
class KernelStats:
    flops: int
    loads: int
    format: Format

    @property
    def loads_per_flop(self) -> float:
        return self.loads / self.flops


def _check_x(x, expected: int, what: str) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 1 or len(x) != expected:
        raise ValueError(f"x has length {len(x)}, {what} expects {expected}")
    return x


def empty_tail(n: int):
    """Row pointer/column/value arrays of an n-row CSR with no entries."""
    tail = _NO_TAIL_CACHE.get(n)
    if tail is None:
        tail = (np.zeros(n + 1, dtype=INDEX_DTYPE), np.zeros(0, dtype=INDEX_DTYPE), np.zeros(0))
        _NO_TAIL_CACHE[n] = tail
    return tail


def csrc_operands(a):
    """Flat argument tuple (ad, ia, ja, al, au, rp, rc, rv) for the jitted kernels."""
    if isinstance(a, CsrcRectMatrix):
        sq, r = a.square, a.rect
        return (sq.ad, sq.ia, sq.ja, sq.al, sq.upper, r.row_ptr, r.col_idx, r.values)
    return (a.ad, a.ia, a.ja, a.al, a.upper) + empty_tail(a.n)


def spmv_csr(a: CsrMatrix, x) -> np.ndarray:
    x = _check_x(x, a.n_cols, "matrix")
    y = np.empty(a.n_rows)
    _jit.csr_rows(a.row_ptr, a.col_idx, a.values, x, y, 0, a.n_rows)
    return y


def spmv_csrc(a: CsrcMatrix, x) -> np.ndarray:
    """y = A x, traversing the lower and upper triangles in one row sweep."""
    x = _check_x(x, a.n, "matrix")
    y = np.zeros(a.n)
    _jit.csrc_rows(*csrc_operands(a), x, a.n, y, 0, a.n)
    return y


def spmv_csrc_rect(a: CsrcRectMatrix, x) -> np.ndarray:
    x = _check_x(x, a.m, "rectangular matrix")
    y = np.zeros(a.n)
    _jit.csrc_rows(*csrc_operands(a), x, a.n, y, 0, a.n)
    return y


def spmv_csrc_transpose(a: CsrcMatrix, x) -> np.ndarray:
    """y = A^T x via the zero-copy transposed view."""
    return spmv_csrc(a.transpose(), x)


def spmv(a, x) -> np.ndarray:
    if isinstance(a, CsrcRectMatrix):
        return spmv_csrc_rect(a, x)
    if isinstance(a, CsrcMatrix):
        return spmv_csrc(a, x)
    return spmv_csr(a, x)


def count_ops(fmt, n: int, nnz_full: int) -> KernelStats:
    """Closed-form flop and load counts of one square product.

    Flops assume no fused multiply-add. Loads count every read of a matrix
    value, a column index, an x entry, or a y entry being updated; the row
    pointer and loop bookkeeping are not counted and ``x[i]`` is read once
    per row.
    """
    fmt = Format(fmt)
    if nnz_full < n:
        raise ValueError("nnz_full must be >= n")
    if fmt is Format.CSR:
        return KernelStats(2 * nnz_full, 3 * nnz_full, fmt)
    flops = 2 * nnz_full - n
    # 2 per row (ad, x[i]) + 5 per lower entry (ja, al, x[j], au, y[j])
    k = (nnz_full - n) // 2
    loads = 2 * n + 5 * k
    if fmt is Format.CSRC_SYM:
        loads -= k
    return KernelStats(flops, loads, fmt)


class _Counted:
    """Array wrapper that counts element reads."""

    def __init__(self, data, counter):
        self.data = data
        self.counter = counter

    def __getitem__(self, k):
        self.counter[0] += 1
        return self.data[k]

    def __setitem__(self, k, v):
        self.data[k] = v


def instrumented_spmv(a, x):
    """Pure-Python product that tallies flops and loads while computing y.

    Returns ``(y, KernelStats)``. Slow; meant for checking the cost model.
    """
    loads = [0]
    flops = 0
    if isinstance(a, CsrMatrix):
        ptr = a.row_ptr
        ja, val, xs = _Counted(a.col_idx, loads), _Counted(a.values, loads), _Counted(x, loads)
        y = np.zeros(a.n_rows)
        for i in range(a.n_rows):
            acc = 0.0
            for k in range(ptr[i], ptr[i + 1]):
                acc += val[k] * xs[ja[k]]
                flops += 2
            y[i] = acc
        return y, KernelStats(flops, loads[0], Format.CSR)

    sym = a.au is None
    ad, ja, al = _Counted(a.ad, loads), _Counted(a.ja, loads), _Counted(a.al, loads)
    au = al if sym else _Counted(a.au, loads)
    xs = _Counted(x, loads)
    ys = _Counted(np.zeros(a.n), loads)
    ia = a.ia
    for i in range(a.n):
        xi = xs[i]
        yi = ad[i] * xi
        flops += 1
        for t in range(ia[i], ia[i + 1]):
            j = ja[t]
            yi += al[t] * xs[j]
            if sym:
                # value read once, reused for the transposed update
                ys[j] = ys[j] + al.data[t] * xi
            else:
                ys[j] = ys[j] + au[t] * xi
            flops += 4
        ys[i] = yi
    return ys.data, KernelStats(flops, loads[0], Format.CSRC_SYM if sym else Format.CSRC)
