"""Sparse storage types: triplets, CSR, CSRC and rectangular CSRC.

CSRC keeps the diagonal in a dense array ``ad`` and shares one index
structure (``ia``/``ja``) between the strict lower triangle, stored by rows
in ``al``, and the strict upper triangle, stored by columns in ``au``.
Only structurally symmetric square matrices are representable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

INDEX_DTYPE = np.int64

# byte widths used by the working-set model, independent of INDEX_DTYPE
WS_REAL_BYTES = 8
WS_INDEX_BYTES = 4


class StructureError(ValueError):
    """Raised when a matrix does not have the structure an operation needs."""


def _as_index(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=INDEX_DTYPE)


def _as_real(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.float64)


def _frozen(*arrays: np.ndarray) -> None:
    for a in arrays:
        a.flags.writeable = False


@dataclass(frozen=True)
class TripletMatrix:
    """Coordinate-form matrix; duplicates are allowed and summed by build_csr."""

    n_rows: int
    n_cols: int
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        rows, cols, values = _as_index(self.rows), _as_index(self.cols), _as_real(self.values)
        if not (rows.shape == cols.shape == values.shape) or rows.ndim != 1:
            raise ValueError("rows, cols and values must be 1-d arrays of equal length")
        if self.n_rows < 0 or self.n_cols < 0:
            raise ValueError("negative dimension")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_entries(cls, n_rows: int, n_cols: int,
                     entries: Iterable[Tuple[int, int, float]]) -> "TripletMatrix":
        entries = list(entries)
        if not entries:
            return cls(n_rows, n_cols, np.empty(0), np.empty(0), np.empty(0))
        r, c, v = zip(*entries)
        return cls(n_rows, n_cols, np.array(r), np.array(c), np.array(v, dtype=float))

    @property
    def n_entries(self) -> int:
        return len(self.values)

    def entries(self):
        return list(zip(self.rows.tolist(), self.cols.tolist(), self.values.tolist()))


@dataclass(frozen=True, eq=False)
class CsrMatrix:
    n_rows: int
    n_cols: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        row_ptr, col_idx, values = _as_index(self.row_ptr), _as_index(self.col_idx), _as_real(self.values)
        if row_ptr.shape != (self.n_rows + 1,):
            raise StructureError("row_ptr must have length n_rows + 1")
        if row_ptr[0] != 0 or row_ptr[-1] != len(col_idx) or len(values) != len(col_idx):
            raise StructureError("row_ptr does not match col_idx/values length")
        if np.any(np.diff(row_ptr) < 0):
            raise StructureError("row_ptr must be nondecreasing")
        _frozen(row_ptr, col_idx, values)
        object.__setattr__(self, "row_ptr", row_ptr)
        object.__setattr__(self, "col_idx", col_idx)
        object.__setattr__(self, "values", values)

    @property
    def nnz(self) -> int:
        return len(self.values)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.n_rows, self.n_cols

    def row_indices(self) -> np.ndarray:
        """Row index of every stored entry (the COO expansion of row_ptr)."""
        return np.repeat(np.arange(self.n_rows, dtype=INDEX_DTYPE), np.diff(self.row_ptr))

    def to_triplets(self) -> TripletMatrix:
        return TripletMatrix(self.n_rows, self.n_cols, self.row_indices(), self.col_idx, self.values)

    def to_dense(self) -> np.ndarray:
        d = np.zeros((self.n_rows, self.n_cols))
        np.add.at(d, (self.row_indices(), self.col_idx), self.values)
        return d

    def same_as(self, other: "CsrMatrix") -> bool:
        """Identical shape, pattern and bit-identical values."""
        return (self.shape == other.shape
                and np.array_equal(self.row_ptr, other.row_ptr)
                and np.array_equal(self.col_idx, other.col_idx)
                and np.array_equal(self.values.view(np.int64), other.values.view(np.int64)))


@dataclass(frozen=True, eq=False)
class CsrcMatrix:
    """Compressed sparse row-column storage of a structurally symmetric matrix.

    ``al[t]`` holds ``a[i, ja[t]]`` for ``t`` in ``ia[i]:ia[i+1]`` and ``au[t]``
    holds the transposed entry ``a[ja[t], i]``. When ``value_symmetric`` is set,
    ``au`` is ``None`` and kernels read ``al`` for both triangles.
    """

    n: int
    ad: np.ndarray
    ia: np.ndarray
    ja: np.ndarray
    al: np.ndarray
    au: Optional[np.ndarray] = None
    value_symmetric: bool = False

    def __post_init__(self):
        ad, ia, ja, al = _as_real(self.ad), _as_index(self.ia), _as_index(self.ja), _as_real(self.al)
        au = None if self.au is None else _as_real(self.au)
        if ad.shape != (self.n,) or ia.shape != (self.n + 1,):
            raise StructureError("ad must have length n and ia length n + 1")
        if ia[0] != 0 or ia[-1] != len(ja) or len(al) != len(ja):
            raise StructureError("ia does not match ja/al length")
        if self.value_symmetric:
            if au is not None and not np.array_equal(au, al):
                raise StructureError("value_symmetric matrix with au != al")
        elif au is None or au.shape != al.shape:
            raise StructureError("au is required unless value_symmetric")
        if np.any(np.diff(ia) < 0):
            raise StructureError("ia must be nondecreasing")
        if len(ja):
            rows = np.repeat(np.arange(self.n), np.diff(ia))
            if np.any(ja < 0) or np.any(ja >= rows):
                raise StructureError("ja entries must lie strictly below the diagonal")
            same_row = rows[1:] == rows[:-1]
            if np.any(ja[1:][same_row] <= ja[:-1][same_row]):
                raise StructureError("ja must be strictly increasing within a row")
        arrays = [ad, ia, ja, al] + ([au] if au is not None else [])
        _frozen(*arrays)
        object.__setattr__(self, "ad", ad)
        object.__setattr__(self, "ia", ia)
        object.__setattr__(self, "ja", ja)
        object.__setattr__(self, "al", al)
        object.__setattr__(self, "au", au)

    @property
    def k_off(self) -> int:
        return len(self.ja)

    @property
    def nnz_full(self) -> int:
        return self.n + 2 * self.k_off

    @property
    def nnz_stored(self) -> int:
        """Stored coefficients: full count, or lower + diagonal when au is elided."""
        return self.n + self.k_off if self.au is None else self.nnz_full

    @property
    def upper(self) -> np.ndarray:
        """The array kernels read for the upper triangle."""
        return self.al if self.au is None else self.au

    def row_counts(self) -> np.ndarray:
        """Stored entries per row: diagonal plus strict lower part."""
        return np.diff(self.ia) + 1

    def lower_rows(self) -> np.ndarray:
        return np.repeat(np.arange(self.n, dtype=INDEX_DTYPE), np.diff(self.ia))

    def transpose(self) -> "CsrcMatrix":
        """Zero-copy transpose: the lower and upper value arrays trade places."""
        if self.value_symmetric:
            return self
        return CsrcMatrix(self.n, self.ad, self.ia, self.ja, self.au, self.al, False)

    def with_explicit_upper(self) -> "CsrcMatrix":
        """Same matrix with ``au`` materialised even when value symmetric."""
        if self.au is not None:
            return self
        return CsrcMatrix(self.n, self.ad, self.ia, self.ja, self.al, self.al.copy(), True)

    def to_csr(self) -> CsrMatrix:
        return csrc_to_csr(self)

    def to_dense(self) -> np.ndarray:
        return self.to_csr().to_dense()

    def working_set_kb(self) -> float:
        return working_set_kb(self.n, self.nnz_stored, self.au is None)


@dataclass(frozen=True, eq=False)
class CsrcRectMatrix:
    """An n x m matrix (m > n) split into a CSRC square part and a CSR tail.

    The tail's column indices are local: column ``c`` of ``rect`` is global
    column ``n + c``.
    """

    square: CsrcMatrix
    rect: CsrMatrix

    def __post_init__(self):
        if self.rect.n_rows != self.square.n:
            raise StructureError("rect part must have as many rows as the square part")
        if self.rect.n_cols < 1:
            raise StructureError("rect part must have at least one column")

    @property
    def n(self) -> int:
        return self.square.n

    @property
    def m(self) -> int:
        return self.square.n + self.rect.n_cols

    @property
    def nnz_full(self) -> int:
        return self.square.nnz_full + self.rect.nnz

    def row_counts(self) -> np.ndarray:
        return self.square.row_counts() + np.diff(self.rect.row_ptr)

    def to_csr(self) -> CsrMatrix:
        sq = csrc_to_csr(self.square)
        rows = np.concatenate([sq.row_indices(), self.rect.row_indices()])
        cols = np.concatenate([sq.col_idx, self.rect.col_idx + self.n])
        vals = np.concatenate([sq.values, self.rect.values])
        return build_csr(TripletMatrix(self.n, self.m, rows, cols, vals))

    def to_dense(self) -> np.ndarray:
        return self.to_csr().to_dense()


@dataclass(frozen=True)
class SymmetryReport:
    structurally_symmetric: bool
    value_symmetric: bool
    missing_transposes: int
    missing_diagonal: int
    first_unmatched: Optional[Tuple[int, int]] = None


def build_csr(t: TripletMatrix) -> CsrMatrix:
    """Canonical CSR from triplets: columns sorted per row, duplicates summed."""
    rows, cols, vals = t.rows, t.cols, t.values
    bad = (rows < 0) | (rows >= t.n_rows) | (cols < 0) | (cols >= t.n_cols)
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        raise IndexError(
            f"entry {k} ({int(rows[k])}, {int(cols[k])}) outside {t.n_rows}x{t.n_cols}")
    if len(vals) == 0:
        return CsrMatrix(t.n_rows, t.n_cols, np.zeros(t.n_rows + 1), np.empty(0), np.empty(0))
    order = np.lexsort((cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    first = np.ones(len(rows), dtype=bool)
    first[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
    starts = np.flatnonzero(first)
    vals = np.add.reduceat(vals, starts)
    rows, cols = rows[starts], cols[starts]
    row_ptr = np.zeros(t.n_rows + 1, dtype=INDEX_DTYPE)
    np.cumsum(np.bincount(rows, minlength=t.n_rows), out=row_ptr[1:])
    return CsrMatrix(t.n_rows, t.n_cols, row_ptr, cols, vals)


def _require_square(a: CsrMatrix) -> None:
    if a.n_rows != a.n_cols:
        raise StructureError(f"square matrix required, got {a.n_rows}x{a.n_cols}")


def _transpose_lookup(a: CsrMatrix):
    """For each stored entry, the position of its transpose (or -1)."""
    n = a.n_rows
    rows = a.row_indices()
    keys = rows * n + a.col_idx  # sorted: CSR is canonical
    tkeys = a.col_idx * n + rows
    pos = np.searchsorted(keys, tkeys)
    pos_c = np.minimum(pos, max(len(keys) - 1, 0))
    found = (pos < len(keys)) & (keys[pos_c] == tkeys) if len(keys) else np.zeros(0, bool)
    return rows, np.where(found, pos_c, -1)


def analyze_symmetry(a: CsrMatrix) -> SymmetryReport:
    _require_square(a)
    rows, tpos = _transpose_lookup(a)
    missing = tpos < 0
    diag_present = np.zeros(a.n_rows, dtype=bool)
    diag_present[rows[rows == a.col_idx]] = True
    n_missing_t = int(missing.sum())
    n_missing_d = int(a.n_rows - diag_present.sum())
    first = None
    if n_missing_t:
        k = int(np.flatnonzero(missing)[0])
        first = (int(rows[k]), int(a.col_idx[k]))
    elif n_missing_d:
        i = int(np.flatnonzero(~diag_present)[0])
        first = (i, i)
    structural = n_missing_t == 0 and n_missing_d == 0
    value_sym = structural and bool(np.all(a.values[tpos] == a.values))
    return SymmetryReport(structural, value_sym, n_missing_t, n_missing_d, first)


def symmetrize_pattern(a: CsrMatrix) -> CsrMatrix:
    """Insert explicit zeros for every missing transpose and diagonal entry."""
    _require_square(a)
    rows, tpos = _transpose_lookup(a)
    missing = tpos < 0
    present = np.zeros(a.n_rows, dtype=bool)
    present[rows[rows == a.col_idx]] = True
    no_diag = np.flatnonzero(~present)
    if not missing.any() and len(no_diag) == 0:
        return a
    add_r = np.concatenate([a.col_idx[missing], no_diag])
    add_c = np.concatenate([rows[missing], no_diag])
    t = TripletMatrix(a.n_rows, a.n_cols,
                      np.concatenate([rows, add_r]),
                      np.concatenate([a.col_idx, add_c]),
                      np.concatenate([a.values, np.zeros(len(add_r))]))
    return build_csr(t)


def csr_to_csrc(a: CsrMatrix, elide_symmetric: bool = True) -> CsrcMatrix:
    """Convert a structurally symmetric CSR matrix to CSRC.

    With ``elide_symmetric`` (the default) a bit-exactly symmetric matrix is
    stored without ``au``.
    """
    _require_square(a)
    rep = analyze_symmetry(a)
    if not rep.structurally_symmetric:
        i, j = rep.first_unmatched
        what = "diagonal entry" if i == j else f"transpose of entry ({i}, {j}), i.e. ({j}, {i}),"
        raise StructureError(f"matrix is not structurally symmetric: {what} is missing")
    n = a.n_rows
    rows, tpos = _transpose_lookup(a)
    cols = a.col_idx
    ad = np.zeros(n)
    dmask = rows == cols
    ad[rows[dmask]] = a.values[dmask]
    lmask = cols < rows
    ja = cols[lmask]
    al = a.values[lmask]
    au = a.values[tpos[lmask]]
    ia = np.zeros(n + 1, dtype=INDEX_DTYPE)
    np.cumsum(np.bincount(rows[lmask], minlength=n), out=ia[1:])
    if rep.value_symmetric and elide_symmetric:
        return CsrcMatrix(n, ad, ia, ja, al, None, True)
    return CsrcMatrix(n, ad, ia, ja, al, au, rep.value_symmetric)


def csrc_to_csr(a: CsrcMatrix) -> CsrMatrix:
    """Expand CSRC back to canonical CSR (explicit zeros on the diagonal kept)."""
    lrows = a.lower_rows()
    diag = np.arange(a.n, dtype=INDEX_DTYPE)
    t = TripletMatrix(a.n, a.n,
                      np.concatenate([diag, lrows, a.ja]),
                      np.concatenate([diag, a.ja, lrows]),
                      np.concatenate([a.ad, a.al, a.upper]))
    return build_csr(t)


def decompose_rect(a: CsrMatrix, symmetrize: bool = False,
                   elide_symmetric: bool = True) -> CsrcRectMatrix:
    """Split an n x m matrix (m > n) into a CSRC square part and a CSR tail."""
    n, m = a.n_rows, a.n_cols
    if m <= n:
        raise StructureError(f"rectangular decomposition needs m > n, got {n}x{m}")
    rows = a.row_indices()
    sq = a.col_idx < n
    square = build_csr(TripletMatrix(n, n, rows[sq], a.col_idx[sq], a.values[sq]))
    if symmetrize:
        square = symmetrize_pattern(square)
    rect = build_csr(TripletMatrix(n, m - n, rows[~sq], a.col_idx[~sq] - n, a.values[~sq]))
    return CsrcRectMatrix(csr_to_csrc(square, elide_symmetric), rect)


def working_set_kb(n: int, nnz_stored: int, value_symmetric: bool) -> float:
    """Kilobytes of ad/al/au, ia/ja, x and y touched by one square CSRC product.

    ``nnz_stored`` is the full nonzero count for a general matrix and the
    lower-plus-diagonal count when ``au`` is elided. Reals count 8 bytes and
    indices 4, whatever the in-memory index type.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if value_symmetric:
        k = nnz_stored - n
    else:
        k = (nnz_stored - n) / 2
    return (WS_REAL_BYTES * (nnz_stored + 2 * n) + WS_INDEX_BYTES * (k + n + 1)) / 1024.0


def from_dense(d: Sequence[Sequence[float]]) -> CsrMatrix:
    """CSR of the nonzero entries of a dense array (testing convenience)."""
    d = np.asarray(d, dtype=float)
    r, c = np.nonzero(d)
    return build_csr(TripletMatrix(d.shape[0], d.shape[1], r, c, d[r, c]))
