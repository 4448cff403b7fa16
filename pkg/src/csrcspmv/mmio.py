"""Matrix Market coordinate files and synthetic matrix generators."""

from __future__ import annotations

import io
import os
from dataclasses import dataclass
from typing import IO, Union

import numpy as np

from .core import CsrMatrix, TripletMatrix

Source = Union[str, os.PathLike, IO]


class MatrixMarketError(ValueError):
    def __init__(self, msg: str, line: int = None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line is not None else msg)


@dataclass(frozen=True)
class MatrixMarketHeader:
    object: str
    format: str
    field: str
    symmetry: str


_FIELDS = {"real", "integer", "pattern"}
_SYMMETRIES = {"general", "symmetric", "skew-symmetric"}


def parse_header(line: str) -> MatrixMarketHeader:
    parts = line.strip().split()
    if len(parts) != 5 or parts[0].lower() != "%%matrixmarket":
        raise MatrixMarketError("missing %%MatrixMarket banner", 1)
    obj, fmt, fld, sym = (p.lower() for p in parts[1:])
    if obj != "matrix":
        raise MatrixMarketError(f"unsupported object {obj!r}", 1)
    if fmt != "coordinate":
        raise MatrixMarketError(f"only coordinate format is supported, got {fmt!r}", 1)
    if fld not in _FIELDS:
        raise MatrixMarketError(f"unsupported field {fld!r}", 1)
    if sym not in _SYMMETRIES:
        raise MatrixMarketError(f"unsupported symmetry {sym!r}", 1)
    return MatrixMarketHeader(obj, fmt, fld, sym)


def _open_text(source: Source):
    if hasattr(source, "read"):
        data = source.read()
        if isinstance(data, bytes):
            data = data.decode("ascii")
        return io.StringIO(data)
    return open(source, "r", encoding="ascii")


def read_matrix_market(source: Source) -> TripletMatrix:
    """Read a coordinate Matrix Market file into 0-based triplets.

    Symmetric headers are expanded to both triangles; skew-symmetric ones
    get the negated transpose. Pattern files give every entry the value 1.0.
    """
    with _open_text(source) as f:
        lineno = 1
        header = parse_header(f.readline())
        size = None
        for line in f:
            lineno += 1
            s = line.strip()
            if s and not s.startswith("%"):
                size = s.split()
                break
        if size is None:
            raise MatrixMarketError("missing size line", lineno)
        try:
            n_rows, n_cols, count = (int(v) for v in size)
        except ValueError:
            raise MatrixMarketError(f"bad size line {' '.join(size)!r}", lineno) from None
        ncol = 2 if header.field == "pattern" else 3
        rows = np.empty(count, dtype=np.int64)
        cols = np.empty(count, dtype=np.int64)
        vals = np.ones(count)
        k = 0
        for line in f:
            lineno += 1
            s = line.strip()
            if not s or s.startswith("%"):
                continue
            parts = s.split()
            if len(parts) < ncol:
                raise MatrixMarketError(f"expected {ncol} fields, got {len(parts)}", lineno)
            if k >= count:
                raise MatrixMarketError(f"more than the declared {count} entries", lineno)
            try:
                i, j = int(parts[0]), int(parts[1])
                if ncol == 3:
                    vals[k] = float(parts[2])
            except ValueError:
                raise MatrixMarketError(f"unparsable entry {s!r}", lineno) from None
            if not (1 <= i <= n_rows and 1 <= j <= n_cols):
                raise MatrixMarketError(f"index ({i}, {j}) outside {n_rows}x{n_cols}", lineno)
            if header.symmetry != "general" and j > i:
                raise MatrixMarketError(
                    f"entry ({i}, {j}) above the diagonal in a {header.symmetry} file", lineno)
            if header.symmetry == "skew-symmetric" and i == j:
                raise MatrixMarketError("diagonal entry in a skew-symmetric file", lineno)
            rows[k], cols[k] = i - 1, j - 1
            k += 1
        if k != count:
            raise MatrixMarketError(f"declared {count} entries, found {k}", lineno)

    if header.symmetry != "general":
        off = rows != cols
        sign = -1.0 if header.symmetry == "skew-symmetric" else 1.0
        rows, cols, vals = (np.concatenate([rows, cols[off]]),
                            np.concatenate([cols, rows[off]]),
                            np.concatenate([vals, sign * vals[off]]))
    return TripletMatrix(n_rows, n_cols, rows, cols, vals)


def write_matrix_market(a: CsrMatrix, dest: Source, comment: str = None) -> None:
    """Write ``a`` as a general real coordinate file with 17 significant digits."""
    own = not hasattr(dest, "write")
    f = open(dest, "w", encoding="ascii") if own else dest
    try:
        f.write("%%MatrixMarket matrix coordinate real general\n")
        if comment:
            for line in comment.splitlines():
                f.write(f"% {line}\n")
        f.write(f"{a.n_rows} {a.n_cols} {a.nnz}\n")
        rows = a.row_indices() + 1
        for i, j, v in zip(rows.tolist(), (a.col_idx + 1).tolist(), a.values.tolist()):
            f.write(f"{i} {j} {v:.17g}\n")
    finally:
        if own:
            f.close()


def generate(kind: str, n: int, **params) -> TripletMatrix:
    """Synthetic test matrices.

    ``dense``: all n*n entries nonzero, not symmetric (``seed``).
    ``band``: pattern ``|i - j| <= h`` with a dominant diagonal; values are
    symmetric unless ``symmetric=False`` (``h``, ``seed``).
    ``random_sym``: random structurally symmetric pattern with full diagonal
    (``density``, ``seed``, ``symmetric``).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    seed = int(params.pop("seed", 0))
    rng = np.random.default_rng(seed)
    if kind == "dense":
        _no_extra(kind, params)
        r, c = np.divmod(np.arange(n * n, dtype=np.int64), n)
        vals = rng.uniform(0.5, 1.5, n * n)
        return TripletMatrix(n, n, r, c, vals)
    if kind == "band":
        h = int(params.pop("h", 1))
        symmetric = _flag(params.pop("symmetric", True))
        _no_extra(kind, params)
        if not 0 <= h < n:
            raise ValueError(f"band half-width must be in [0, n), got {h}")
        offs = np.arange(1, h + 1)
        lr = np.concatenate([np.arange(d, n) for d in offs]) if h else np.zeros(0, np.int64)
        lc = np.concatenate([np.arange(0, n - d) for d in offs]) if h else np.zeros(0, np.int64)
        lo_vals = -rng.uniform(0.1, 1.0, len(lr))
        up_vals = lo_vals if symmetric else -rng.uniform(0.1, 1.0, len(lr))
        diag = np.arange(n)
        dvals = 2.0 * h + 1.0 + rng.uniform(0.0, 1.0, n)
        return TripletMatrix(n, n, np.concatenate([diag, lr, lc]),
                             np.concatenate([diag, lc, lr]),
                             np.concatenate([dvals, lo_vals, up_vals]))
    if kind == "random_sym":
        density = float(params.pop("density", 0.05))
        symmetric = _flag(params.pop("symmetric", False))
        _no_extra(kind, params)
        if not 0.0 <= density <= 1.0:
            raise ValueError("density must be in [0, 1]")
        n_low = n * (n - 1) // 2
        k = int(round(density * n_low))
        pick = np.sort(rng.choice(n_low, size=k, replace=False)) if k else np.zeros(0, np.int64)
        # unrank strict-lower positions row by row: row i holds i entries
        lr = np.floor((1 + np.sqrt(1 + 8 * pick)) / 2).astype(np.int64)
        lr -= (lr * (lr - 1) // 2 > pick)
        lr += (lr * (lr + 1) // 2 <= pick)
        lc = pick - lr * (lr - 1) // 2
        lo_vals = rng.uniform(-1.0, 1.0, k)
        up_vals = lo_vals if symmetric else rng.uniform(-1.0, 1.0, k)
        diag = np.arange(n)
        dvals = rng.uniform(1.0, 2.0, n)
        return TripletMatrix(n, n, np.concatenate([diag, lr, lc]),
                             np.concatenate([diag, lc, lr]),
                             np.concatenate([dvals, lo_vals, up_vals]))
    raise ValueError(f"unknown generator {kind!r}")


def _flag(v) -> bool:
    if isinstance(v, str):
        if v.lower() in {"1", "true", "yes", "y"}:
            return True
        if v.lower() in {"0", "false", "no", "n"}:
            return False
        raise ValueError(f"not a boolean: {v!r}")
    return bool(v)


def _no_extra(kind, params):
    if params:
        raise ValueError(f"unknown parameter(s) for {kind}: {', '.join(sorted(params))}")


def parse_generator(spec: str):
    """``"band:n=1000,h=8"`` -> ``("band", 1000, {"h": "8"})``."""
    kind, _, rest = spec.partition(":")
    params = {}
    for item in filter(None, rest.split(",")):
        key, eq, val = item.partition("=")
        if not eq:
            raise ValueError(f"generator parameter {item!r} is not key=value")
        params[key.strip()] = val.strip()
    if "n" not in params:
        raise ValueError("generator spec needs n=...")
    n = int(params.pop("n"))
    for key in ("h", "seed"):
        if key in params:
            params[key] = int(params[key])
    if "density" in params:
        params["density"] = float(params["density"])
    return kind.strip(), n, params
