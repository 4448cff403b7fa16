"""Conflict graphs over CSRC rows and greedy coloring into race-free classes.

Row ``i`` of a CSRC product writes ``y[i]`` and ``y[j]`` for every lower
column ``j``. Two rows conflict directly when one writes the other's own
position, and indirectly when they share some other write target. In
``neighborhood`` mode indirect conflicts are every pair of rows with a common
neighbour in the direct-conflict graph, a superset of the ``exact`` mode
pairs that actually share a lower column.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from . import _jit
from .core import CsrcMatrix, CsrcRectMatrix


class ConflictMode(str, enum.Enum):
    NEIGHBORHOOD = "neighborhood"
    EXACT = "exact"


class ColorOrder(str, enum.Enum):
    NATURAL = "natural"
    LARGEST_FIRST = "largest_first"
    SMALLEST_LAST = "smallest_last"


def _square(a) -> CsrcMatrix:
    return a.square if isinstance(a, CsrcRectMatrix) else a


def _edges_from_upper(m: sp.spmatrix) -> np.ndarray:
    """(E, 2) array of pairs u < v from the strict upper triangle of m, sorted."""
    m = sp.triu(m, k=1).tocoo()
    e = np.column_stack([m.row, m.col]).astype(np.int64)
    if len(e):
        e = e[np.lexsort((e[:, 1], e[:, 0]))]
    return e.reshape(-1, 2)


def _pattern(rows, cols, n) -> sp.csr_matrix:
    data = np.ones(len(rows), dtype=np.int64)
    return sp.csr_matrix((data, (rows, cols)), shape=(n, n))


@dataclass(frozen=True, eq=False)
class ConflictGraph:
    n: int
    direct_edges: np.ndarray
    indirect_edges: np.ndarray
    mode: ConflictMode

    def edge_set(self, which: str = "all") -> set:
        parts = {"direct": [self.direct_edges], "indirect": [self.indirect_edges],
                 "all": [self.direct_edges, self.indirect_edges]}[which]
        return {(int(u), int(v)) for e in parts for u, v in e}

    def adjacency(self) -> Tuple[np.ndarray, np.ndarray]:
        """CSR adjacency (ptr, neighbours) over direct and indirect edges."""
        e = np.concatenate([self.direct_edges, self.indirect_edges])
        g = _pattern(np.concatenate([e[:, 0], e[:, 1]]), np.concatenate([e[:, 1], e[:, 0]]), self.n)
        g.sort_indices()
        return g.indptr.astype(np.int64), g.indices.astype(np.int64)

    def degrees(self) -> np.ndarray:
        ptr, _ = self.adjacency()
        return np.diff(ptr)

    def to_dot(self, name: str = "conflicts") -> str:
        lines = [f"graph {name} {{"]
        lines += [f"  {v};" for v in range(self.n)]
        lines += [f"  {u} -- {v} [style=solid];" for u, v in self.direct_edges]
        lines += [f"  {u} -- {v} [style=dashed];" for u, v in self.indirect_edges]
        lines.append("}")
        return "\n".join(lines) + "\n"


def direct_conflicts(a) -> np.ndarray:
    """Edges ``{i, ja[t]}`` for each stored lower entry, as sorted (u, v) pairs, u < v."""
    a = _square(a)
    e = np.column_stack([a.ja, a.lower_rows()]).astype(np.int64)
    if len(e):
        e = e[np.lexsort((e[:, 1], e[:, 0]))]
    return e.reshape(-1, 2)


def indirect_conflicts(a, direct: np.ndarray, mode=ConflictMode.NEIGHBORHOOD) -> np.ndarray:
    a = _square(a)
    mode = ConflictMode(mode)
    n = a.n
    if mode is ConflictMode.NEIGHBORHOOD:
        g = _pattern(np.concatenate([direct[:, 0], direct[:, 1]]),
                     np.concatenate([direct[:, 1], direct[:, 0]]), n)
        shared = g @ g
    else:
        low = _pattern(a.lower_rows(), a.ja, n)
        shared = low @ low.T
    d = _pattern(direct[:, 0], direct[:, 1], n)
    shared = sp.triu(shared, k=1).tocsr()
    shared.data[:] = 1
    shared = shared - shared.multiply(d)
    shared.eliminate_zeros()
    return _edges_from_upper(shared)


def conflict_graph(a, mode=ConflictMode.NEIGHBORHOOD) -> ConflictGraph:
    """Conflict graph of the square part; a rectangular tail adds no conflicts."""
    a = _square(a)
    mode = ConflictMode(mode)
    d = direct_conflicts(a)
    return ConflictGraph(a.n, d, indirect_conflicts(a, d, mode), mode)


@dataclass(frozen=True, eq=False)
class Coloring:
    color: np.ndarray
    n_colors: int
    classes: Tuple[np.ndarray, ...]

    @classmethod
    def from_colors(cls, color) -> "Coloring":
        color = np.asarray(color, dtype=np.int64)
        used = np.unique(color)
        # renumber so colors are 0..k-1 and all non-empty
        remap = np.full(int(used.max()) + 1 if len(used) else 0, -1, dtype=np.int64)
        remap[used] = np.arange(len(used))
        color = remap[color]
        classes = tuple(np.flatnonzero(color == c) for c in range(len(used)))
        return cls(color, len(used), classes)


def _vertex_order(g: ConflictGraph, order) -> np.ndarray:
    if not isinstance(order, (str, ColorOrder)):
        order = np.asarray(order, dtype=np.int64)
        if sorted(order.tolist()) != list(range(g.n)):
            raise ValueError("order must be a permutation of the vertices")
        return order
    order = ColorOrder(order)
    if order is ColorOrder.NATURAL:
        return np.arange(g.n, dtype=np.int64)
    deg = g.degrees()
    if order is ColorOrder.LARGEST_FIRST:
        return np.argsort(-deg, kind="stable").astype(np.int64)
    return _smallest_last(g)


def _smallest_last(g: ConflictGraph) -> np.ndarray:
    ptr, adj = g.adjacency()
    deg = np.diff(ptr).tolist()
    buckets: List[set] = [set() for _ in range(max(deg, default=0) + 1)]
    for v, d in enumerate(deg):
        buckets[d].add(v)
    removed = [False] * g.n
    out = []
    low = 0
    for _ in range(g.n):
        low = max(low - 1, 0)
        while not buckets[low]:
            low += 1
        v = min(buckets[low])
        buckets[low].discard(v)
        removed[v] = True
        out.append(v)
        for w in adj[ptr[v]:ptr[v + 1]].tolist():
            if not removed[w]:
                buckets[deg[w]].discard(w)
                deg[w] -= 1
                buckets[deg[w]].add(w)
    return np.array(out[::-1], dtype=np.int64)


def color_rows(g: ConflictGraph, order=ColorOrder.NATURAL) -> Coloring:
    """First-fit greedy: each vertex, in ``order``, takes the lowest color not
    used by an already-colored neighbour."""
    if g.n == 0:
        return Coloring(np.zeros(0, dtype=np.int64), 0, ())
    ptr, adj = g.adjacency()
    color = _jit.greedy_color(ptr, adj, _vertex_order(g, order))
    return Coloring.from_colors(color)


@dataclass(frozen=True)
class ColoringCheck:
    valid: bool
    color: Optional[int] = None
    rows: Optional[Tuple[int, int]] = None
    position: Optional[int] = None

    def __bool__(self):
        return self.valid

    def describe(self) -> str:
        if self.valid:
            return "coloring is conflict-free"
        return (f"rows {self.rows[0]} and {self.rows[1]} (color {self.color}) "
                f"both write y[{self.position}]")


def write_set(a, i: int) -> np.ndarray:
    a = _square(a)
    return np.concatenate([[i], a.ja[a.ia[i]:a.ia[i + 1]]])


def validate_coloring(a, c: Coloring) -> ColoringCheck:
    """Check that no two rows of one class write the same y position."""
    a = _square(a)
    if len(c.color) != a.n:
        raise ValueError("coloring does not match matrix order")
    owner = np.full(a.n, -1, dtype=np.int64)
    stamp = np.full(a.n, -1, dtype=np.int64)
    for col, rows in enumerate(c.classes):
        for i in rows.tolist():
            for q in write_set(a, i).tolist():
                if stamp[q] == col:
                    return ColoringCheck(False, col, (int(owner[q]), i), q)
                stamp[q] = col
                owner[q] = i
    return ColoringCheck(True)


def color_matrix(a, mode=ConflictMode.NEIGHBORHOOD, order=ColorOrder.NATURAL) -> Coloring:
    return color_rows(conflict_graph(a, mode), order)
