"""Execution plans for the local-buffers strategy.

Rows are cut into ``p`` contiguous blocks of roughly equal stored-entry
count. A block's effective range is the span of destination positions its
rows can write: its own rows plus every lower column they reference.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .core import CsrcMatrix, CsrcRectMatrix


@dataclass(frozen=True)
class RowPartition:
    p: int
    block_start: np.ndarray
    block_nnz: np.ndarray

    def block(self, t: int) -> Tuple[int, int]:
        return int(self.block_start[t]), int(self.block_start[t + 1])

    def blocks(self) -> List[Tuple[int, int]]:
        return [self.block(t) for t in range(self.p)]


@dataclass(frozen=True)
class EffectiveRange:
    lo: int
    hi: int  # inclusive

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"empty effective range [{self.lo}, {self.hi}]")

    def __contains__(self, q: int) -> bool:
        return self.lo <= q <= self.hi


@dataclass(frozen=True)
class IntervalPlan:
    """Atomic intervals ``[boundaries[k], boundaries[k+1])`` with their contributors."""

    boundaries: np.ndarray
    contributors: Tuple[Tuple[int, ...], ...]

    @property
    def n_intervals(self) -> int:
        return sum(1 for ids in self.contributors if ids)

    def intervals(self):
        """Yield ``(lo, hi, ids)`` with ``hi`` inclusive, skipping uncovered gaps."""
        for k, ids in enumerate(self.contributors):
            if ids:
                yield int(self.boundaries[k]), int(self.boundaries[k + 1]) - 1, ids


def split_counts(counts, p: int, allow_empty: bool = False) -> np.ndarray:
    """Boundaries of ``p`` contiguous groups of ``counts`` with balanced sums.

    Boundary ``t`` sits at the prefix position closest to ``t * total / p``
    (ties resolved towards the earlier row). Unless ``allow_empty`` is set,
    each group keeps at least one item.
    """
    counts = np.asarray(counts, dtype=np.int64)
    n = len(counts)
    if p < 1:
        raise ValueError("p must be >= 1")
    if not allow_empty and p > n:
        raise ValueError(f"cannot cut {n} rows into {p} non-empty blocks")
    prefix = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=prefix[1:])
    ideal = prefix[-1] / p
    bounds = np.zeros(p + 1, dtype=np.int64)
    bounds[p] = n
    for t in range(1, p):
        target = t * ideal
        b = int(np.searchsorted(prefix, target))
        if b > 0 and (b > n or abs(prefix[b - 1] - target) <= abs(prefix[b] - target)):
            b -= 1
        if allow_empty:
            b = max(b, int(bounds[t - 1]))
        else:
            b = min(max(b, int(bounds[t - 1]) + 1), n - (p - t))
        bounds[t] = b
    return bounds


def partition_by_nnz(a, p: int) -> RowPartition:
    """Contiguous row blocks balanced by stored entries (diagonal + lower, plus
    any rectangular tail entries)."""
    counts = a.row_counts()
    n = len(counts)
    if p < 1 or p > n:
        raise ValueError(f"thread count must be in [1, {n}], got {p}")
    bounds = split_counts(counts, p)
    prefix = np.concatenate([[0], np.cumsum(counts)])
    return RowPartition(p, bounds, np.diff(prefix[bounds]))


def _square(a) -> CsrcMatrix:
    return a.square if isinstance(a, CsrcRectMatrix) else a


def effective_range(a, block: Tuple[int, int]) -> EffectiveRange:
    """Inclusive span of y positions written by rows ``block[0]..block[1]-1``."""
    a = _square(a)
    r0, r1 = block
    if r1 <= r0:
        raise ValueError("block must be non-empty")
    lo = r0
    starts, ends = a.ia[r0:r1], a.ia[r0 + 1:r1 + 1]
    nonempty = ends > starts
    if nonempty.any():
        # ja is sorted within a row, so the row minimum is its first entry
        lo = min(lo, int(a.ja[starts[nonempty]].min()))
    return EffectiveRange(lo, r1 - 1)


def effective_ranges(a, part: RowPartition) -> List[EffectiveRange]:
    return [effective_range(a, blk) for blk in part.blocks()]


def build_interval_plan(ranges: Sequence[EffectiveRange]) -> IntervalPlan:
    """Cut the union of the ranges at every range endpoint.

    Within each resulting interval the set of covering ranges is constant.
    Positions covered by no range get an empty contributor tuple.
    """
    if not ranges:
        raise ValueError("need at least one range")
    edges = sorted({r.lo for r in ranges} | {r.hi + 1 for r in ranges})
    contributors = tuple(
        tuple(b for b, r in enumerate(ranges) if r.lo <= lo <= r.hi)
        for lo in edges[:-1])
    return IntervalPlan(np.array(edges, dtype=np.int64), contributors)
