"""Multi-threaded CSRC products.

Two ways of keeping concurrent row updates off each other's destination
entries:

* local buffers: worker ``b`` computes its row block into a private vector,
  and the private vectors are summed into ``y`` afterwards. Four schemes for
  zeroing and summing the buffers are provided (see :class:`Accum`).
* colorful: rows are grouped into classes whose write sets are pairwise
  disjoint; classes run one after another and workers write ``y`` directly.

Each plan owns a team of ``p`` threads. A product runs as fork-join phases
(init, compute, accumulate) separated by team barriers; the jitted loops
release the GIL so the team runs concurrently.
"""

from __future__ import annotations

import enum
import threading
import time
import weakref
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from . import _jit
from .coloring import Coloring, ConflictMode, color_matrix
from .core import CsrcMatrix, CsrcRectMatrix
from .kernels import csrc_operands, spmv
from .scheduling import (EffectiveRange, IntervalPlan, RowPartition, build_interval_plan,
                         effective_ranges, partition_by_nnz, split_counts)


class Kind(str, enum.Enum):
    SEQUENTIAL = "sequential"
    LOCAL_BUFFERS = "local_buffers"
    COLORFUL = "colorful"


class Accum(str, enum.Enum):
    ALL_IN_ONE = "all_in_one"
    PER_BUFFER = "per_buffer"
    EFFECTIVE = "effective"
    INTERVAL = "interval"


@dataclass(frozen=True)
class Strategy:
    kind: Kind
    accum: Optional[Accum] = None
    p: int = 1
    conflict_mode: ConflictMode = ConflictMode.NEIGHBORHOOD

    def __post_init__(self):
        kind = Kind(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "conflict_mode", ConflictMode(self.conflict_mode))
        if self.p < 1:
            raise ValueError("thread count must be >= 1")
        if kind is Kind.LOCAL_BUFFERS:
            if self.accum is None:
                raise ValueError("local_buffers needs an accumulation method")
            object.__setattr__(self, "accum", Accum(self.accum))
        elif self.accum is not None:
            raise ValueError(f"accumulation method given for {kind.value}")
        if kind is Kind.SEQUENTIAL and self.p != 1:
            raise ValueError("sequential strategy runs on one thread")

    @classmethod
    def sequential(cls) -> "Strategy":
        return cls(Kind.SEQUENTIAL)

    @classmethod
    def local_buffers(cls, accum, p: int) -> "Strategy":
        return cls(Kind.LOCAL_BUFFERS, Accum(accum), p)

    @classmethod
    def colorful(cls, p: int, mode=ConflictMode.NEIGHBORHOOD) -> "Strategy":
        return cls(Kind.COLORFUL, None, p, ConflictMode(mode))

    @property
    def label(self) -> str:
        if self.kind is Kind.LOCAL_BUFFERS:
            return f"buffers/{self.accum.value}/p{self.p}"
        if self.kind is Kind.COLORFUL:
            return f"colorful/{self.conflict_mode.value}/p{self.p}"
        return "sequential"


@dataclass
class PhaseTimings:
    init_max: float = 0.0
    compute_max: float = 0.0
    accumulate_max: float = 0.0

    @property
    def total(self) -> float:
        return self.init_max + self.compute_max + self.accumulate_max

    def __iadd__(self, other: "PhaseTimings") -> "PhaseTimings":
        self.init_max += other.init_max
        self.compute_max += other.compute_max
        self.accumulate_max += other.accumulate_max
        return self


@dataclass(frozen=True)
class AllocationStats:
    n_buffers: int
    buffer_length: int

    @property
    def n_reals(self) -> int:
        return self.n_buffers * self.buffer_length


def allocation_stats(s: Strategy, n: int = 0) -> AllocationStats:
    """Private destination vectors a product with ``s`` uses (length ``n`` each)."""
    if s.kind is Kind.LOCAL_BUFFERS and s.p >= 2:
        return AllocationStats(s.p, n)
    return AllocationStats(0, 0)


class BufferPool:
    """``p`` private destination vectors stored as rows of one (p, n) array."""

    def __init__(self, p: int, n: int, ranges: List[EffectiveRange]):
        self.data = np.zeros((p, n))
        self.flat = self.data.reshape(-1)
        self.range_lo = np.array([r.lo for r in ranges], dtype=np.int64)
        self.range_hi = np.array([r.hi for r in ranges], dtype=np.int64)

    @property
    def p(self) -> int:
        return self.data.shape[0]

    @property
    def n(self) -> int:
        return self.data.shape[1]


def _even_slices(length: int, p: int) -> List[Tuple[int, int]]:
    edges = np.linspace(0, length, p + 1).round().astype(np.int64)
    return [(int(edges[w]), int(edges[w + 1])) for w in range(p)]


class _Team:
    """Fixed set of ``p`` threads; ``run(fn)`` calls ``fn(w)`` on each, concurrently."""

    def __init__(self, p: int):
        self.p = p
        self.barrier = threading.Barrier(p)
        self._pool = ThreadPoolExecutor(max_workers=p, thread_name_prefix="csrc")
        self._finalizer = weakref.finalize(self, self._pool.shutdown, wait=False)

    def run(self, fn):
        self.barrier.reset()
        futures = [self._pool.submit(self._guard, fn, w) for w in range(self.p)]
        return [f.result() for f in futures]

    def _guard(self, fn, w):
        try:
            return fn(w)
        except BaseException:
            self.barrier.abort()
            raise

    def close(self):
        self._finalizer()


class _Plan:
    strategy: Strategy

    def __init__(self, a, strategy: Strategy):
        self.matrix = a
        self.strategy = strategy
        self.n = a.n
        self._team: Optional[_Team] = None
        self._lock = threading.Lock()

    @property
    def team(self) -> _Team:
        if self._team is None:
            self._team = _Team(self.strategy.p)
        return self._team

    def close(self):
        if self._team is not None:
            self._team.close()
            self._team = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class BufferPlan(_Plan):
    """Row partition, effective ranges, interval plan and buffer pool for one
    (matrix, local-buffers strategy) pair. Buffers are allocated once here and
    reused by every product."""

    def __init__(self, a, strategy: Strategy, partition: Optional[RowPartition] = None):
        super().__init__(a, strategy)
        p = strategy.p
        self.partition = partition or partition_by_nnz(a, p)
        if self.partition.p != p:
            raise ValueError("partition thread count differs from strategy")
        self.ranges = effective_ranges(a, self.partition)
        self.intervals: IntervalPlan = build_interval_plan(self.ranges)
        self.pool: Optional[BufferPool] = BufferPool(p, self.n, self.ranges) if p > 1 else None
        self.n_allocations = 1 if self.pool is not None else 0
        n = self.n
        self.slabs = _even_slices(p * n, p)
        self.slices = _even_slices(n, p)
        self.all_ids = np.arange(p, dtype=np.int64)
        # buffers whose range can reach into each ownership block
        self.block_candidates = []
        for t in range(p):
            r0, r1 = self.partition.block(t)
            ids = [b for b, r in enumerate(self.ranges) if r.lo < r1 and r.hi >= r0]
            self.block_candidates.append(np.array(ids, dtype=np.int64))
        self.worker_intervals: List[List[Tuple[int, int, np.ndarray]]] = [[] for _ in range(p)]
        for k, (lo, hi, ids) in enumerate(self.intervals.intervals()):
            self.worker_intervals[k % p].append((lo, hi + 1, np.array(ids, dtype=np.int64)))


class ColorPlan(_Plan):
    """Coloring plus, per color class, a stored-entry-balanced split of the
    class's rows across the team."""

    def __init__(self, a, strategy: Strategy, coloring: Optional[Coloring] = None):
        super().__init__(a, strategy)
        sq = a.square if isinstance(a, CsrcRectMatrix) else a
        if coloring is None:
            coloring = color_matrix(sq, strategy.conflict_mode)
        if len(coloring.color) != self.n:
            raise ValueError("coloring does not match matrix order")
        self.coloring = coloring
        counts = a.row_counts()
        self.class_rows = [np.ascontiguousarray(c, dtype=np.int64) for c in coloring.classes]
        self.class_splits = [split_counts(counts[rows], strategy.p, allow_empty=True)
                             for rows in self.class_rows]
        self.slices = _even_slices(self.n, strategy.p)
        self.n_allocations = 0


def make_plan(a, strategy: Strategy, coloring: Optional[Coloring] = None,
              partition: Optional[RowPartition] = None):
    if strategy.kind is Kind.LOCAL_BUFFERS:
        return BufferPlan(a, strategy, partition)
    if strategy.kind is Kind.COLORFUL:
        return ColorPlan(a, strategy, coloring)
    return None


def _source(a, x) -> np.ndarray:
    m = a.m if isinstance(a, CsrcRectMatrix) else a.n
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 1 or len(x) != m:
        raise ValueError(f"x has length {len(x)}, matrix expects {m}")
    return x


def _sequential(a, x):
    t0 = time.perf_counter()
    y = spmv(a, x)
    return y, PhaseTimings(compute_max=time.perf_counter() - t0)


def spmv_parallel(a, x, s: Strategy, plan=None) -> Tuple[np.ndarray, PhaseTimings]:
    """``y = A x`` with strategy ``s``; returns ``(y, per-phase team maxima)``.

    ``plan`` comes from :func:`make_plan` and is built on the fly when omitted
    (reuse it for repeated products). With one thread the global destination
    vector is written directly and no buffers are touched.
    """
    if not isinstance(a, (CsrcMatrix, CsrcRectMatrix)):
        raise TypeError("parallel products need a CSRC matrix")
    x = _source(a, x)
    if s.kind is Kind.SEQUENTIAL or s.p == 1:
        return _sequential(a, x)
    own_plan = plan is None
    if own_plan:
        plan = make_plan(a, s)
    elif plan.matrix is not a or plan.strategy != s:
        raise ValueError("plan was built for a different matrix or strategy")
    try:
        with plan._lock:
            if s.kind is Kind.LOCAL_BUFFERS:
                return _run_buffers(plan, a, x)
            return _run_colorful(plan, a, x)
    finally:
        if own_plan:
            plan.close()


def _run_buffers(plan: BufferPlan, a, x):
    s = plan.strategy
    p, n = s.p, plan.n
    pool = plan.pool
    bufs, flat = pool.data, pool.flat
    ops = csrc_operands(a)
    y = np.empty(n)
    times = np.zeros((p, 3))
    barrier = plan.team.barrier
    accum = s.accum

    def work(w):
        clock = time.perf_counter
        t0 = clock()
        if accum is Accum.ALL_IN_ONE:
            lo, hi = plan.slabs[w]
            _jit.fill_zero(flat, lo, hi)
        elif accum is Accum.PER_BUFFER:
            lo, hi = plan.slices[w]
            for b in range(p):
                _jit.fill_zero(bufs[b], lo, hi)
                barrier.wait()
        elif accum is Accum.EFFECTIVE:
            _jit.fill_zero(bufs[w], int(pool.range_lo[w]), int(pool.range_hi[w]) + 1)
        else:
            for lo, hi, ids in plan.worker_intervals[w]:
                for b in ids:
                    _jit.fill_zero(bufs[b], lo, hi)
        times[w, 0] = clock() - t0
        barrier.wait()

        t0 = clock()
        r0, r1 = plan.partition.block(w)
        _jit.csrc_rows(*ops, x, n, bufs[w], r0, r1)
        times[w, 1] = clock() - t0
        barrier.wait()

        t0 = clock()
        if accum is Accum.ALL_IN_ONE:
            lo, hi = plan.slices[w]
            _jit.sum_buffers(y, bufs, plan.all_ids, lo, hi)
        elif accum is Accum.PER_BUFFER:
            lo, hi = plan.slices[w]
            for b in range(p):
                _jit.add_buffer(y, bufs[b], lo, hi, b == 0)
                barrier.wait()
        elif accum is Accum.EFFECTIVE:
            r0, r1 = plan.partition.block(w)
            _jit.sum_covering(y, bufs, plan.block_candidates[w], pool.range_lo, pool.range_hi, r0, r1)
        else:
            for lo, hi, ids in plan.worker_intervals[w]:
                _jit.sum_buffers(y, bufs, ids, lo, hi)
        times[w, 2] = clock() - t0

    plan.team.run(work)
    return y, PhaseTimings(*(float(v) for v in times.max(axis=0)))


def _run_colorful(plan: ColorPlan, a, x):
    p, n = plan.strategy.p, plan.n
    ops = csrc_operands(a)
    y = np.empty(n)
    times = np.zeros((p, 3))
    barrier = plan.team.barrier

    def work(w):
        clock = time.perf_counter
        t0 = clock()
        lo, hi = plan.slices[w]
        _jit.fill_zero(y, lo, hi)
        times[w, 0] = clock() - t0
        barrier.wait()

        t0 = clock()
        for rows, split in zip(plan.class_rows, plan.class_splits):
            s0, s1 = int(split[w]), int(split[w + 1])
            if s1 > s0:
                _jit.csrc_rowlist(*ops, x, n, y, rows, s0, s1)
            barrier.wait()
        times[w, 1] = clock() - t0

    plan.team.run(work)
    return y, PhaseTimings(*(float(v) for v in times.max(axis=0)))
