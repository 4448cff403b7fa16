"""Sparse matrix-vector products in compressed sparse row-column (CSRC) form,
with thread-parallel local-buffer and coloring strategies."""

from .coloring import (Coloring, ColorOrder, ConflictGraph, ConflictMode, color_matrix,
                       color_rows, conflict_graph, direct_conflicts, indirect_conflicts,
                       validate_coloring)
from .core import (CsrcMatrix, CsrcRectMatrix, CsrMatrix, StructureError, SymmetryReport,
                   TripletMatrix, analyze_symmetry, build_csr, csr_to_csrc, csrc_to_csr,
                   decompose_rect, from_dense, symmetrize_pattern, working_set_kb)
from .kernels import (Format, KernelStats, count_ops, instrumented_spmv, spmv, spmv_csr,
                      spmv_csrc, spmv_csrc_rect, spmv_csrc_transpose)
from .mmio import generate, read_matrix_market, write_matrix_market
from .parallel import (Accum, Kind, PhaseTimings, Strategy, allocation_stats, make_plan,
                       spmv_parallel)
from .scheduling import (EffectiveRange, IntervalPlan, RowPartition, build_interval_plan,
                         effective_range, partition_by_nnz)

__version__ = "0.1.0"
