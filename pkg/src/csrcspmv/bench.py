"""Benchmark harness: timed repeated products, verification and matrix stats."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import statistics
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Iterable, List, Optional, Sequence

import numpy as np

from .coloring import Coloring, color_matrix, validate_coloring
from .core import (CsrcRectMatrix, CsrMatrix, StructureError, analyze_symmetry,
                   build_csr, csr_to_csrc, decompose_rect, symmetrize_pattern, working_set_kb)
from .kernels import Format, count_ops, spmv, spmv_csr
from .mmio import generate, parse_generator, read_matrix_market
from .parallel import Kind, Strategy, make_plan, spmv_parallel

log = logging.getLogger(__name__)

PARALLEL_RTOL = 1e-12
DENSE_ORACLE_MAX_N = 2000

STRATEGY_NAMES = {"seq": Kind.SEQUENTIAL, "buffers": Kind.LOCAL_BUFFERS, "colorful": Kind.COLORFUL}
ACCUM_NAMES = ("all-in-one", "per-buffer", "effective", "interval")


class VerificationError(RuntimeError):
    pass


def source_vector(n: int) -> np.ndarray:
    """Deterministic x with x[i] = 1 + (i mod 7) / 7."""
    return 1.0 + (np.arange(n) % 7) / 7.0


def rel_error(y, ref) -> float:
    """Normwise relative error max|y - ref| / max|ref| (absolute if ref is 0)."""
    y, ref = np.asarray(y), np.asarray(ref)
    scale = float(np.max(np.abs(ref))) if len(ref) else 0.0
    diff = float(np.max(np.abs(y - ref))) if len(ref) else 0.0
    return diff / scale if scale > 0 else diff


@dataclass
class LoadedMatrix:
    name: str
    csr: CsrMatrix
    symmetrized: bool = False
    _csrc: object = field(default=None, repr=False)

    @property
    def rectangular(self) -> bool:
        return self.csr.n_cols > self.csr.n_rows

    def csrc(self, symmetrize: bool = False):
        """CSRC (or rectangular CSRC) form; asymmetric input needs ``symmetrize``."""
        if self._csrc is not None:
            return self._csrc
        a = self.csr
        if self.rectangular:
            try:
                self._csrc = decompose_rect(a, symmetrize=False)
            except StructureError:
                if not symmetrize:
                    raise
                self._csrc = decompose_rect(a, symmetrize=True)
                self.symmetrized = True
            return self._csrc
        if a.n_cols < a.n_rows:
            raise StructureError("matrices with more rows than columns are not supported")
        rep = analyze_symmetry(a)
        if not rep.structurally_symmetric:
            if not symmetrize:
                raise StructureError(
                    f"{self.name} is not structurally symmetric "
                    f"({rep.missing_transposes} missing transposes, "
                    f"{rep.missing_diagonal} missing diagonal entries); use --symmetrize")
            a = symmetrize_pattern(a)
            self.symmetrized = True
        self._csrc = csr_to_csrc(a)
        return self._csrc


def load_matrix(path: Optional[str] = None, gen: Optional[str] = None) -> LoadedMatrix:
    if (path is None) == (gen is None):
        raise ValueError("give exactly one of a matrix file or a generator spec")
    if path is not None:
        t = read_matrix_market(path)
        name = Path(path).stem
    else:
        kind, n, params = parse_generator(gen)
        t = generate(kind, n, **params)
        name = f"{kind}_{n}"
    return LoadedMatrix(name, build_csr(t))


@dataclass
class BenchConfig:
    format: str = "csrc"
    strategy: str = "seq"
    accum: Optional[str] = None
    p: int = 1
    reps: int = 1000
    runs: int = 3
    symmetrize: bool = False
    conflict_mode: str = "neighborhood"

    def to_strategy(self) -> Strategy:
        if self.strategy not in STRATEGY_NAMES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        kind = STRATEGY_NAMES[self.strategy]
        if kind is Kind.SEQUENTIAL:
            if self.p != 1:
                raise ValueError("--strategy seq runs on one thread")
            return Strategy.sequential()
        if kind is Kind.COLORFUL:
            return Strategy.colorful(self.p, self.conflict_mode)
        accum = self.accum or "effective"
        if accum not in ACCUM_NAMES:
            raise ValueError(f"unknown accumulation method {accum!r}")
        return Strategy.local_buffers(accum.replace("-", "_"), self.p)


@dataclass
class BenchReport:
    matrix: str
    n: int
    nnz_stored: int
    nnz_full: int
    nnz_per_row: int
    ws_kb: int
    format: str
    strategy: str
    accum: str
    p: int
    reps: int
    runs: int
    median_total_seconds: float
    mflops_effective: float
    mflops_true: float
    speedup_vs_seq_csrc: Optional[float]
    init_max: float
    compute_max: float
    accumulate_max: float
    n_colors: Optional[int]

    @classmethod
    def columns(cls) -> List[str]:
        return [f.name for f in fields(cls)]

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def reports_to_csv(reports: Sequence[BenchReport]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=BenchReport.columns(), lineterminator="\n")
    w.writeheader()
    for r in reports:
        w.writerow({k: ("" if v is None else (repr(v) if isinstance(v, float) else v))
                    for k, v in r.to_dict().items()})
    return buf.getvalue()


def reports_to_json(reports: Sequence[BenchReport]) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2)


def _csr_ws_kb(a: CsrMatrix) -> float:
    return (8 * (a.nnz + a.n_rows + a.n_cols) + 4 * (a.nnz + a.n_rows + 1)) / 1024.0


def _true_flops(a) -> int:
    if isinstance(a, CsrMatrix):
        return count_ops(Format.CSR, a.n_rows, a.nnz).flops
    if isinstance(a, CsrcRectMatrix):
        sq = a.square
        fmt = Format.CSRC_SYM if sq.au is None else Format.CSRC
        return count_ops(fmt, sq.n, sq.nnz_full).flops + 2 * a.rect.nnz
    fmt = Format.CSRC_SYM if a.au is None else Format.CSRC
    return count_ops(fmt, a.n, a.nnz_full).flops


def _median_time(fn: Callable[[], object], reps: int, runs: int) -> float:
    totals = []
    for _ in range(runs):
        t0 = time.perf_counter()
        for _ in range(reps):
            fn()
        totals.append(time.perf_counter() - t0)
    return statistics.median(totals)


def _stats(mat: LoadedMatrix, a):
    """(n, nnz_stored, nnz_full, ws_kb) of the representation being timed."""
    if isinstance(a, CsrMatrix):
        return a.n_rows, a.nnz, a.nnz, _csr_ws_kb(a)
    if isinstance(a, CsrcRectMatrix):
        sq = a.square
        ws = sq.working_set_kb() + (12 * a.rect.nnz + 4 * (sq.n + 1) + 8 * a.rect.n_cols) / 1024.0
        return sq.n, sq.nnz_stored + a.rect.nnz, a.nnz_full, ws
    return a.n, a.nnz_stored, a.nnz_full, a.working_set_kb()


def run_benchmark(mat: LoadedMatrix, config: BenchConfig,
                  coloring: Optional[Coloring] = None) -> BenchReport:
    """Time ``config.reps`` products per run over ``config.runs`` runs.

    A verification pass against the sequential kernel runs before any timing.
    Speedup is measured against a sequential CSRC run with the same reps/runs.
    """
    strategy = config.to_strategy()
    fmt = config.format
    if fmt not in ("csr", "csrc"):
        raise ValueError(f"unknown format {fmt!r}")
    x = source_vector(mat.csr.n_cols)

    phases = [0.0, 0.0, 0.0]
    plan = None
    if fmt == "csr":
        if strategy.kind is not Kind.SEQUENTIAL:
            raise ValueError("the csr format only supports --strategy seq")
        a = mat.csr

        def product():
            spmv_csr(a, x)
    else:
        a = mat.csrc(config.symmetrize)
        if strategy.p > 1:
            plan = make_plan(a, strategy, coloring=coloring)
        y, _ = spmv_parallel(a, x, strategy, plan)
        err = rel_error(y, spmv(a, x))
        if err > PARALLEL_RTOL:
            if plan is not None:
                plan.close()
            raise VerificationError(f"{strategy.label}: relative error {err:.3e} before timing")

        def product():
            _, t = spmv_parallel(a, x, strategy, plan)
            phases[0] += t.init_max
            phases[1] += t.compute_max
            phases[2] += t.accumulate_max

    try:
        median = _median_time(product, config.reps, config.runs)
    finally:
        if plan is not None:
            plan.close()
    n_calls = config.reps * config.runs

    baseline = None
    if fmt == "csrc" and strategy.kind is Kind.SEQUENTIAL:
        baseline = median
    else:
        try:
            sq = mat.csrc(config.symmetrize)
            baseline = _median_time(lambda: spmv(sq, x), config.reps, config.runs)
        except StructureError:
            log.info("no CSRC baseline for %s: matrix is not structurally symmetric", mat.name)

    n, nnz_stored, nnz_full, ws = _stats(mat, a)
    per_product = median / config.reps if config.reps else float("nan")
    return BenchReport(
        matrix=mat.name, n=n, nnz_stored=nnz_stored, nnz_full=nnz_full,
        nnz_per_row=nnz_stored // n, ws_kb=int(math.floor(ws)),
        format=fmt if fmt == "csr" or not _is_sym(a) else "csrc_sym",
        strategy=config.strategy,
        accum=strategy.accum.value if strategy.accum is not None else "",
        p=strategy.p, reps=config.reps, runs=config.runs,
        median_total_seconds=median,
        mflops_effective=2 * nnz_full / per_product / 1e6,
        mflops_true=_true_flops(a) / per_product / 1e6,
        speedup_vs_seq_csrc=None if baseline is None else baseline / median,
        init_max=phases[0] / n_calls, compute_max=phases[1] / n_calls,
        accumulate_max=phases[2] / n_calls,
        n_colors=plan.coloring.n_colors if strategy.kind is Kind.COLORFUL else None,
    )


def _is_sym(a) -> bool:
    sq = a.square if isinstance(a, CsrcRectMatrix) else a
    return sq.au is None


@dataclass
class VerifyResult:
    label: str
    max_rel_error: float
    passed: bool
    detail: str = ""


def verify_configs(formats=("csr", "csrc"), strategies=("seq", "buffers", "colorful"),
                   accums=ACCUM_NAMES, threads=(1, 2, 4),
                   modes=("neighborhood", "exact")) -> List[BenchConfig]:
    out = []
    for fmt in formats:
        if fmt == "csr":
            out.append(BenchConfig(format="csr"))
            continue
        for st in strategies:
            if st == "seq":
                out.append(BenchConfig(format="csrc"))
                continue
            for p in threads:
                if st == "buffers":
                    out += [BenchConfig(format="csrc", strategy=st, accum=ac, p=p) for ac in accums]
                else:
                    out += [BenchConfig(format="csrc", strategy=st, p=p, conflict_mode=m)
                            for m in modes]
    return out


def verify(mat: LoadedMatrix, configs: Iterable[BenchConfig], symmetrize: bool = False,
           coloring_hook: Optional[Callable] = None) -> List[VerifyResult]:
    """Compare each configuration's y against an oracle.

    The oracle is the dense product for n <= 2000 and sequential CSR
    otherwise. Colorful configurations also have their coloring checked for
    write conflicts; ``coloring_hook(a, coloring)`` may replace the coloring
    first (used to inject faults in tests).
    """
    csr = mat.csr
    x = source_vector(csr.n_cols)
    if csr.n_rows <= DENSE_ORACLE_MAX_N:
        ref = csr.to_dense() @ x
    else:
        ref = spmv_csr(csr, x)
    results = []
    for cfg in configs:
        s = cfg.to_strategy()
        label = f"{cfg.format}/{s.label}"
        if cfg.format == "csr":
            y = spmv_csr(csr, x)
            err = rel_error(y, ref)
            results.append(VerifyResult(label, err, err <= PARALLEL_RTOL))
            continue
        a = mat.csrc(symmetrize)
        detail = ""
        ok = True
        coloring = None
        if s.kind is Kind.COLORFUL:
            coloring = color_matrix(a, s.conflict_mode)
            if coloring_hook is not None:
                coloring = coloring_hook(a, coloring)
            check = validate_coloring(a, coloring)
            if not check.valid:
                ok, detail = False, check.describe()
        plan = make_plan(a, s, coloring=coloring) if s.p > 1 else None
        try:
            y, _ = spmv_parallel(a, x, s, plan)
        finally:
            if plan is not None:
                plan.close()
        err = rel_error(y, ref)
        if err > PARALLEL_RTOL:
            ok = False
            detail = detail or f"relative error {err:.3e} exceeds {PARALLEL_RTOL:g}"
        results.append(VerifyResult(label, err, ok, detail))
    return results


def merge_conflicting_rows(a, coloring: Coloring) -> Coloring:
    """Fault injection: move one row into the class of a row it conflicts with."""
    sq = a.square if isinstance(a, CsrcRectMatrix) else a
    if sq.k_off == 0:
        raise ValueError("matrix has no conflicts to inject")
    j = int(sq.ja[0])
    i = int(sq.lower_rows()[0])
    color = coloring.color.copy()
    color[i] = color[j]
    return Coloring.from_colors(color)


@dataclass
class InfoRow:
    name: str
    n: int
    nnz: int
    nnz_per_row: int
    ws_kb: int
    value_symmetric: bool
    symmetrized: bool = False
    rectangular: bool = False

    def line(self) -> str:
        return f"{self.n} {self.nnz} {self.nnz_per_row} {self.ws_kb}"


def info(mat: LoadedMatrix) -> InfoRow:
    """Matrix statistics with the stored-entry convention: full count, or
    lower + diagonal when the values are symmetric."""
    a = mat.csrc(symmetrize=True)
    n, nnz_stored, _, ws = _stats(mat, a)
    return InfoRow(mat.name, n, nnz_stored, nnz_stored // n, int(math.floor(ws)),
                   _is_sym(a), mat.symmetrized, mat.rectangular)


def table_row(n: int, nnz: int, value_symmetric: bool):
    """(n, nnz, nnz // n, floored ws KB) for a matrix described by its counts."""
    return n, nnz, nnz // n, int(math.floor(working_set_kb(n, nnz, value_symmetric)))
