"""``bench`` command line: run, verify, info."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import bench
from .core import StructureError
from .mmio import MatrixMarketError

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _add_matrix_args(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--matrix", metavar="PATH", help="Matrix Market coordinate file")
    src.add_argument("--gen", metavar="KIND:PARAMS",
                     help="generator, e.g. band:n=100000,h=8 or dense:n=1000 "
                          "or random_sym:n=500,density=0.05,seed=1")
    p.add_argument("--symmetrize", action="store_true",
                   help="insert explicit zeros to make the pattern symmetric")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bench", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="time repeated products")
    _add_matrix_args(run)
    run.add_argument("--format", choices=["csr", "csrc"], default="csrc")
    run.add_argument("--strategy", choices=list(bench.STRATEGY_NAMES), default="seq")
    run.add_argument("--accum", choices=bench.ACCUM_NAMES, default=None,
                     help="accumulation method for --strategy buffers (default effective)")
    run.add_argument("--threads", type=int, default=1, metavar="P")
    run.add_argument("--reps", type=int, default=1000, help="products per run")
    run.add_argument("--runs", type=int, default=3, help="runs; the median is reported")
    run.add_argument("--conflict-mode", choices=["neighborhood", "exact"], default="neighborhood")
    run.add_argument("--out", nargs=2, action="append", metavar=("{csv,json}", "PATH"),
                     help="write the report; repeatable. Without it CSV goes to stdout")

    ver = sub.add_parser("verify", help="check configurations against an oracle")
    _add_matrix_args(ver)
    ver.add_argument("--format", nargs="+", choices=["csr", "csrc"], default=["csr", "csrc"])
    ver.add_argument("--strategy", nargs="+", choices=list(bench.STRATEGY_NAMES),
                     default=list(bench.STRATEGY_NAMES))
    ver.add_argument("--accum", nargs="+", choices=bench.ACCUM_NAMES, default=list(bench.ACCUM_NAMES))
    ver.add_argument("--threads", nargs="+", type=int, default=[1, 2, 4], metavar="P")
    ver.add_argument("--conflict-mode", nargs="+", choices=["neighborhood", "exact"],
                     default=["neighborhood", "exact"])
    # fault-injection hook for tests: puts two conflicting rows in one class
    ver.add_argument("--corrupt-coloring", action="store_true", help=argparse.SUPPRESS)

    inf = sub.add_parser("info", help="print n, nnz, nnz/n and working-set KB")
    _add_matrix_args(inf)
    return parser


def _cmd_run(args) -> int:
    mat = bench.load_matrix(args.matrix, args.gen)
    cfg = bench.BenchConfig(format=args.format, strategy=args.strategy, accum=args.accum,
                            p=args.threads, reps=args.reps, runs=args.runs,
                            symmetrize=args.symmetrize, conflict_mode=args.conflict_mode)
    report = bench.run_benchmark(mat, cfg)
    outs = args.out or [("csv", "-")]
    for kind, path in outs:
        if kind not in ("csv", "json"):
            raise ValueError(f"--out format must be csv or json, got {kind!r}")
        text = bench.reports_to_csv([report]) if kind == "csv" else bench.reports_to_json([report])
        if path == "-":
            sys.stdout.write(text)
        else:
            Path(path).write_text(text)
    return EXIT_OK


def _cmd_verify(args) -> int:
    mat = bench.load_matrix(args.matrix, args.gen)
    configs = bench.verify_configs(args.format, args.strategy, args.accum,
                                   args.threads, args.conflict_mode)
    hook = bench.merge_conflicting_rows if args.corrupt_coloring else None
    results = bench.verify(mat, configs, symmetrize=args.symmetrize, coloring_hook=hook)
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        line = f"{status} {r.label} max_rel_error={r.max_rel_error:.3e}"
        print(line + (f" ({r.detail})" if r.detail else ""))
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} configurations passed")
    return EXIT_FAIL if failed else EXIT_OK


def _cmd_info(args) -> int:
    mat = bench.load_matrix(args.matrix, args.gen)
    row = bench.info(mat)
    print(row.line())
    notes = [f"name={row.name}", f"sym={'yes' if row.value_symmetric else 'no'}"]
    if row.symmetrized:
        notes.append("symmetrized")
    if row.rectangular:
        notes.append("rectangular")
    print(" ".join(notes))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": _cmd_run, "verify": _cmd_verify, "info": _cmd_info}[args.command]
    try:
        return handler(args)
    except bench.VerificationError as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (MatrixMarketError, StructureError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
