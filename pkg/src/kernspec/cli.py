"""Command line entry point: ``kernspec validate|run|bound|eig``.

Exit codes: 0 success, 1 configuration error, 2 runtime or numerical error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .harness.bound import InsufficientDataError, bound_report, write_report
from .harness.config import OUTPUT_ENV, REFERENCE_STRATEGIES, ConfigError, load_config, validate
from .harness.experiments import CellError
from .harness.runner import run
from .linalg import ConvergenceError, NotSymmetricError, sym_eig

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--full-scale", action="store_true", default=None,
                        help="use the full-size experiment defaults")
    common.add_argument("--threads", type=int, default=None, help="worker threads for sweep cells")
    common.add_argument("--output-dir", default=None,
                        help=f"output directory (default: config, then ${OUTPUT_ENV}, then results/<experiment>)")

    p = argparse.ArgumentParser(prog="kernspec", description="Spectral kernel ridge regression experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    v = sub.add_parser("validate", parents=[common], help="check a config and list resolved settings")
    v.add_argument("config")
    r = sub.add_parser("run", parents=[common], help="run an experiment")
    r.add_argument("config")
    b = sub.add_parser("bound", parents=[common], help="per-test-row perturbation bound report")
    b.add_argument("config")
    b.add_argument("--reference", choices=REFERENCE_STRATEGIES, default=None)
    b.add_argument("--ridge", type=float, default=None, help="ridge z (default: first ridge_grid entry)")
    e = sub.add_parser("eig", help="print the eigenvalues of a symmetric matrix stored as CSV")
    e.add_argument("matrix")
    e.add_argument("--vectors", action="store_true", help="also print eigenvectors, one per line")
    return p


def _overrides(args):
    return {"full_scale": args.full_scale, "output_dir": args.output_dir, "threads": args.threads}


def _cmd_eig(args):
    try:
        A = np.loadtxt(args.matrix, delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        print(f"error: cannot read {args.matrix}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if A.shape[0] != A.shape[1]:
        print(f"error: matrix must be square, got {A.shape[0]}x{A.shape[1]}", file=sys.stderr)
        return EXIT_CONFIG
    eig = sym_eig(A)
    for d in eig.values:
        print(repr(float(d)))
    if args.vectors:
        for u in eig.vectors.T:
            print(",".join(repr(float(x)) for x in u))
    return EXIT_OK


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        if args.command == "eig":
            return _cmd_eig(args)
        if args.command == "validate":
            ok, lines = validate(args.config, **_overrides(args))
            print("\n".join(lines), file=sys.stdout if ok else sys.stderr)
            return EXIT_OK if ok else EXIT_CONFIG
        cfg = load_config(args.config, **_overrides(args))
        if args.command == "run":
            summary = run(cfg)
            print(f"wrote {cfg.output_dir}/results.csv ({sum(c['runs'] for c in summary['cells'])} rows)")
            return EXIT_OK
        report = bound_report(cfg, reference=args.reference, ridge=args.ridge)
        path = write_report(report, cfg.output_dir)
        print(json.dumps({k: v for k, v in report.items() if k != "rows"}))
        print(f"wrote {path}")
        return EXIT_OK
    except ConfigError as exc:
        for e in exc.errors:
            print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (CellError, InsufficientDataError, ConvergenceError, NotSymmetricError,
            ArithmeticError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
