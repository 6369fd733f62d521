"""Command-line entry point: ``sfwzoo run | plot | verify``.

Exit codes: 0 success, 2 validation error, 1 runtime error.
"""
from __future__ import annotations

import argparse
import os
import sys

from .core import ValidationError

EXIT_OK, EXIT_RUNTIME, EXIT_VALIDATION = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        sys.exit(EXIT_VALIDATION)


def _cmd_run(args) -> int:
    from .config import emit_csv, load_config
    from .driver import run

    overrides = {"seed": args.seed} if args.seed is not None else {}
    cfg = load_config(args.config, overrides=overrides)
    out_path = cfg.output
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        out_path = os.path.join(args.out, os.path.basename(cfg.output))
    trace = run(cfg)
    emit_csv(trace, out_path)
    last = trace.last
    print(
        f"{cfg.method}: K={cfg.K} f={last.f_value:.10g} gap={last.fw_gap:.4g} "
        f"grad_calls={last.grad_calls} coord_calls={last.coord_calls} bits_sent={last.bits_sent} -> {out_path}"
    )
    return EXIT_OK


def _cmd_plot(args) -> int:
    from .config import read_csv
    from .plot import emit_plot

    series = []
    for path in args.csv:
        if not os.path.exists(path):
            raise ValidationError(f"no such file: {path}")
        cols = read_csv(path)
        label = os.path.splitext(os.path.basename(path))[0]
        series.append((label, cols[args.x], cols[args.y]))
    emit_plot(series, args.x, args.out, y_label=args.y)
    print(f"wrote {args.out} ({len(series)} trace(s))")
    return EXIT_OK


def _cmd_verify(args) -> int:
    from .verification import run_all

    only = set(args.only) if args.only else None
    results = run_all(only)
    for r in results:
        print(r.line(), flush=True)
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return EXIT_OK if not failed else EXIT_RUNTIME


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sfwzoo", description="Stochastic Frank-Wolfe experiments")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run one experiment config and write a trace CSV")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (file name taken from the config's output key)")
    r.add_argument("--seed", type=int)
    r.set_defaults(func=_cmd_run)

    pl = sub.add_parser("plot", help="plot trace CSVs to an SVG file")
    pl.add_argument("csv", nargs="+")
    pl.add_argument("--x", required=True, choices=("iter", "grad_calls", "bits_sent"))
    pl.add_argument("--y", default="f_value", choices=("f_value", "fw_gap"))
    pl.add_argument("--out", required=True)
    pl.set_defaults(func=_cmd_plot)

    v = sub.add_parser("verify", help="run the acceptance checks")
    v.add_argument("--only", type=int, nargs="*", help="criterion numbers to run")
    v.set_defaults(func=_cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # noqa: BLE001 - top-level reporting
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
