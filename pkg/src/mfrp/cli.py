"""Command-line entry point: ``mfrp {simulate,analyze,sweep,validate,plot}``.

Exit codes: 0 success, 1 validation or sweep failure, 2 configuration error.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from .errors import ConfigError, MfrpError
from . import experiment as ex
from .model import ReturnPanel, simulate
from .wtmm import SUMMARY_KEYS, WtmmSettings, analyze_series

OK, FAILED, BAD_CONFIG = 0, 1, 2


def _floats(text):
    try:
        return tuple(float(v) for v in ex._split(text))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected a list of numbers, got {text!r}") from exc


def _ints(text):
    try:
        return tuple(int(v) for v in ex._split(text))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected a list of integers, got {text!r}") from exc


def _seed(text):
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _fit_range(text):
    try:
        return ex.parse_fit_range(text)
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _common(p):
    p.add_argument("--config", type=Path, help="key=value config file")
    p.add_argument("--out", help="output directory (default: $MFRP_OUT or ./mfrp_out)")
    p.add_argument("--seed", type=_seed, help="base seed (unsigned 64-bit)")
    p.add_argument("--jobs", type=int, help="worker processes (0 = CPU count)")
    p.add_argument("--alpha", type=_floats, help="comma-separated alpha values")
    p.add_argument("--r", type=_ints, help="comma-separated pseudo-vector counts R")
    p.add_argument("--realizations", type=int, help="realizations per (alpha, R)")
    p.add_argument("--fit-range", type=_fit_range, help="WTMM fit range LO:HI in samples, or 'auto'")
    p.add_argument("-v", "--verbose", action="store_true")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(BAD_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="mfrp", description="Random Parameters model simulation and multifractal analysis.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    p = sub.add_parser("simulate", help="simulate one return panel and write it as CSV")
    _common(p)
    p = sub.add_parser("analyze", help="WTMM spectrum of each column of a CSV file")
    _common(p)
    p.add_argument("input", type=Path, help="CSV of returns (t, asset_0, ...), or of one series per column")
    p.add_argument("--prices", action="store_true", help="columns already hold prices (skip the cumulative sum)")
    p = sub.add_parser("sweep", help="full (alpha, R) sweep with tables, plots and manifest")
    _common(p)
    p = sub.add_parser("validate", help="run the synthetic-oracle checks")
    _common(p)
    p.add_argument("--order", type=int, default=4, help="DOG wavelet order")
    p.add_argument("--seeds", type=int, default=10, help="oracle realizations per check")
    p = sub.add_parser("plot", help="regenerate SVG plots from a sweep's CSV tables")
    _common(p)
    p.add_argument("input", type=Path, nargs="?", help="sweep directory (default: --out)")
    return parser


def _config(args):
    out = args.out or os.environ.get("MFRP_OUT")
    return ex.load_config(
        args.config,
        out_dir=out,
        base_seed=args.seed,
        jobs=args.jobs,
        alpha_grid=args.alpha,
        r_values=args.r,
        n_realizations=args.realizations,
        fit_range=args.fit_range,
    )


def cmd_simulate(args):
    cfg = _config(args)
    model = cfg.model_config(cfg.alpha_grid[0], cfg.r_values[0], cfg.base_seed)
    panel = simulate(model)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = panel.to_csv(out / f"returns_{ex.cell_tag(model.n_random, model.alpha)}.csv")
    print(path)
    return OK


def cmd_analyze(args):
    cfg = _config(args)
    if not args.input.exists():
        raise ConfigError(f"{args.input} not found")
    panel = ReturnPanel.from_csv(args.input)
    series = panel.returns if args.prices else panel.prices
    settings = cfg.wtmm_settings()
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    print("column," + ",".join(SUMMARY_KEYS) + ",fit_lo,fit_hi")
    for a in range(series.shape[1]):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            spec = analyze_series(series[:, a], settings)
        ex.write_csv(
            out / f"spectrum_{args.input.stem}_{a}.csv",
            ["q", "h", "h_stderr", "D", "D_stderr"],
            zip(spec.q, spec.h, spec.h_stderr, spec.d, spec.d_stderr),
        )
        s = spec.summary()
        print(f"{a}," + ",".join(f"{s[k]:.4f}" for k in SUMMARY_KEYS) + f",{spec.fit_range[0]:g},{spec.fit_range[1]:g}")
    return OK


def cmd_sweep(args):
    cfg = _config(args)
    result = ex.run_sweep(cfg)
    print(f"{len(result.cells)} cells, {len(result.failed)} failed, {result.wall_time:.1f} s -> {result.out_dir}")
    return OK if result.exit_code == 0 else FAILED


def cmd_validate(args):
    cfg = _config(args)
    report = ex.run_validation(n_seeds=args.seeds, order=args.order, calibration=cfg.calibration)
    print(report.format())
    return OK if report.passed else FAILED


def cmd_plot(args):
    cfg = _config(args)
    src = args.input or Path(cfg.out_dir)
    for path in ex.plot_artifacts(src):
        print(path)
    return OK


COMMANDS = {
    "simulate": cmd_simulate,
    "analyze": cmd_analyze,
    "sweep": cmd_sweep,
    "validate": cmd_validate,
    "plot": cmd_plot,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return BAD_CONFIG
    except (MfrpError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return FAILED


if __name__ == "__main__":
    sys.exit(main())
