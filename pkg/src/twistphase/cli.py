"""
Command-line entry point.

    twistphase point --config run.cfg
    twistphase sweep --config run.cfg --workers 4 --out sweep.csv
    twistphase trend --config run.cfg --format jsonl
    twistphase check --config run.cfg
    twistphase gap   --config run.cfg

Exit codes: 0 success, 1 usage or config error, 2 evaluation error,
3 oracle check failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .bands import ModeCouplings, build_grid
from .errors import ConfigError, TwistError
from .models import SSH, FreeFermion, free_fermion_gap
from .oracle import compare_variants, exp_factor_oracle
from .sweep import (
    ResultTable,
    detect_transitions,
    emit,
    evaluate_row,
    finite_size_trend,
    parse_config,
    run_sweep,
)
from .twist import factor_values

EXIT_OK, EXIT_USAGE, EXIT_EVAL, EXIT_ORACLE = 0, 1, 2, 3

ORACLE_SAMPLES = 1000
ORACLE_TOL = 1e-12
DETERMINANT_TOL = 1e-8


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="twistphase", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_text in (
        ("point", "evaluate z and gamma_g at one parameter point"),
        ("sweep", "scan one model parameter"),
        ("trend", "evaluate a list of system sizes"),
        ("check", "run the oracle cross-checks"),
        ("gap", "minimum band gap on the grid"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="config file, '-' for stdin")
        p.add_argument("--out", help="output file (default stdout)")
        p.add_argument("--format", choices=("csv", "jsonl"), help="output format")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--threshold", type=float, help="|z| below which gamma_g is ill-defined")
        p.add_argument("--twist-axis", type=int, help="twist axis, 1..D")
        p.add_argument("--strict", action="store_true", help="singular modes are errors")
        if name == "check":
            p.add_argument("--seed", type=int, default=0)
        if name == "sweep":
            p.add_argument("--transitions", action="store_true", help="report detected transitions on stderr")
    return parser


def _load_spec(args):
    if args.config == "-":
        text, base = sys.stdin.read(), Path.cwd()
    else:
        path = Path(args.config)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        base = path.parent
    spec = parse_config(text, base_dir=base)
    updates = {}
    if args.threshold is not None:
        if args.threshold < 0:
            raise ConfigError("--threshold must be non-negative")
        updates["threshold"] = args.threshold
    if args.twist_axis is not None:
        if not 1 <= args.twist_axis <= len(spec.dims):
            raise ConfigError(f"--twist-axis must be in 1..{len(spec.dims)}")
        updates["twist_axis"] = args.twist_axis - 1
    if args.format is not None:
        updates["fmt"] = args.format
    return replace(spec, **updates) if updates else spec


def _write(args, data: bytes):
    if args.out:
        Path(args.out).write_bytes(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()


def _cmd_point(spec, args):
    model = spec.model
    value = float("nan")
    if spec.param is not None:
        value = float(spec.start)
    row = evaluate_row(
        model, spec.dims, value, spec.twist_axis, spec.threshold, spec.n_convention,
        "strict" if args.strict else "exclude",
    )
    _write(args, emit(ResultTable([row]), spec.fmt))
    return EXIT_OK


def _cmd_sweep(spec, args):
    if spec.param is None:
        raise ConfigError("sweep needs one parameter given as sweep(start,stop,count)")
    table = run_sweep(spec, workers=args.workers, strict=args.strict)
    _write(args, emit(table, spec.fmt))
    if args.transitions:
        for t in detect_transitions(table):
            print(f"{t.kind} at {spec.param}={t.value:.6g} (between {t.lo:.6g} and {t.hi:.6g})", file=sys.stderr)
    return EXIT_OK


def _cmd_trend(spec, args):
    if spec.sizes is None:
        raise ConfigError("trend needs 'sizes=L1,L2,L3,...'")
    table = finite_size_trend(spec, workers=args.workers, strict=args.strict)
    _write(args, emit(table, spec.fmt))
    return EXIT_OK


def _cmd_gap(spec, args):
    values = spec.values if spec.param is not None else [None]
    grid = build_grid(spec.dims)
    lines = [f"{spec.param or 'param'},min_gap,k"]
    for value in values:
        model = spec.model if value is None else spec.model.with_param(spec.param, float(value))
        if isinstance(model, FreeFermion):
            gap, k = free_fermion_gap(grid, model)
        else:
            bloch = model.bloch(grid)
            mags = np.sqrt(np.sum(bloch[:, 1:] ** 2, axis=1))
            row = int(np.argmin(mags))
            gap, k = float(mags[row]), grid.k(row)
        label = "nan" if value is None else format(float(value), ".17g")
        lines.append(f"{label},{gap:.17g},{' '.join(format(x, '.17g') for x in k)}")
    _write(args, ("\n".join(lines) + "\n").encode())
    return EXIT_OK


def _cmd_check(spec, args):
    out = []
    ok = True

    rng = np.random.default_rng(args.seed)
    worst = 0.0
    for _ in range(ORACLE_SAMPLES):
        c = _random_couplings(rng)
        n_total = int(rng.integers(2, 10**6 + 1))
        worst = max(worst, abs(complex(factor_values(c.kprime, c.kbig, n_total)) - exp_factor_oracle(c, n_total)))
    passed = worst <= ORACLE_TOL
    ok &= passed
    out.append(f"[{'PASS' if passed else 'FAIL'}] closed form vs expm, {ORACLE_SAMPLES} samples: max |diff| = {worst:.3e}")

    grid = build_grid(spec.dims)
    with_det = isinstance(spec.model, SSH) and grid.total_modes % 2 == 0 and grid.total_modes <= 512
    report = compare_variants(
        spec.model, grid, spec.twist_axis, spec.n_convention, with_determinant=with_det
    )
    passed = "canonical-oracle" not in report.flagged and "canonical-model" not in report.flagged
    ok &= passed
    out.append(f"[{'PASS' if passed else 'FAIL'}] per-mode forms on the configured grid")
    out.append(report.summary())
    if report.determinant is not None:
        passed = report.determinant["abs_diff"] <= DETERMINANT_TOL
        ok &= passed
        out.append(
            f"[{'PASS' if passed else 'FAIL'}] |z| closed form vs Slater determinant: "
            f"diff = {report.determinant['abs_diff']:.3e} (tol {DETERMINANT_TOL:g})"
        )
    _write(args, ("\n".join(out) + "\n").encode())
    return EXIT_OK if ok else EXIT_ORACLE


def _random_couplings(rng, bound: float = 10.0) -> ModeCouplings:
    """Uniform in the disc |K| <= bound, imaginary K' in [-bound, bound]."""
    radius = bound * math.sqrt(rng.uniform())
    angle = rng.uniform(-math.pi, math.pi)
    return ModeCouplings(
        kprime=complex(0.0, rng.uniform(-bound, bound)),
        kbig=complex(radius * math.cos(angle), radius * math.sin(angle)),
    )


_COMMANDS = {
    "point": _cmd_point,
    "sweep": _cmd_sweep,
    "trend": _cmd_trend,
    "check": _cmd_check,
    "gap": _cmd_gap,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.workers < 1:
        print("twistphase: error: --workers must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        spec = _load_spec(args)
        return _COMMANDS[args.command](spec, args)
    except (ConfigError, ValueError) as exc:
        print(f"twistphase: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TwistError as exc:
        print(f"twistphase: evaluation error: {exc}", file=sys.stderr)
        return EXIT_EVAL


if __name__ == "__main__":
    sys.exit(main())
