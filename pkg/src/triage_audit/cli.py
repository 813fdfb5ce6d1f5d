"""Command-line entry point: ``triage-audit {audit,ctoc,sizing,simulate}``.

Exit codes: 0 success, 2 invalid input or flags, 3 audit produced no
usable split.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

from . import sizing
from ._validation import InputError

EXIT_OK, EXIT_INPUT, EXIT_AUDIT = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_INPUT)


METHOD_NAMES = ("pooled-raw", "pooled-corrected", "classwise-raw", "classwise-corrected")
SCENARIO_NAMES = ("separable-low-prevalence", "overlapping-low-prevalence", "iid-coverage-check")


def _alpha_grid(text: str) -> tuple[float, float, float]:
    try:
        lo, hi, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError("expected lo:hi:step, e.g. 0.01:0.30:0.01") from None
    return lo, hi, step


def _methods(text: str) -> tuple[str, ...]:
    names = tuple(v.strip() for v in text.split(",") if v.strip())
    bad = [v for v in names if v not in METHOD_NAMES]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"methods must be drawn from: {', '.join(METHOD_NAMES)}")
    return names


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _add_audit_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scores", required=True, type=Path, help="CSV with subject_id,y,score")
    p.add_argument("--alpha", type=float, default=0.10)
    p.add_argument("--n-c1", type=int, default=31, help="correction pilot size")
    p.add_argument("--n-c2", type=int, default=31, help="conformal calibration size")
    p.add_argument("--splits", type=int, default=200)
    p.add_argument("--seed", type=_u64, default=0)
    p.add_argument("--stratified", action="store_true")
    p.add_argument("--methods", type=_methods, default=METHOD_NAMES,
                   help="comma list of " + ", ".join(METHOD_NAMES))
    p.add_argument("--alpha-grid", type=_alpha_grid, default=(0.01, 0.30, 0.01),
                   help="CTOC grid as lo:hi:step (default 0.01:0.30:0.01)")
    p.add_argument("--jobs", type=int, default=1, help="parallel split workers")
    p.add_argument("--out", required=True, type=Path, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="triage-audit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("audit", help="run the C1/C2/T audit and write a report bundle")
    _add_audit_flags(p)
    p = sub.add_parser("ctoc", help="run the audit and write only ctoc.csv")
    _add_audit_flags(p)

    p = sub.add_parser("sizing", help="minimum calibration sizes for a fail-safe risk budget")
    p.add_argument("--alpha", type=float, default=0.10)
    p.add_argument("--pi", type=float, help="event prevalence for the binomial model")
    p.add_argument("--pop-n", type=int, help="cohort size for the hypergeometric model")
    p.add_argument("--pop-k", type=int, help="cohort event count for the hypergeometric model")
    p.add_argument("--delta", type=_float_list, default=[0.5, 0.25, 0.1, 0.05, 0.01])
    p.add_argument("--format", choices=("text", "csv"), default="text")

    p = sub.add_parser("simulate", help="write a synthetic score file")
    p.add_argument("--scenario", required=True, help=", ".join(SCENARIO_NAMES))
    p.add_argument("--n", type=int)
    p.add_argument("--pi", type=float)
    p.add_argument("--seed", type=_u64)
    p.add_argument("--out", required=True, type=Path)
    return parser


def _fail(code: int, message: str) -> int:
    print(f"triage-audit: {message}", file=sys.stderr)
    return code


def cmd_audit(args, *, ctoc_only: bool = False) -> int:
    from .engine import AuditConfig, AuditError, alpha_range, run_audit
    from .fileio import read_scores, write_bundle

    try:
        cohort, digest = read_scores(args.scores)
        config = AuditConfig(alpha=args.alpha, n_c1=args.n_c1, n_c2=args.n_c2,
                             n_splits=args.splits, seed=args.seed, stratified=args.stratified,
                             methods=args.methods, alpha_grid=alpha_range(*args.alpha_grid))
        config.check_cohort(cohort.n)
    except FileNotFoundError:
        return _fail(EXIT_INPUT, f"score file not found: {args.scores}")
    except ValueError as exc:
        return _fail(EXIT_INPUT, str(exc))
    try:
        report = run_audit(cohort, config, n_jobs=args.jobs, input_sha256=digest)
    except AuditError as exc:
        return _fail(EXIT_AUDIT, str(exc))
    except ValueError as exc:
        return _fail(EXIT_INPUT, str(exc))
    write_bundle(report, args.out, ctoc_only=ctoc_only)
    return EXIT_OK


def sizing_table(alpha, deltas, pi=None, pop=None) -> list[dict]:
    rows = []
    for d in deltas:
        row = {"delta": d}
        if pi is not None:
            row["binomial"] = sizing.min_ncal(d, sizing.Binomial(pi), alpha)
        if pop is not None:
            row["hypergeometric"] = sizing.min_ncal(d, sizing.Hypergeometric(*pop), alpha)
        rows.append(row)
    return rows


def _render_sizing(rows, alpha: float, fmt: str) -> str:
    models = [k for k in ("binomial", "hypergeometric") if k in rows[0]]
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["delta"] + [f"{m}_n_cal" for m in models] + [f"{m}_p_fsrl" for m in models])
        for r in rows:
            w.writerow([f"{r['delta']:g}"] + [r[m].n_cal for m in models]
                       + [f"{r[m].p_fsrl:.6g}" for m in models])
        return buf.getvalue()
    n_star = sizing.fsrl_threshold(alpha)
    lines = [f"alpha={alpha:g}: event-class fail-safe when n_1 <= {n_star}"]
    header = f"{'max P(FSRL)':>12}" + "".join(f"  {m:>16}" for m in models)
    lines += [header, "-" * len(header)]
    for r in rows:
        cells = []
        for m in models:
            mark = "" if r[m].confirmed else "*"
            cells.append(f"  {'n_cal >= ' + str(r[m].n_cal) + mark:>16}")
        lines.append(f"{r['delta']:>12g}" + "".join(cells))
    if any(not r[m].confirmed for r in rows for m in models):
        lines.append("* condition fails again within the next 5 sizes")
    return "\n".join(lines) + "\n"


def cmd_sizing(args) -> int:
    if args.pi is None and args.pop_n is None and args.pop_k is None:
        return _fail(EXIT_INPUT, "give --pi and/or --pop-n with --pop-k")
    if (args.pop_n is None) != (args.pop_k is None):
        return _fail(EXIT_INPUT, "--pop-n and --pop-k must be given together")
    if not args.delta:
        return _fail(EXIT_INPUT, "--delta is empty")
    pop = (args.pop_n, args.pop_k) if args.pop_n is not None else None
    try:
        for d in args.delta:
            if not 0.0 < d < 1.0:
                raise ValueError(f"delta must lie in (0, 1), got {d:g}")
        rows = sizing_table(args.alpha, args.delta, args.pi, pop)
    except ValueError as exc:
        return _fail(EXIT_INPUT, str(exc))
    sys.stdout.write(_render_sizing(rows, args.alpha, args.format))
    return EXIT_OK


def cmd_simulate(args) -> int:
    from .fileio import write_scores
    from .synth import generate, scenario

    try:
        spec = scenario(args.scenario)
        changes = {k: v for k, v in (("n", args.n), ("pi", args.pi), ("seed", args.seed))
                   if v is not None}
        spec = spec.with_(**changes)
    except ValueError as exc:
        return _fail(EXIT_INPUT, str(exc))
    cohort = generate(spec)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_scores(cohort, args.out)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "audit":
            return cmd_audit(args)
        if args.command == "ctoc":
            return cmd_audit(args, ctoc_only=True)
        if args.command == "sizing":
            return cmd_sizing(args)
        return cmd_simulate(args)
    except InputError as exc:
        return _fail(EXIT_INPUT, str(exc))


if __name__ == "__main__":
    sys.exit(main())
