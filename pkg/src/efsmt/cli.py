"""Command-line front end.

``efsmt solve FILE`` solves a problem file, ``efsmt fmt FILE`` prints its
canonical form and ``efsmt bench`` runs the benchmark suite.  Exit codes:
0 valid, 1 invalid, 2 unknown, 64 usage error, 65 bad input, 66 missing file.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from fractions import Fraction
from typing import List, Optional, Sequence

from .engine import ConfigError, EngineConfig, Strategy, Valid, solve
from .fileformat import Document, ParseError, parse, print_document
from .ir import IRError
from .report import BenchCase, RunReport, make_report, run_suite, write_plot, write_tsv

EX_USAGE = 64
EX_DATAERR = 65
EX_NOINPUT = 66

# presets whose grid step follows --step
_STEP_PRESETS = {"temperature", "lyapunov-bv", "lyapunov-bv-literal"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _on_off(text: str) -> bool:
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected on or off")
    return text == "on"


def _rational(text: str) -> Fraction:
    try:
        q = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational: {text!r}")
    if q <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return q


def _backend(text: str) -> Optional[str]:
    if text == "internal":
        return None
    if text.startswith("external:") and len(text) > len("external:"):
        return text[len("external:"):]
    raise argparse.ArgumentTypeError("expected internal or external:CMD")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="efsmt", description="Exists-forall constraint solver.")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("solve", help="solve a problem file")
    s.add_argument("file")
    s.add_argument("--strategy", choices=[x.value for x in Strategy], default=None)
    s.add_argument("--step", type=_rational, default=None, help="grid step for discretized variables")
    s.add_argument("--max-iters", type=int, default=1000)
    s.add_argument("--extrapolate", type=_on_off, default=True, metavar="on|off")
    s.add_argument("--depth", type=int, default=10, help="Bernstein subdivision depth")
    s.add_argument("--backend", type=_backend, default=None, metavar="internal|external:CMD")
    s.add_argument("--trace", action="store_true", help="list counterexamples")
    s.add_argument("--verify", type=_on_off, default=True, metavar="on|off")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--sexp", action="store_true", help="print one s-expression")
    s.add_argument("--no-time", action="store_true", help="omit the wall-time field")

    f = sub.add_parser("fmt", help="print the canonical form of a problem file")
    f.add_argument("file")

    b = sub.add_parser("bench", help="run the benchmark suite")
    b.add_argument("--suite", choices=["paper", "quick"], default="paper")
    b.add_argument("--out", default="bench", help="output directory")
    return ap


def _read(path: str) -> Document:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read())


def _config(args, strategy: str) -> EngineConfig:
    kw = dict(
        max_iterations=args.max_iters,
        strategy=strategy,
        extrapolation_enabled=args.extrapolate,
        bernstein_max_depth=args.depth,
        verify_witness=args.verify,
        seed=args.seed,
        external_command=args.backend,
    )
    if args.step is not None:
        kw["fixed_step"] = args.step
    return EngineConfig(**kw)


def run_solve(args) -> RunReport:
    from .encoders import build_preset

    doc = _read(args.file)
    oracle = decode = None
    if doc.is_preset:
        name, opts = doc.preset
        opts = dict(opts)
        if args.step is not None and name in _STEP_PRESETS:
            opts.setdefault("step", args.step)
        inst = build_preset(name, **opts)
        problem, strategy = inst.problem, args.strategy or inst.strategy
        oracle, decode = inst.oracle, inst.decode
    else:
        problem, strategy = doc.problem(), args.strategy or "auto"
    cfg = _config(args, strategy)
    t0 = time.perf_counter()
    verdict = solve(problem, cfg)
    rep = make_report(problem, verdict, time.perf_counter() - t0, args.trace)
    if isinstance(verdict, Valid):
        if decode is not None:
            rep.decoded = {k: str(v) for k, v in decode(verdict.witness).items()}
        if oracle is not None and args.verify:
            ok, detail = oracle(verdict.witness)
            rep.checks.append(("oracle", ok, detail))
    return rep


# small problems of the benchmark suite, mirrored in problems/
BENCH_PROBLEMS = {
    "running": """\
(declare-exists x Real -30 30)
(declare-forall y Real -30 30)
(assume (< 0 y))
(assume (< y 10))
(guarantee (< (- y (* 2 x)) 7))
""",
    "extrapolate": """\
(declare-exists x Real 0 10)
(declare-forall y Real 0 10)
(guarantee (>= y x))
""",
    "incomplete": """\
(declare-exists x Real 0 1)
(declare-forall y Real 0 1)
(constrain (> x 0))
(assume (> y 0))
(assume (!= y x))
(guarantee (> y x))
""",
    "incomplete-fixed": """\
(declare-exists x Fixed 0 1 1/32)
(declare-forall y Real 0 1)
(constrain (> x 0))
(assume (> y 0))
(assume (!= y x))
(guarantee (> y x))
""",
    "linear-sy": """\
(declare-exists s Real -10 10)
(declare-exists t Real -10 10)
(declare-forall y Real 0 1)
(declare-forall z Real 0 1)
(guarantee (> (+ (* s y) (* 2 t) (* t z)) 0))
""",
    "mixed-bool": """\
(declare-exists k Int -5 5)
(declare-exists up Bool)
(declare-forall d Fixed 0 2 1/2)
(guarantee (=> up (>= (+ k d) 3)))
(guarantee (=> (not up) (<= (- k d) -3)))
""",
}


def paper_suite(quick: bool = False) -> List[BenchCase]:
    """The acceptance problems as benchmark cases."""
    from .encoders import build_preset

    def load(name):
        return lambda: parse(BENCH_PROBLEMS[name]).problem()

    cases = [
        BenchCase("running", load("running"), EngineConfig(strategy="la-la"), "valid"),
        BenchCase("extrapolate-on", load("extrapolate"), EngineConfig(max_iterations=20), "valid"),
        BenchCase(
            "extrapolate-off",
            load("extrapolate"),
            EngineConfig(max_iterations=20, extrapolation_enabled=False),
            "unknown",
        ),
        BenchCase("incomplete-real", load("incomplete"), EngineConfig(max_iterations=50), "unknown"),
        BenchCase("incomplete-fixed", load("incomplete-fixed"), EngineConfig(max_iterations=50), "invalid"),
        BenchCase("linear-sy", load("linear-sy"), EngineConfig(), None),
        BenchCase("mixed-bool", load("mixed-bool"), EngineConfig(), None),
    ]
    presets = [("cruise-control", "valid"), ("lyapunov-bernstein", "valid"), ("lyapunov-bv", "valid")]
    if not quick:
        presets += [("priority-demo", "valid"), ("priority-channel", "valid"), ("temperature", "valid")]
    for name, expect in presets:
        inst = build_preset(name)
        cases.append(
            BenchCase(name, (lambda p=inst.problem: p), EngineConfig(strategy=inst.strategy), expect, inst.oracle)
        )
    return cases


def run_bench(args, out=sys.stdout) -> int:
    os.makedirs(args.out, exist_ok=True)
    cases = paper_suite(args.suite == "quick")
    rows = run_suite(cases, log=lambda line: print(line, file=out, flush=True))
    tsv = os.path.join(args.out, "bench.tsv")
    png = os.path.join(args.out, "bench.png")
    write_tsv(rows, tsv)
    write_plot(rows, png)
    print(f"wrote {tsv} and {png}", file=out)
    bad = [r.name for r in rows if (r.expected != "-" and r.verdict != r.expected) or r.oracle == "fail"]
    if bad:
        print("unexpected: " + ", ".join(bad), file=out)
        return 1
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(f"efsmt: {e}", file=sys.stderr)
        return EX_USAGE
    if args.command is None:
        build_parser().print_help(sys.stderr)
        return EX_USAGE
    try:
        if args.command == "fmt":
            sys.stdout.write(print_document(_read(args.file)))
            return 0
        if args.command == "bench":
            return run_bench(args)
        rep = run_solve(args)
    except FileNotFoundError as e:
        print(f"efsmt: {e.filename}: no such file", file=sys.stderr)
        return EX_NOINPUT
    except ParseError as e:
        print(f"efsmt: {args.file}:{e.line}:{e.col}: {e.msg}", file=sys.stderr)
        return EX_DATAERR
    except (IRError, ConfigError) as e:
        print(f"efsmt: {e}", file=sys.stderr)
        return EX_DATAERR
    show_time = not args.no_time
    sys.stdout.write(rep.to_sexp(show_time) if args.sexp else rep.to_text(show_time))
    return rep.exit_code


if __name__ == "__main__":
    sys.exit(main())
