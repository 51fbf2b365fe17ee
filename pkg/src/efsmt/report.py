"""Run reports and the benchmark harness.

A :class:`RunReport` renders as human-readable text or as one
s-expression; both carry the same fields.  :func:`run_suite` solves a list
of named problems and :func:`write_tsv` / :func:`write_plot` store the
results.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

from .engine import EngineConfig, Unknown, Valid, Verdict, solve
from .fileformat import format_number
from .ir import EFProblem, Value

EXIT_CODES = {"valid": 0, "invalid": 1, "unknown": 2}


def render_value(v) -> Tuple[str, str]:
    """Exact text and a decimal rendering."""
    if isinstance(v, bool):
        return ("true" if v else "false"), ("true" if v else "false")
    if isinstance(v, Fraction):
        return format_number(v), f"{float(v):.6g}"
    return str(v), str(v)


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


@dataclass
class RunReport:
    verdict: str
    strategy: str
    iterations: int
    wall_time: float
    witness: List[Tuple[str, str, str]] = field(default_factory=list)  # (name, exact, decimal)
    counterexamples: Optional[List[List[Tuple[str, str]]]] = None
    reason: str = ""
    decoded: Dict[str, str] = field(default_factory=dict)
    checks: List[Tuple[str, bool, str]] = field(default_factory=list)  # (name, ok, detail)

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.verdict]

    def to_text(self, show_time: bool = True) -> str:
        lines = [f"verdict: {self.verdict}", f"strategy: {self.strategy}", f"iterations: {self.iterations}"]
        if self.reason:
            lines.append(f"reason: {self.reason}")
        if self.witness:
            lines.append("witness:")
            lines += [f"  {n} = {exact}" + (f"  (~{dec})" if dec != exact else "") for n, exact, dec in self.witness]
        if self.decoded:
            lines.append("decoded:")
            lines += [f"  {k}: {v}" for k, v in self.decoded.items()]
        for name, ok, detail in self.checks:
            lines.append(f"check {name}: {'pass' if ok else 'FAIL'} {detail}".rstrip())
        if self.counterexamples is not None:
            lines.append(f"counterexamples: {len(self.counterexamples)}")
            for i, cex in enumerate(self.counterexamples):
                lines.append(f"  {i}: " + ", ".join(f"{n}={x}" for n, x in cex))
        if show_time:
            lines.append(f"time: {self.wall_time:.3f}s")
        return "\n".join(lines) + "\n"

    def to_sexp(self, show_time: bool = True) -> str:
        parts = [f"(verdict {self.verdict})", f"(strategy {self.strategy})", f"(iterations {self.iterations})"]
        if self.reason:
            parts.append(f"(reason {_quote(self.reason)})")
        if self.witness:
            parts.append(
                "(witness " + " ".join(f"({n} {exact} {_quote(dec)})" for n, exact, dec in self.witness) + ")"
            )
        if self.decoded:
            parts.append("(decoded " + " ".join(f"({k} {_quote(v)})" for k, v in self.decoded.items()) + ")")
        for name, ok, detail in self.checks:
            parts.append(f"(check {name} {'pass' if ok else 'fail'} {_quote(detail)})")
        if self.counterexamples is not None:
            parts.append(
                "(counterexamples "
                + " ".join("(" + " ".join(f"({n} {x})" for n, x in cex) + ")" for cex in self.counterexamples)
                + ")"
            )
        if show_time:
            parts.append(f"(time {self.wall_time:.3f})")
        return "(report " + " ".join(parts) + ")\n"


def make_report(p: EFProblem, verdict: Verdict, wall: float, trace: bool = False) -> RunReport:
    names = p.names
    rep = RunReport(verdict.kind, verdict.strategy.value, verdict.stats.iterations, wall)
    if isinstance(verdict, Valid):
        for v in p.exists_vars:
            if v.id in verdict.witness:
                exact, dec = render_value(verdict.witness[v.id])
                rep.witness.append((v.name, exact, dec))
    if isinstance(verdict, Unknown):
        rep.reason = verdict.reason
    if trace:
        rep.counterexamples = [
            [(names[k], render_value(x)[0]) for k, x in sorted(cex.items())] for cex in verdict.trace.counterexamples
        ]
    return rep


# ---------------------------------------------------------------------------
# benchmark suite


@dataclass
class BenchCase:
    name: str
    build: Callable[[], EFProblem]
    config: EngineConfig = EngineConfig()
    expect: Optional[str] = None  # expected verdict, when there is one
    oracle: Optional[Callable[[Mapping[int, Value]], Tuple[bool, str]]] = None


@dataclass
class BenchRow:
    name: str
    verdict: str
    expected: str
    iterations: int
    seconds: float
    strategy: str
    oracle: str


def run_suite(cases: Sequence[BenchCase], log: Optional[Callable[[str], None]] = None) -> List[BenchRow]:
    rows = []
    for case in cases:
        t0 = time.perf_counter()
        p = case.build()
        verdict = solve(p, case.config)
        dt = time.perf_counter() - t0
        oracle = "-"
        if case.oracle is not None and isinstance(verdict, Valid):
            ok, _ = case.oracle(verdict.witness)
            oracle = "pass" if ok else "fail"
        row = BenchRow(
            case.name,
            verdict.kind,
            case.expect or "-",
            verdict.stats.iterations,
            dt,
            verdict.strategy.value,
            oracle,
        )
        rows.append(row)
        if log:
            log(f"{row.name}\t{row.verdict}\t{row.iterations}\t{row.seconds:.2f}s")
    return rows


TSV_HEADER = ("problem", "verdict", "expected", "iterations", "seconds", "strategy", "oracle")


def write_tsv(rows: Sequence[BenchRow], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(TSV_HEADER) + "\n")
        for r in rows:
            fh.write(
                "\t".join([r.name, r.verdict, r.expected, str(r.iterations), f"{r.seconds:.3f}", r.strategy, r.oracle])
                + "\n"
            )


def write_plot(rows: Sequence[BenchRow], path: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    colors = {"valid": "#2b8a3e", "invalid": "#c92a2a", "unknown": "#868e96"}
    fig, ax = plt.subplots(figsize=(8, 0.45 * len(rows) + 1.5))
    ys = list(range(len(rows)))[::-1]
    ax.barh(ys, [max(r.seconds, 1e-3) for r in rows], color=[colors[r.verdict] for r in rows])
    ax.set_yticks(ys)
    ax.set_yticklabels([r.name for r in rows])
    ax.set_xscale("log")
    ax.set_xlabel("wall time (s, log scale)")
    for y, r in zip(ys, rows):
        ax.text(max(r.seconds, 1e-3) * 1.1, y, f"{r.verdict}, {r.iterations} it", va="center", fontsize=8)
    handles = [plt.Rectangle((0, 0), 1, 1, color=c) for c in colors.values()]
    ax.legend(handles, list(colors), loc="lower right", fontsize=8)
    ax.set_title("benchmark suite")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
