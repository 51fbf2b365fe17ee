"""SMT-LIB 2 adapter talking to an external solver over standard I/O.

Each check runs one child process fed a complete script.  Any failure of
the child (missing executable, crash, timeout, unparsable reply) maps to
``Unknown`` with a reason; it never raises.
"""

from __future__ import annotations

import shlex
import subprocess
from fractions import Fraction
from typing import Dict, Sequence

from ..ir import (
    And,
    BoolSort,
    BoolVar,
    Cmp,
    Const,
    FixedSort,
    Formula,
    Iff,
    Implies,
    IntSort,
    Not,
    Or,
    Var,
    max_degree,
)
from ..poly import Polynomial
from ..sexp import Atom, SexpError, SList, parse_all
from .session import Sat, Unknown, Unsat


def num(q: Fraction) -> str:
    """SMT-LIB literal for a rational: ``(/ p q)`` and ``(- k)`` forms."""
    q = Fraction(q)
    mag = abs(q)
    body = str(mag.numerator) if mag.denominator == 1 else f"(/ {mag.numerator} {mag.denominator})"
    return f"(- {body})" if q < 0 else body


def int_num(q: Fraction) -> str:
    n = int(q)
    return f"(- {-n})" if n < 0 else str(n)


def _sym(v: int) -> str:
    return f"v{v}"


def poly_text(p: Polynomial, lit=num) -> str:
    if p.is_zero():
        return lit(Fraction(0))
    terms = []
    for mono, c in p.terms:
        factors = [lit(c)] if c != 1 or not mono else []
        for v, e in mono:
            factors.extend([_sym(v)] * e)
        terms.append(factors[0] if len(factors) == 1 else "(* " + " ".join(factors) + ")")
    return terms[0] if len(terms) == 1 else "(+ " + " ".join(terms) + ")"


def formula_text(f: Formula, lit=num) -> str:
    if isinstance(f, Const):
        return "true" if f.value else "false"
    if isinstance(f, BoolVar):
        return _sym(f.var)
    if isinstance(f, Cmp):
        lhs, rhs = poly_text(f.poly, lit), lit(f.rhs)
        if f.op == "!=":
            return f"(not (= {lhs} {rhs}))"
        return f"({f.op} {lhs} {rhs})"
    if isinstance(f, Not):
        return f"(not {formula_text(f.arg, lit)})"
    if isinstance(f, (And, Or)):
        if not f.args:
            return "true" if isinstance(f, And) else "false"
        head = "and" if isinstance(f, And) else "or"
        return f"({head} " + " ".join(formula_text(g, lit) for g in f.args) + ")"
    if isinstance(f, Implies):
        return f"(=> {formula_text(f.lhs, lit)} {formula_text(f.rhs, lit)})"
    if isinstance(f, Iff):
        return f"(= {formula_text(f.lhs, lit)} {formula_text(f.rhs, lit)})"
    raise TypeError(f"not a formula: {f!r}")


def _value(s) -> Fraction | bool:
    if isinstance(s, Atom):
        if s.text in ("true", "false"):
            return s.text == "true"
        return Fraction(s.text)
    head = s.items[0].text if s.items and isinstance(s.items[0], Atom) else None
    if head == "-" and len(s.items) == 2:
        return -_value(s.items[1])
    if head == "/" and len(s.items) == 3:
        return _value(s.items[1]) / _value(s.items[2])
    raise ValueError("unexpected value form")


class ExternalBackend:
    """Runs ``command`` (a shell-like string) once per check."""

    name = "external"

    def __init__(self, command: str, timeout: float = 30.0):
        self.argv = shlex.split(command)
        self.timeout = timeout
        self.last_nodes = 0
        self.last_script = ""

    def script(self, formulas: Sequence[Formula], variables: Sequence[Var]) -> str:
        has_int = any(isinstance(v.sort, IntSort) for v in variables)
        nonlinear = max((max_degree(f) for f in formulas), default=0) > 1
        if has_int:
            logic = "QF_NIRA" if nonlinear else "QF_LIRA"
        else:
            logic = "QF_NRA" if nonlinear else "QF_LRA"
        lines = [f"(set-logic {logic})", "(set-option :produce-models true)"]
        for v in variables:
            kind = "Bool" if isinstance(v.sort, BoolSort) else "Int" if isinstance(v.sort, IntSort) else "Real"
            lines.append(f"(declare-fun {_sym(v.id)} () {kind})")
        bounds = []
        for v in variables:
            if isinstance(v.sort, BoolSort):
                continue
            lit = int_num if isinstance(v.sort, IntSort) else num
            lo, hi = v.sort.interval.lo, v.sort.interval.hi
            bounds.append(f"(<= {lit(lo)} {_sym(v.id)})")
            bounds.append(f"(<= {_sym(v.id)} {lit(hi)})")
        if bounds:
            lines.append("(assert (and " + " ".join(bounds) + "))")
        lines.append("(push 1)")
        for f in formulas:
            lines.append(f"(assert {formula_text(f)})")
        lines.append("(check-sat)")
        if variables:
            lines.append("(get-value (" + " ".join(_sym(v.id) for v in variables) + "))")
        lines.append("(pop 1)")
        lines.append("(exit)")
        return "\n".join(lines) + "\n"

    def check(self, formulas: Sequence[Formula], variables: Sequence[Var]):
        self.last_nodes = 0
        for v in variables:
            if isinstance(v.sort, FixedSort):
                return Unknown(f"fixed-point sort of {v.name} is not supported by the external adapter")
        text = self.script(formulas, variables)
        self.last_script = text
        try:
            proc = subprocess.run(
                self.argv, input=text, capture_output=True, text=True, timeout=self.timeout
            )
        except FileNotFoundError:
            return Unknown(f"backend executable not found: {self.argv[0] if self.argv else ''}")
        except subprocess.TimeoutExpired:
            return Unknown(f"backend timed out after {self.timeout} s")
        except OSError as e:
            return Unknown(f"backend failed to start: {e}")
        return self.parse_reply(proc.stdout, variables, proc.returncode)

    def parse_reply(self, out: str, variables: Sequence[Var], returncode: int = 0):
        try:
            forms = parse_all(out)
        except SexpError as e:
            return Unknown(f"malformed reply: {e}")
        if not forms or not isinstance(forms[0], Atom):
            return Unknown(f"malformed reply (exit status {returncode})")
        status = forms[0].text
        if status == "unsat":
            return Unsat()
        if status == "unknown":
            return Unknown("backend returned unknown")
        if status != "sat":
            return Unknown(f"unexpected reply {status!r}")
        model: Dict[int, Fraction | bool] = {}
        if variables:
            if len(forms) < 2 or not isinstance(forms[1], SList):
                return Unknown("missing get-value reply")
            by_sym = {_sym(v.id): v for v in variables}
            try:
                for pair in forms[1].items:
                    name, val = pair.items
                    v = by_sym[name.text]
                    model[v.id] = _value(val)
            except (ValueError, KeyError, AttributeError, ZeroDivisionError) as e:
                return Unknown(f"malformed model: {e}")
        return Sat(model)
