"""Problem files: an s-expression format with a canonical printer.

Grammar (``;`` starts a comment)::

    file     := item*
    item     := (declare-exists NAME SORT) | (declare-forall NAME SORT)
              | (assume F) | (guarantee F) | (constrain F)
              | (preset NAME KEY=VALUE*)
    SORT     := Bool | Real LO HI | Int LO HI | Fixed LO HI STEP
    F        := true | false | NAME | (not F) | (and F*) | (or F*)
              | (=> F F) | (<=> F F) | (OP T T)      OP in < <= > >= = !=
    T        := NUMBER | NAME | (+ T*) | (- T T*) | (* T*) | (^ T INT)
    NUMBER   := integer | p/q | decimal, optionally negative (read exactly)

The problem matrix is ``(and assume* => and guarantee*) and constrain*``.
Variable ids follow declaration order, so ``parse(print(doc)) == doc``.
A file holds either declarations and constraints, or a single preset.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

from .ir import (
    FALSE,
    TRUE,
    And,
    Bool,
    BoolSort,
    BoolVar,
    Cmp,
    Const,
    EFProblem,
    FixedSort,
    Formula,
    Iff,
    Implies,
    IntSort,
    IRError,
    Not,
    Or,
    RealSort,
    Sort,
    Var,
    conj,
    free_vars,
)
from .ir import Fixed as FixedOf
from .ir import Int as IntOf
from .ir import Real as RealOf
from .poly import Polynomial
from .sexp import Atom, SexpError, SList, parse_all

_NUMBER = re.compile(r"^-?(\d+(/\d+)?|\d*\.\d+|\d+\.\d*)$")
_KEYWORDS = {"true", "false", "and", "or", "not", "=>", "<=>", "+", "-", "*", "^", "<", "<=", ">", ">=", "=", "!="}
_CMP = ("<", "<=", ">", ">=", "=", "!=")


class ParseError(SexpError):
    pass


PresetValue = Union[Fraction, str, bool]


@dataclass
class Document:
    """A parsed problem file."""

    declarations: List[Tuple[str, Var]] = field(default_factory=list)  # ("exists" | "forall", var)
    assume: List[Formula] = field(default_factory=list)
    guarantee: List[Formula] = field(default_factory=list)
    constrain: List[Formula] = field(default_factory=list)
    preset: Optional[Tuple[str, Dict[str, PresetValue]]] = None

    @property
    def is_preset(self) -> bool:
        return self.preset is not None

    def matrix(self) -> Formula:
        body: Formula = conj(self.guarantee)
        if self.assume:
            body = Implies(conj(self.assume), body)
        return conj([body] + self.constrain) if self.constrain else body

    def problem(self) -> EFProblem:
        ex = tuple(v for q, v in self.declarations if q == "exists")
        fa = tuple(v for q, v in self.declarations if q == "forall")
        return EFProblem(ex, fa, self.matrix())


def parse_number(text: str) -> Optional[Fraction]:
    if not _NUMBER.match(text):
        return None
    return Fraction(text)


# ---------------------------------------------------------------------------
# parsing


class _Parser:
    def __init__(self):
        self.doc = Document()
        self.names: Dict[str, Var] = {}

    def err(self, node, msg: str) -> ParseError:
        return ParseError(msg, node.line, node.col)

    def head(self, node) -> str:
        if not isinstance(node, SList) or not node.items or not isinstance(node.items[0], Atom):
            raise self.err(node, "expected a list starting with a keyword")
        return node.items[0].text

    def item(self, node) -> None:
        h = self.head(node)
        args = node.items[1:]
        if h in ("declare-exists", "declare-forall"):
            self.declare(node, "exists" if h == "declare-exists" else "forall", args)
        elif h in ("assume", "guarantee", "constrain"):
            if len(args) != 1:
                raise self.err(node, f"{h} takes exactly one formula, got {len(args)}")
            getattr(self.doc, h).append(self.formula(args[0]))
        elif h == "preset":
            self.preset(node, args)
        else:
            raise self.err(node, f"unknown item {h!r}")

    def declare(self, node, quant: str, args) -> None:
        if len(args) < 2 or not all(isinstance(a, Atom) for a in args):
            raise self.err(node, "declaration needs a name and a sort")
        name = args[0].text
        if name in _KEYWORDS or parse_number(name) is not None or "=" in name:
            raise self.err(args[0], f"invalid variable name {name!r}")
        if name in self.names:
            raise self.err(args[0], f"variable {name!r} declared twice")
        sort = self.sort(node, args[1].text, args[2:])
        v = Var(len(self.doc.declarations), name, sort)
        self.names[name] = v
        self.doc.declarations.append((quant, v))

    def sort(self, node, kind: str, bounds) -> Sort:
        arity = {"Bool": 0, "Real": 2, "Int": 2, "Fixed": 3}
        if kind not in arity:
            raise self.err(node, f"unknown sort {kind!r}")
        if kind != "Bool" and not bounds:
            raise self.err(node, f"unbounded numeric variable: {kind} needs lower and upper bounds")
        if len(bounds) != arity[kind]:
            raise self.err(node, f"sort {kind} takes {arity[kind]} numbers, got {len(bounds)}")
        nums = []
        for b in bounds:
            x = parse_number(b.text)
            if x is None:
                raise self.err(b, f"expected a number, got {b.text!r}")
            nums.append(x)
        try:
            if kind == "Bool":
                return Bool
            if kind == "Real":
                return RealOf(*nums)
            if kind == "Int":
                if any(x.denominator != 1 for x in nums):
                    raise IRError("Int bounds must be integers")
                return IntOf(int(nums[0]), int(nums[1]))
            return FixedOf(*nums)
        except IRError as e:
            raise self.err(node, str(e)) from e

    def preset(self, node, args) -> None:
        if self.doc.preset is not None:
            raise self.err(node, "only one preset per file")
        if not args or not isinstance(args[0], Atom):
            raise self.err(node, "preset needs a name")
        opts: Dict[str, PresetValue] = {}
        for a in args[1:]:
            if not isinstance(a, Atom) or "=" not in a.text:
                raise self.err(a, "preset options are written key=value")
            k, v = a.text.split("=", 1)
            num = parse_number(v)
            opts[k] = num if num is not None else (v == "true" if v in ("true", "false") else v)
        self.doc.preset = (args[0].text, opts)

    def var(self, atom: Atom) -> Var:
        v = self.names.get(atom.text)
        if v is None:
            raise self.err(atom, f"undeclared variable {atom.text!r}")
        return v

    def formula(self, node) -> Formula:
        if isinstance(node, Atom):
            if node.text == "true":
                return TRUE
            if node.text == "false":
                return FALSE
            v = self.var(node)
            if not isinstance(v.sort, BoolSort):
                raise self.err(node, f"{v.name} is not a Bool")
            return BoolVar(v.id)
        h = self.head(node)
        args = node.items[1:]
        if h == "not":
            self.arity(node, args, 1)
            return Not(self.formula(args[0]))
        if h == "and":
            return And(*(self.formula(a) for a in args)) if args else TRUE
        if h == "or":
            return Or(*(self.formula(a) for a in args)) if args else FALSE
        if h == "=>":
            self.arity(node, args, 2)
            return Implies(self.formula(args[0]), self.formula(args[1]))
        if h == "<=>":
            self.arity(node, args, 2)
            return Iff(self.formula(args[0]), self.formula(args[1]))
        if h in _CMP:
            self.arity(node, args, 2)
            lhs, rhs = self.term(args[0]), self.term(args[1])
            return Cmp(lhs - rhs, h)
        raise self.err(node, f"unknown connective {h!r}")

    def arity(self, node, args, n: int) -> None:
        if len(args) != n:
            raise self.err(node, f"{node.items[0].text} takes {n} argument(s), got {len(args)}")

    def term(self, node) -> Polynomial:
        if isinstance(node, Atom):
            x = parse_number(node.text)
            if x is not None:
                return Polynomial.const(x)
            v = self.var(node)
            if isinstance(v.sort, BoolSort):
                raise self.err(node, f"Bool {v.name} used in arithmetic")
            return v.poly
        h = self.head(node)
        args = [self.term(a) for a in node.items[1:]]
        if h == "+":
            out = Polynomial()
            for a in args:
                out = out + a
            return out
        if h == "-":
            if not args:
                raise self.err(node, "- needs at least one argument")
            if len(args) == 1:
                return -args[0]
            out = args[0]
            for a in args[1:]:
                out = out - a
            return out
        if h == "*":
            out = Polynomial.const(1)
            for a in args:
                out = out * a
            return out
        if h == "^":
            self.arity(node, node.items[1:], 2)
            e = node.items[2]
            n = parse_number(e.text) if isinstance(e, Atom) else None
            if n is None or n.denominator != 1 or n < 0:
                raise self.err(e, "exponent must be a nonnegative integer")
            return args[0] ** int(n)
        raise self.err(node, f"unknown operator {h!r}")


def parse(text: str) -> Document:
    """Parse a problem file; every error carries ``line:col``."""
    try:
        nodes = parse_all(text)
    except SexpError as e:
        raise ParseError(e.msg, e.line, e.col) from e
    if not nodes:
        raise ParseError("no declarations", 1, 1)
    p = _Parser()
    for n in nodes:
        p.item(n)
    doc = p.doc
    if doc.preset is not None:
        if doc.declarations or doc.assume or doc.guarantee or doc.constrain:
            raise ParseError("a preset file cannot also declare variables or constraints", nodes[0].line, nodes[0].col)
        return doc
    if not doc.declarations:
        raise ParseError("no declarations", nodes[0].line, nodes[0].col)
    try:
        doc.problem()
    except IRError as e:
        raise ParseError(str(e), nodes[0].line, nodes[0].col) from e
    return doc


def parse_file(path: str) -> Document:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read())


# ---------------------------------------------------------------------------
# printing


def format_number(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def _sort_text(s: Sort) -> str:
    if isinstance(s, BoolSort):
        return "Bool"
    lo, hi = format_number(s.interval.lo), format_number(s.interval.hi)
    if isinstance(s, RealSort):
        return f"Real {lo} {hi}"
    if isinstance(s, IntSort):
        return f"Int {lo} {hi}"
    if isinstance(s, FixedSort):
        return f"Fixed {lo} {hi} {format_number(s.step)}"
    raise IRError(f"unknown sort {s!r}")


def print_term(p: Polynomial, names: Mapping[int, str]) -> str:
    monos = []
    for mono, c in p.terms:
        factors = [names[v] if e == 1 else f"(^ {names[v]} {e})" for v, e in mono]
        if not factors:
            monos.append(format_number(c))
        elif c == 1:
            monos.append(factors[0] if len(factors) == 1 else f"(* {' '.join(factors)})")
        else:
            monos.append(f"(* {format_number(c)} {' '.join(factors)})")
    if not monos:
        return "0"
    return monos[0] if len(monos) == 1 else f"(+ {' '.join(monos)})"


def print_formula(f: Formula, names: Mapping[int, str]) -> str:
    if isinstance(f, Const):
        return "true" if f.value else "false"
    if isinstance(f, BoolVar):
        return names[f.var]
    if isinstance(f, Cmp):
        return f"({f.op} {print_term(f.poly, names)} {format_number(f.rhs)})"
    if isinstance(f, Not):
        return f"(not {print_formula(f.arg, names)})"
    if isinstance(f, (And, Or)):
        op = "and" if isinstance(f, And) else "or"
        return f"({op}" + "".join(" " + print_formula(g, names) for g in f.args) + ")"
    if isinstance(f, Implies):
        return f"(=> {print_formula(f.lhs, names)} {print_formula(f.rhs, names)})"
    if isinstance(f, Iff):
        return f"(<=> {print_formula(f.lhs, names)} {print_formula(f.rhs, names)})"
    raise IRError(f"cannot print {f!r}")


def _preset_value(v: PresetValue) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, Fraction):
        return format_number(v)
    return str(v)


def print_document(doc: Document) -> str:
    """Canonical text: one item per line, declarations first."""
    if doc.preset is not None:
        name, opts = doc.preset
        return "(preset " + " ".join([name] + [f"{k}={_preset_value(v)}" for k, v in opts.items()]) + ")\n"
    names = {v.id: v.name for _, v in doc.declarations}
    lines = [f"(declare-{q} {v.name} {_sort_text(v.sort)})" for q, v in doc.declarations]
    for kind in ("assume", "guarantee", "constrain"):
        for f in getattr(doc, kind):
            lines.append(f"({kind} {print_formula(f, names)})")
    return "\n".join(lines) + "\n"


def rename(f: Formula, ids: Mapping[int, int]) -> Formula:
    """Formula with variable ids mapped through ``ids``."""
    if isinstance(f, Const):
        return f
    if isinstance(f, BoolVar):
        return BoolVar(ids[f.var])
    if isinstance(f, Cmp):
        return Cmp(f.poly.compose({v: Polynomial.var(ids[v]) for v in f.poly.variables()}), f.op, f.rhs)
    if isinstance(f, Not):
        return Not(rename(f.arg, ids))
    if isinstance(f, (And, Or)):
        return type(f)(*(rename(g, ids) for g in f.args))
    if isinstance(f, (Implies, Iff)):
        return type(f)(rename(f.lhs, ids), rename(f.rhs, ids))
    raise IRError(f"cannot rename {f!r}")


def document_from_problem(p: EFProblem, assume: Sequence[Formula] = ()) -> Document:
    """A document for ``p``; variables are renumbered by declaration order."""
    order = sorted(p.variables, key=lambda v: v.id)
    fresh = {v.id: i for i, v in enumerate(order)}
    ex = p.exists_ids()
    decls = [("exists" if v.id in ex else "forall", Var(fresh[v.id], v.name, v.sort)) for v in order]
    if len({v.name for _, v in decls}) != len(decls):
        raise IRError("variable names must be unique to print a problem")
    matrix = rename(p.matrix, fresh)
    parts = list(matrix.args) if isinstance(matrix, And) else [matrix]
    exists_ids = {fresh[v] for v in ex}
    constrain = [f for f in parts if free_vars(f) <= exists_ids]
    guarantee = [f for f in parts if not free_vars(f) <= exists_ids]
    return Document(decls, list(assume), guarantee, constrain)
