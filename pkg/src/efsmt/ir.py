"""Exact intermediate representation: sorts, variables, formulas, EF problems."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, Iterator, List, Mapping, Tuple, Union

from .poly import Number, Polynomial, as_fraction

Value = Union[Fraction, bool]
Assignment = Dict[int, Value]


class IRError(ValueError):
    """Malformed IR value."""


class UnboundVariableError(KeyError):
    def __init__(self, var: int, name: str | None = None):
        self.var = var
        self.name = name
        super().__init__(f"variable {name or var!s} is unbound")

    def __str__(self) -> str:
        return self.args[0]


# --------------------------------------------------------------------------
# sorts


@dataclass(frozen=True)
class Interval:
    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        object.__setattr__(self, "lo", as_fraction(self.lo))
        object.__setattr__(self, "hi", as_fraction(self.hi))
        if self.lo > self.hi:
            raise IRError(f"empty interval [{self.lo}, {self.hi}]")

    def __contains__(self, x) -> bool:
        return self.lo <= x <= self.hi

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    @property
    def mid(self) -> Fraction:
        return (self.lo + self.hi) / 2


@dataclass(frozen=True)
class BoolSort:
    finite = True
    numeric = False

    def values(self) -> List[bool]:
        return [False, True]

    def contains(self, v) -> bool:
        return isinstance(v, bool)

    @property
    def lower(self) -> bool:
        return False


@dataclass(frozen=True)
class IntSort:
    interval: Interval
    finite = True
    numeric = True

    def __post_init__(self):
        if self.interval.lo.denominator != 1 or self.interval.hi.denominator != 1:
            raise IRError("integer sort needs integer endpoints")

    def values(self) -> List[Fraction]:
        return [Fraction(i) for i in range(int(self.interval.lo), int(self.interval.hi) + 1)]

    def contains(self, v) -> bool:
        return not isinstance(v, bool) and v in self.interval and Fraction(v).denominator == 1

    @property
    def lower(self) -> Fraction:
        return self.interval.lo


@dataclass(frozen=True)
class RealSort:
    interval: Interval
    finite = False
    numeric = True

    def values(self):
        raise IRError("real sorts have no finite value list")

    def contains(self, v) -> bool:
        return not isinstance(v, bool) and v in self.interval

    @property
    def lower(self) -> Fraction:
        return self.interval.lo


@dataclass(frozen=True)
class FixedSort:
    """Fixed-point grid ``{lo, lo+step, ...}`` intersected with ``[lo, hi]``."""

    interval: Interval
    step: Fraction
    finite = True
    numeric = True

    def __post_init__(self):
        object.__setattr__(self, "step", as_fraction(self.step))
        if self.step <= 0:
            raise IRError("fixed-point step must be positive")

    @property
    def size(self) -> int:
        return int(self.interval.width // self.step) + 1

    def values(self) -> List[Fraction]:
        lo, s = self.interval.lo, self.step
        return [lo + k * s for k in range(self.size)]

    def contains(self, v) -> bool:
        if isinstance(v, bool) or v not in self.interval:
            return False
        return ((Fraction(v) - self.interval.lo) / self.step).denominator == 1

    def snap(self, v: Fraction) -> Fraction:
        """Nearest grid point (ties go down)."""
        lo, s = self.interval.lo, self.step
        k = (as_fraction(v) - lo) / s
        n = int(k) if k >= 0 else 0
        if k - n > Fraction(1, 2):
            n += 1
        n = max(0, min(n, self.size - 1))
        return lo + n * s

    @property
    def lower(self) -> Fraction:
        return self.interval.lo


Sort = Union[BoolSort, IntSort, RealSort, FixedSort]


def Real(lo: Number | str, hi: Number | str) -> RealSort:
    return RealSort(Interval(as_fraction(lo), as_fraction(hi)))


def Int(lo: int, hi: int) -> IntSort:
    return IntSort(Interval(Fraction(lo), Fraction(hi)))


def Fixed(lo: Number | str, hi: Number | str, step: Number | str) -> FixedSort:
    return FixedSort(Interval(as_fraction(lo), as_fraction(hi)), as_fraction(step))


Bool = BoolSort()


@dataclass(frozen=True)
class Var:
    id: int
    name: str
    sort: Sort

    @property
    def poly(self) -> Polynomial:
        return Polynomial.var(self.id)

    # arithmetic sugar builds polynomials
    def __add__(self, o):
        return self.poly + _p(o)

    __radd__ = __add__

    def __sub__(self, o):
        return self.poly - _p(o)

    def __rsub__(self, o):
        return _p(o) - self.poly

    def __mul__(self, o):
        return self.poly * _p(o)

    __rmul__ = __mul__

    def __neg__(self):
        return -self.poly

    def __pow__(self, n: int):
        return self.poly ** n


def _p(o) -> Polynomial:
    if isinstance(o, Var):
        return o.poly
    if isinstance(o, Polynomial):
        return o
    return Polynomial.const(as_fraction(o))


# --------------------------------------------------------------------------
# formulas

OPS = ("<", "<=", ">", ">=", "=", "!=")
NEGATED_OP = {"<": ">=", "<=": ">", ">": "<=", ">=": "<", "=": "!=", "!=": "="}
MIRRORED_OP = {"<": ">", "<=": ">=", ">": "<", ">=": "<=", "=": "=", "!=": "!="}


def compare(lhs: Fraction, op: str, rhs: Fraction) -> bool:
    if op == "<":
        return lhs < rhs
    if op == "<=":
        return lhs <= rhs
    if op == ">":
        return lhs > rhs
    if op == ">=":
        return lhs >= rhs
    if op == "=":
        return lhs == rhs
    if op == "!=":
        return lhs != rhs
    raise IRError(f"unknown comparison {op!r}")


class Formula:
    """Base class of the quantifier-free formula tree."""

    __slots__ = ()


@dataclass(frozen=True)
class Const(Formula):
    value: bool


TRUE = Const(True)
FALSE = Const(False)


@dataclass(frozen=True)
class BoolVar(Formula):
    var: int


@dataclass(frozen=True)
class Cmp(Formula):
    """``poly op rhs`` with the constant of ``poly`` moved into ``rhs``."""

    poly: Polynomial
    op: str
    rhs: Fraction = Fraction(0)

    def __post_init__(self):
        if self.op not in OPS:
            raise IRError(f"unknown comparison {self.op!r}")
        c = self.poly.constant
        object.__setattr__(self, "rhs", as_fraction(self.rhs) - c)
        if c:
            object.__setattr__(self, "poly", self.poly.without_constant())

    def holds(self, point: Mapping[int, Number]) -> bool:
        return compare(self.poly.evaluate(point), self.op, self.rhs)

    def negate(self) -> "Cmp":
        return Cmp(self.poly, NEGATED_OP[self.op], self.rhs)

    @property
    def lhs_minus_rhs(self) -> Polynomial:
        return self.poly - self.rhs


@dataclass(frozen=True)
class Not(Formula):
    arg: Formula


@dataclass(frozen=True)
class And(Formula):
    args: Tuple[Formula, ...]

    def __init__(self, *args):
        if len(args) == 1 and not isinstance(args[0], Formula):
            args = tuple(args[0])
        object.__setattr__(self, "args", tuple(args))


@dataclass(frozen=True)
class Or(Formula):
    args: Tuple[Formula, ...]

    def __init__(self, *args):
        if len(args) == 1 and not isinstance(args[0], Formula):
            args = tuple(args[0])
        object.__setattr__(self, "args", tuple(args))


@dataclass(frozen=True)
class Implies(Formula):
    lhs: Formula
    rhs: Formula


@dataclass(frozen=True)
class Iff(Formula):
    lhs: Formula
    rhs: Formula


def _cmp(a, op, b) -> Cmp:
    return Cmp(_p(a) - _p(b), op)


def lt(a, b) -> Cmp:
    return _cmp(a, "<", b)


def le(a, b) -> Cmp:
    return _cmp(a, "<=", b)


def gt(a, b) -> Cmp:
    return _cmp(a, ">", b)


def ge(a, b) -> Cmp:
    return _cmp(a, ">=", b)


def eq(a, b) -> Cmp:
    return _cmp(a, "=", b)


def ne(a, b) -> Cmp:
    return _cmp(a, "!=", b)


def bvar(v: Var | int) -> BoolVar:
    return BoolVar(v.id if isinstance(v, Var) else v)


def conj(fs: Iterable[Formula]) -> Formula:
    fs = [f for f in fs if f != TRUE]
    if any(f == FALSE for f in fs):
        return FALSE
    if not fs:
        return TRUE
    return fs[0] if len(fs) == 1 else And(*fs)


def disj(fs: Iterable[Formula]) -> Formula:
    fs = [f for f in fs if f != FALSE]
    if any(f == TRUE for f in fs):
        return TRUE
    if not fs:
        return FALSE
    return fs[0] if len(fs) == 1 else Or(*fs)


# --------------------------------------------------------------------------
# traversal


def children(f: Formula) -> Tuple[Formula, ...]:
    if isinstance(f, (And, Or)):
        return f.args
    if isinstance(f, Not):
        return (f.arg,)
    if isinstance(f, (Implies, Iff)):
        return (f.lhs, f.rhs)
    return ()


def atoms(f: Formula) -> Iterator[Formula]:
    """Leaves (``Cmp`` and ``BoolVar``) in left-to-right order, with repeats."""
    stack = [f]
    out = []
    while stack:
        g = stack.pop()
        if isinstance(g, (Cmp, BoolVar)):
            out.append(g)
        else:
            stack.extend(reversed(children(g)))
    return iter(out)


def free_vars(f: Formula) -> frozenset:
    vs = set()
    for a in atoms(f):
        if isinstance(a, BoolVar):
            vs.add(a.var)
        else:
            vs |= a.poly.variables()
    return frozenset(vs)


def max_degree(f: Formula) -> int:
    return max((a.poly.degree() for a in atoms(f) if isinstance(a, Cmp)), default=0)


# --------------------------------------------------------------------------
# operations


def evaluate(f: Formula, a: Mapping[int, Value], names: Mapping[int, str] | None = None) -> bool:
    """Exact truth value of ``f`` under a total assignment."""
    if isinstance(f, Const):
        return f.value
    if isinstance(f, BoolVar):
        if f.var not in a:
            raise UnboundVariableError(f.var, names.get(f.var) if names else None)
        return bool(a[f.var])
    if isinstance(f, Cmp):
        for v in f.poly.variables():
            if v not in a:
                raise UnboundVariableError(v, names.get(v) if names else None)
        return f.holds(a)
    if isinstance(f, Not):
        return not evaluate(f.arg, a, names)
    if isinstance(f, And):
        return all(evaluate(g, a, names) for g in f.args)
    if isinstance(f, Or):
        return any(evaluate(g, a, names) for g in f.args)
    if isinstance(f, Implies):
        return (not evaluate(f.lhs, a, names)) or evaluate(f.rhs, a, names)
    if isinstance(f, Iff):
        return evaluate(f.lhs, a, names) == evaluate(f.rhs, a, names)
    raise IRError(f"not a formula: {f!r}")


def substitute(f: Formula, a: Mapping[int, Value]) -> Formula:
    """Replace bound variables by constants.

    Only atoms that become variable-free are folded to ``TRUE``/``FALSE``;
    the connective structure is kept.
    """
    if not a:
        return f
    if isinstance(f, Const):
        return f
    if isinstance(f, BoolVar):
        if f.var in a:
            return TRUE if a[f.var] else FALSE
        return f
    if isinstance(f, Cmp):
        if not (f.poly.variables() & a.keys()):
            return f
        p = f.poly.substitute({v: x for v, x in a.items() if not isinstance(x, bool)})
        if p.is_constant():
            return TRUE if compare(p.constant, f.op, f.rhs) else FALSE
        return Cmp(p, f.op, f.rhs)
    if isinstance(f, Not):
        return Not(substitute(f.arg, a))
    if isinstance(f, And):
        return And(*(substitute(g, a) for g in f.args))
    if isinstance(f, Or):
        return Or(*(substitute(g, a) for g in f.args))
    if isinstance(f, Implies):
        return Implies(substitute(f.lhs, a), substitute(f.rhs, a))
    if isinstance(f, Iff):
        return Iff(substitute(f.lhs, a), substitute(f.rhs, a))
    raise IRError(f"not a formula: {f!r}")


def simplify(f: Formula) -> Formula:
    """Propagate constants through connectives and flatten nested And/Or."""
    if isinstance(f, Cmp) and f.poly.is_constant():
        return TRUE if compare(f.poly.constant, f.op, f.rhs) else FALSE
    if isinstance(f, (Const, BoolVar, Cmp)):
        return f
    if isinstance(f, Not):
        g = simplify(f.arg)
        if isinstance(g, Const):
            return FALSE if g.value else TRUE
        if isinstance(g, Not):
            return g.arg
        return Not(g)
    if isinstance(f, (And, Or)):
        unit, zero = (TRUE, FALSE) if isinstance(f, And) else (FALSE, TRUE)
        out: List[Formula] = []
        seen = set()
        for g in f.args:
            g = simplify(g)
            if g == zero:
                return zero
            if g == unit:
                continue
            parts = g.args if type(g) is type(f) else (g,)
            for h in parts:
                if h not in seen:
                    seen.add(h)
                    out.append(h)
        if not out:
            return unit
        return out[0] if len(out) == 1 else type(f)(*out)
    if isinstance(f, Implies):
        return simplify(Or(Not(f.lhs), f.rhs))
    if isinstance(f, Iff):
        lhs, rhs = simplify(f.lhs), simplify(f.rhs)
        if isinstance(lhs, Const):
            return rhs if lhs.value else simplify(Not(rhs))
        if isinstance(rhs, Const):
            return lhs if rhs.value else simplify(Not(lhs))
        return Iff(lhs, rhs)
    raise IRError(f"not a formula: {f!r}")


def negate_to_nnf(f: Formula) -> Formula:
    """Negation normal form of ``not f``."""
    return to_nnf(f, negate=True)


def to_nnf(f: Formula, negate: bool = False) -> Formula:
    if isinstance(f, Const):
        return Const(f.value != negate)
    if isinstance(f, BoolVar):
        return Not(f) if negate else f
    if isinstance(f, Cmp):
        return f.negate() if negate else f
    if isinstance(f, Not):
        return to_nnf(f.arg, not negate)
    if isinstance(f, And):
        args = tuple(to_nnf(g, negate) for g in f.args)
        return Or(*args) if negate else And(*args)
    if isinstance(f, Or):
        args = tuple(to_nnf(g, negate) for g in f.args)
        return And(*args) if negate else Or(*args)
    if isinstance(f, Implies):
        if negate:
            return And(to_nnf(f.lhs), to_nnf(f.rhs, True))
        return Or(to_nnf(f.lhs, True), to_nnf(f.rhs))
    if isinstance(f, Iff):
        a, na = to_nnf(f.lhs), to_nnf(f.lhs, True)
        b, nb = to_nnf(f.rhs), to_nnf(f.rhs, True)
        if negate:
            return Or(And(a, nb), And(na, b))
        return Or(And(a, b), And(na, nb))
    raise IRError(f"not a formula: {f!r}")


# --------------------------------------------------------------------------
# problems


@dataclass(frozen=True)
class EFProblem:
    exists_vars: Tuple[Var, ...]
    forall_vars: Tuple[Var, ...]
    matrix: Formula

    def __post_init__(self):
        object.__setattr__(self, "exists_vars", tuple(self.exists_vars))
        object.__setattr__(self, "forall_vars", tuple(self.forall_vars))
        ex = {v.id for v in self.exists_vars}
        fa = {v.id for v in self.forall_vars}
        if len(ex) != len(self.exists_vars) or len(fa) != len(self.forall_vars):
            raise IRError("duplicate variable id")
        if ex & fa:
            raise IRError("exists and forall variables overlap")
        undeclared = free_vars(self.matrix) - ex - fa
        if undeclared:
            raise IRError(f"undeclared variables in matrix: {sorted(undeclared)}")
        for v in self.variables:
            if isinstance(v.sort, BoolSort):
                continue
            if not isinstance(v.sort, (IntSort, RealSort, FixedSort)):
                raise IRError(f"variable {v.name} has no bounded sort")
        for a in atoms(self.matrix):
            if isinstance(a, BoolVar) and not isinstance(self.var(a.var).sort, BoolSort):
                raise IRError(f"{self.var(a.var).name} used as a boolean")
            if isinstance(a, Cmp):
                for w in a.poly.variables():
                    if isinstance(self.var(w).sort, BoolSort):
                        raise IRError(f"boolean {self.var(w).name} used in arithmetic")

    @property
    def variables(self) -> Tuple[Var, ...]:
        return self.exists_vars + self.forall_vars

    def var(self, vid: int) -> Var:
        for v in self.variables:
            if v.id == vid:
                return v
        raise KeyError(vid)

    def by_name(self, name: str) -> Var:
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(name)

    @property
    def names(self) -> Dict[int, str]:
        return {v.id: v.name for v in self.variables}

    def exists_ids(self) -> frozenset:
        return frozenset(v.id for v in self.exists_vars)

    def forall_ids(self) -> frozenset:
        return frozenset(v.id for v in self.forall_vars)

    def named(self, a: Mapping[int, Value]) -> Dict[str, Value]:
        n = self.names
        return {n[k]: v for k, v in a.items()}

    def assignment(self, **values) -> Assignment:
        """Build an assignment from variable names."""
        out: Assignment = {}
        for k, v in values.items():
            var = self.by_name(k)
            out[var.id] = v if isinstance(var.sort, BoolSort) else as_fraction(v)
        return out

    def replace(self, **kw) -> "EFProblem":
        d = dict(exists_vars=self.exists_vars, forall_vars=self.forall_vars, matrix=self.matrix)
        d.update(kw)
        return EFProblem(**d)


class VarPool:
    """Hands out dense ids and collects exists/forall declarations."""

    def __init__(self, start: int = 0):
        self._ids = itertools.count(start)
        self.exists: List[Var] = []
        self.forall: List[Var] = []

    def fresh(self, name: str, sort: Sort) -> Var:
        return Var(next(self._ids), name, sort)

    def exists_var(self, name: str, sort: Sort) -> Var:
        v = self.fresh(name, sort)
        self.exists.append(v)
        return v

    def forall_var(self, name: str, sort: Sort) -> Var:
        v = self.fresh(name, sort)
        self.forall.append(v)
        return v

    def problem(self, matrix: Formula) -> EFProblem:
        return EFProblem(tuple(self.exists), tuple(self.forall), matrix)


def linearizable(p: EFProblem) -> bool:
    """Every monomial is at most one exists variable times one forall variable.

    Both factors must have degree one; a single variable of either kind
    qualifies only to degree one as well.
    """
    ex, fa = p.exists_ids(), p.forall_ids()
    for a in atoms(p.matrix):
        if not isinstance(a, Cmp):
            continue
        for mono, _ in a.poly.terms:
            de = sum(e for v, e in mono if v in ex)
            df = sum(e for v, e in mono if v in fa)
            if de > 1 or df > 1:
                return False
    return True


# --------------------------------------------------------------------------
# assume-guarantee form


@dataclass(frozen=True)
class Rule:
    assumptions: Tuple[Cmp, ...]
    guarantee: Cmp

    def to_formula(self) -> Formula:
        if not self.assumptions:
            return self.guarantee
        return Implies(conj(self.assumptions), self.guarantee)


@dataclass(frozen=True)
class AGProblem:
    exists_vars: Tuple[Var, ...]
    forall_vars: Tuple[Var, ...]
    rules: Tuple[Rule, ...]

    def to_formula(self) -> Formula:
        return conj(r.to_formula() for r in self.rules)

    def to_ef(self) -> EFProblem:
        return EFProblem(self.exists_vars, self.forall_vars, self.to_formula())

    @classmethod
    def from_ef(cls, p: EFProblem) -> "AGProblem":
        return cls(p.exists_vars, p.forall_vars, tuple(ag_rules(p.matrix)))


class NotAGForm(IRError):
    pass


_AG_OPS = ("<", "<=", ">", ">=")


def _ag_atom(f: Formula) -> Cmp:
    if isinstance(f, Cmp) and f.op in _AG_OPS:
        return f
    if isinstance(f, Not) and isinstance(f.arg, Cmp) and f.arg.op in _AG_OPS:
        return f.arg.negate()
    raise NotAGForm(f"not an inequality atom: {f!r}")


def _ag_conj(f: Formula) -> List[List[Cmp]]:
    """Antecedent as a list of alternative conjunctions (a DNF of atoms)."""
    if f == TRUE:
        return [[]]
    if f == FALSE:
        return []
    if isinstance(f, And):
        alts = [[]]
        for g in f.args:
            alts = [a + b for a in alts for b in _ag_conj(g)]
        return alts
    if isinstance(f, Or):
        return [a for g in f.args for a in _ag_conj(g)]
    return [[_ag_atom(f)]]


def ag_rules(f: Formula) -> List[Rule]:
    """Decompose a formula into assume-guarantee rules.

    Accepts conjunctions of inequality atoms and implications whose
    antecedent is a disjunction of conjunctions and whose consequent is a
    conjunction of atoms.  Raises :class:`NotAGForm` otherwise.
    """
    if f == TRUE:
        return []
    if isinstance(f, And):
        return [r for g in f.args for r in ag_rules(g)]
    if isinstance(f, Implies):
        alts = _ag_conj(f.lhs)
        rules = []
        for g in ag_rules(f.rhs):
            for alt in alts:
                rules.append(Rule(tuple(alt) + g.assumptions, g.guarantee))
        return rules
    if isinstance(f, Or):
        # (not A1) or ... or G: the last disjunct is the guarantee
        if not f.args:
            raise NotAGForm("empty disjunction")
        alts: List[List[Cmp]] = [[]]
        for g in f.args[:-1]:
            alts = [a + b for a in alts for b in _ag_conj(negate_to_nnf(g))]
        return [
            Rule(tuple(alt) + r.assumptions, r.guarantee) for r in ag_rules(f.args[-1]) for alt in alts
        ]
    return [Rule((), _ag_atom(f))]
