"""Propositional combinations of linear rational atoms.

A small CDCL(T) solver: the NNF formula is clausified with one-sided
definitions, boolean search uses watched literals and first-UIP learning,
and every propagation fixpoint is checked by exact Fourier-Motzkin
elimination.  A theory conflict is explained by the atoms that produced the
contradiction, shrunk by deletion, and learned as a clause.  Atoms over a
single variable also imply each other through their bounds.

Integer and fixed-point variables are handled by branch and bound: the
relaxation is solved over the rationals and an off-grid value ``x`` of a
grid variable adds the clause ``v <= below(x) or v >= above(x)``.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

from ..ir import (
    FALSE,
    TRUE,
    And,
    BoolSort,
    BoolVar,
    Cmp,
    FixedSort,
    Formula,
    IntSort,
    MIRRORED_OP,
    Not,
    Or,
    RealSort,
    Var,
    conj,
    simplify,
    to_nnf,
)
from ..poly import Polynomial
from . import fm
from .session import Sat, SessionError, Unsat, UnsupportedSort

NonlinearAtom = fm.NonlinearAtom

_NUMERIC = (RealSort, IntSort, FixedSort)
_MAX_LEMMAS = 4000


def split_disequalities(f: Formula) -> Formula:
    """Rewrite ``p != c`` as ``p < c or p > c`` in an NNF formula."""
    if isinstance(f, Cmp):
        if f.op == "!=":
            return Or(Cmp(f.poly, "<", f.rhs), Cmp(f.poly, ">", f.rhs))
        return f
    if isinstance(f, And):
        return And(*(split_disequalities(g) for g in f.args))
    if isinstance(f, Or):
        return Or(*(split_disequalities(g) for g in f.args))
    return f


def _split_relations(f: Formula) -> Formula:
    """NNF with only ``<``, ``<=``, ``>``, ``>=`` atoms."""
    if isinstance(f, Cmp):
        if f.op == "=":
            return And(Cmp(f.poly, "<=", f.rhs), Cmp(f.poly, ">=", f.rhs))
        if f.op == "!=":
            return Or(Cmp(f.poly, "<", f.rhs), Cmp(f.poly, ">", f.rhs))
        return f
    if isinstance(f, And):
        return And(*(_split_relations(g) for g in f.args))
    if isinstance(f, Or):
        return Or(*(_split_relations(g) for g in f.args))
    return f


_lin = lru_cache(maxsize=65536)(fm.from_cmp)


@lru_cache(maxsize=65536)
def _normalize(c: Cmp) -> Tuple[Cmp, bool]:
    """Canonical atom (``<=`` or ``<``, leading coefficient +-1) and polarity."""
    k = abs(c.poly.terms[0][1])
    poly, rhs, op = c.poly, c.rhs, c.op
    if k != 1:
        poly, rhs = poly.scale(1 / k), rhs / k
    if op in ("<=", "<"):
        return Cmp(poly, op, rhs), True
    return Cmp(poly, "<" if op == ">=" else "<=", rhs), False


@lru_cache(maxsize=65536)
def _unit(a: Cmp) -> Optional[Tuple[int, str, Fraction]]:
    """``(v, op, c)`` when ``a`` is equivalent to ``v op c``."""
    if len(a.poly.terms) != 1:
        return None
    mono, k = a.poly.terms[0]
    if len(mono) != 1 or mono[0][1] != 1:
        return None
    op = a.op if k > 0 else MIRRORED_OP[a.op]
    return mono[0][0], op, a.rhs / k


# interval of one variable: (lo, lo_open, hi, hi_open)
Bounds = Tuple[Fraction, bool, Fraction, bool]


def _decide(b: Bounds, op: str, c: Fraction) -> Optional[bool]:
    lo, lo_open, hi, hi_open = b
    if op == "<":
        if hi < c or (hi == c and hi_open):
            return True
        if lo >= c:
            return False
    elif op == "<=":
        if hi <= c:
            return True
        if lo > c or (lo == c and lo_open):
            return False
    elif op == ">":
        if lo > c or (lo == c and lo_open):
            return True
        if hi <= c:
            return False
    elif op == ">=":
        if lo >= c:
            return True
        if hi < c or (hi == c and hi_open):
            return False
    return None


def _tighten(b: Bounds, op: str, c: Fraction) -> Bounds:
    lo, lo_open, hi, hi_open = b
    if op in ("<", "<="):
        strict = op == "<"
        if c < hi or (c == hi and strict and not hi_open):
            hi, hi_open = c, strict
    if op in (">", ">="):
        strict = op == ">"
        if c > lo or (c == lo and strict and not lo_open):
            lo, lo_open = c, strict
    return lo, lo_open, hi, hi_open


_FLIP = {"<": ">=", "<=": ">", ">": "<=", ">=": "<"}


def _grid(v: Var) -> Optional[fm.Grid]:
    if isinstance(v.sort, FixedSort):
        return v.sort.interval.lo, v.sort.step
    if isinstance(v.sort, IntSort):
        return v.sort.interval.lo, Fraction(1)
    return None


class _Search:
    """One CDCL(T) run; literals are nonzero ints and ``-l`` negates ``l``."""

    def __init__(self, numeric: Sequence[Var]):
        self.numeric = list(numeric)
        self.key = None
        self.order = [v.id for v in numeric]
        self.box: Dict[int, Bounds] = {
            v.id: (v.sort.interval.lo, False, v.sort.interval.hi, False) for v in numeric
        }
        self.box_rows = [
            (c, frozenset()) for v in numeric for c in fm.bound(v.id, v.sort.interval.lo, v.sort.interval.hi)
        ]
        self.grids = {v.id: g for v in numeric for g in [_grid(v)] if g is not None}
        self.assign: List[Optional[bool]] = [None]
        self.level: List[int] = [0]
        self.reason: List[Optional[List[int]]] = [None]
        self.activity: List[float] = [0.0]
        self.atom: Dict[int, Cmp] = {}
        self.atom_var: Dict[Cmp, int] = {}
        self.bool_var: Dict[int, int] = {}
        self.unit_atoms: Dict[int, List[Tuple[int, str, Fraction]]] = {}
        self.unit_of: Dict[int, Tuple[int, str, Fraction]] = {}
        self.watches: Dict[int, List[List[int]]] = {}
        self.clauses: List[List[int]] = []
        self.originals: List[List[int]] = []  # clauses decisions must satisfy
        self.trail: List[int] = []
        self.lim: List[int] = []
        self.qhead = 0
        self.dirty = True
        self.unsat = False
        self.nodes = 0
        self.new_lemmas: List[Tuple[Cmp, ...]] = []
        self._enc_cache: Dict[Formula, int] = {}
        self._row_cache: Dict[int, fm.Lin] = {}
        self.last_model: Optional[Dict[int, Fraction]] = None
        self._holds: Dict[int, bool] = {}  # literal -> holds in last_model
        self.bump = 1.0

    # -- variables and literals -------------------------------------------
    def _new_var(self) -> int:
        self.assign.append(None)
        self.level.append(0)
        self.reason.append(None)
        self.activity.append(0.0)
        return len(self.assign) - 1

    def value(self, lit: int) -> Optional[bool]:
        a = self.assign[abs(lit)]
        if a is None:
            return None
        return a if lit > 0 else not a

    def lit_cmp(self, lit: int) -> Cmp:
        a = self.atom[abs(lit)]
        return a if lit > 0 else a.negate()

    def atom_lit(self, c: Cmp) -> int:
        key, pos = _normalize(c)
        var = self.atom_var.get(key)
        if var is None:
            var = self._new_var()
            self.atom_var[key] = var
            self.atom[var] = key
            u = _unit(key)
            if u is not None:
                self.unit_of[var] = u
                self.unit_atoms.setdefault(u[0], []).append((var, u[1], u[2]))
                d = _decide(self.box[u[0]], u[1], u[2])
                if d is not None:
                    self.add_clause([var if d else -var])
                else:
                    for lit in list(self.trail):
                        if abs(lit) in self.unit_of and self.unit_of[abs(lit)][0] == u[0]:
                            implied = self._implied(lit, var, u[1], u[2])
                            if implied is not None:
                                self.add_clause([implied, -lit])
        return var if pos else -var

    def _implied(self, lit: int, var: int, op: str, c: Fraction) -> Optional[int]:
        """Literal of ``var`` forced by the single bound literal ``lit``, if any."""
        v, op1, c1 = self.unit_of[abs(lit)]
        if lit < 0:
            op1 = _FLIP[op1]
        d = _decide(_tighten(self.box[v], op1, c1), op, c)
        if d is None:
            return None
        return var if d else -var

    # -- clausification -----------------------------------------------------
    def encode(self, f: Formula) -> int:
        hit = self._enc_cache.get(f)
        if hit is not None:
            return hit
        if isinstance(f, BoolVar):
            if f.var not in self.bool_var:
                self.bool_var[f.var] = self._new_var()
            lit = self.bool_var[f.var]
        elif isinstance(f, Not):
            lit = -self.encode(f.arg)
        elif isinstance(f, Cmp):
            lit = self.atom_lit(f)
        elif isinstance(f, And):
            lit = self._new_var()
            for g in f.args:
                self.add_clause([-lit, self.encode(g)])
        elif isinstance(f, Or):
            lit = self._new_var()
            self.add_clause([-lit] + [self.encode(g) for g in f.args])
        else:
            raise SessionError(f"unexpected connective in NNF: {f!r}")
        self._enc_cache[f] = lit
        return lit

    def assert_formula(self, f: Formula) -> None:
        if f == TRUE:
            return
        if f == FALSE:
            self.unsat = True
            return
        if isinstance(f, And):
            for g in f.args:
                self.assert_formula(g)
        elif isinstance(f, Or):
            self.add_clause([self.encode(g) for g in f.args])
        else:
            self.add_clause([self.encode(f)])

    def add_clause(self, lits: List[int]) -> None:
        """Add a clause at decision level 0."""
        out: List[int] = []
        for lit in lits:
            if -lit in out:
                return
            if lit in out:
                continue
            val = self.value(lit)
            if val is True and self.level[abs(lit)] == 0:
                return
            if val is False and self.level[abs(lit)] == 0:
                continue
            out.append(lit)
        if not out:
            self.unsat = True
            return
        if len(out) == 1:
            if self.value(out[0]) is None:
                self.enqueue(out[0], out)
            elif self.value(out[0]) is False:
                self.unsat = True
            return
        self.clauses.append(out)
        self.originals.append(out)
        self._watch(out)

    def _watch(self, clause: List[int]) -> None:
        self.watches.setdefault(-clause[0], []).append(clause)
        self.watches.setdefault(-clause[1], []).append(clause)

    # -- propagation ----------------------------------------------------------
    def enqueue(self, lit: int, reason: Optional[List[int]]) -> None:
        var = abs(lit)
        self.assign[var] = lit > 0
        self.level[var] = len(self.lim)
        self.reason[var] = reason
        self.trail.append(lit)
        self.dirty = True

    def propagate(self) -> Optional[List[int]]:
        while self.qhead < len(self.trail):
            p = self.trail[self.qhead]
            self.qhead += 1
            confl = self._bound_propagate(p)
            if confl is not None:
                return confl
            ws = self.watches.get(p)
            if not ws:
                continue
            keep: List[List[int]] = []
            i = 0
            while i < len(ws):
                c = ws[i]
                i += 1
                if c[0] == -p:
                    c[0], c[1] = c[1], c[0]
                if self.value(c[0]) is True:
                    keep.append(c)
                    continue
                moved = False
                for k in range(2, len(c)):
                    if self.value(c[k]) is not False:
                        c[1], c[k] = c[k], c[1]
                        self.watches.setdefault(-c[1], []).append(c)
                        moved = True
                        break
                if moved:
                    continue
                keep.append(c)
                if self.value(c[0]) is False:
                    keep.extend(ws[i:])
                    self.watches[p] = keep
                    return c
                self.enqueue(c[0], c)
            self.watches[p] = keep
        return None

    def _bound_propagate(self, p: int) -> Optional[List[int]]:
        u = self.unit_of.get(abs(p))
        if u is None:
            return None
        for var, op, c in self.unit_atoms[u[0]]:
            if var == abs(p):
                continue
            implied = self._implied(p, var, op, c)
            if implied is None:
                continue
            val = self.value(implied)
            if val is None:
                self.enqueue(implied, [implied, -p])
            elif val is False:
                return [implied, -p]
        return None

    # -- theory -------------------------------------------------------------
    def _row(self, lit: int) -> fm.Lin:
        row = self._row_cache.get(lit)
        if row is None:
            row = self._row_cache[lit] = _lin(self.lit_cmp(lit))
        return row

    def _rows(self, lits):
        return self.box_rows + [(self._row(l), frozenset((l,))) for l in lits]

    def _atom_lits(self) -> List[int]:
        return [l for l in self.trail if abs(l) in self.atom]

    def theory_conflict(self) -> Optional[List[int]]:
        lits = self._atom_lits()
        if self.last_model is not None and all(self._holds_last(l) for l in lits):
            return None
        model, core = fm.fm_check(self._rows(lits), self.order)
        if model is not None:
            self.last_model, self._holds = model, {}
            return None
        pos = {l: i for i, l in enumerate(self.trail)}
        core = sorted(core, key=pos.__getitem__)
        i = 0
        while i < len(core) and len(core) > 1:
            trial = core[:i] + core[i + 1:]
            if fm.fm_check(self._rows(trial), self.order)[0] is None:
                core = trial
            else:
                i += 1
        self.new_lemmas.append(tuple(self.lit_cmp(-l) for l in core))
        return [-l for l in core]

    def _holds_last(self, lit: int) -> bool:
        ok = self._holds.get(lit)
        if ok is None:
            ok = self._holds[lit] = fm.holds(self._row(lit), self.last_model)
        return ok

    def model(self):
        model, _ = fm.fm_check(self._rows(self._atom_lits()), self.order, self.grids)
        return model

    # -- conflict analysis ------------------------------------------------------
    def analyze(self, confl: List[int]) -> Tuple[List[int], int]:
        cur = len(self.lim)
        seen = set()
        learnt: List[int] = [0]
        counter = 0
        p = 0
        idx = len(self.trail) - 1
        clause = confl
        while True:
            for q in clause:
                if q == p:
                    continue
                var = abs(q)
                if var in seen or self.level[var] == 0:
                    continue
                seen.add(var)
                self.activity[var] += self.bump
                if self.level[var] == cur:
                    counter += 1
                else:
                    learnt.append(q)
            while abs(self.trail[idx]) not in seen:
                idx -= 1
            p = self.trail[idx]
            idx -= 1
            counter -= 1
            if counter == 0:
                break
            clause = self.reason[abs(p)]
        learnt[0] = -p
        self.bump *= 1.05
        back = 0
        if len(learnt) > 1:
            j = max(range(1, len(learnt)), key=lambda k: self.level[abs(learnt[k])])
            learnt[1], learnt[j] = learnt[j], learnt[1]
            back = self.level[abs(learnt[1])]
        return learnt, back

    def backtrack(self, level: int) -> None:
        if len(self.lim) <= level:
            return
        stop = self.lim[level]
        for lit in self.trail[stop:]:
            var = abs(lit)
            self.assign[var] = None
            self.reason[var] = None
        del self.trail[stop:]
        del self.lim[level:]
        self.qhead = len(self.trail)

    def _resolve(self, confl: List[int]) -> bool:
        """Learn from a conflict and backjump; False when the formula is unsatisfiable."""
        top = max((self.level[abs(l)] for l in confl), default=0)
        if top == 0:
            return False
        self.backtrack(top)
        learnt, back = self.analyze(confl)
        self.backtrack(back)
        if len(learnt) > 1:
            self.clauses.append(learnt)
            self._watch(learnt)
        self.enqueue(learnt[0], learnt)
        return True

    # -- decisions --------------------------------------------------------------
    def _decision(self) -> Optional[int]:
        """A literal of the first unsatisfied input clause, or None when all hold."""
        for c in self.originals:
            best = None
            for lit in c:
                val = self.value(lit)
                if val is True:
                    break
                if val is None and (best is None or self.activity[abs(lit)] > self.activity[abs(best)]):
                    best = lit
            else:
                return best
        return None

    def _grid_split(self, model) -> Optional[Tuple[int, Fraction, Fraction]]:
        for v in self.numeric:
            g = self.grids.get(v.id)
            if g is None or v.sort.contains(model[v.id]):
                continue
            origin, step = g
            k = (model[v.id] - origin) // step
            return v.id, origin + k * step, origin + (k + 1) * step
        return None

    def restart(self) -> None:
        """Return to level 0 so that more clauses can be added."""
        self.backtrack(0)
        self.dirty = True

    def solve(self):
        if self.unsat:
            return None
        while True:
            confl = self.propagate()
            if confl is None and self.dirty:
                self.dirty = False
                confl = self.theory_conflict()
            if confl is not None:
                self.nodes += 1
                if not self._resolve(confl):
                    self.unsat = True
                    return None
                continue
            lit = self._decision()
            if lit is None:
                model = self.model()
                split = self._grid_split(model)
                if split is None:
                    return model
                vid, below, above = split
                self.backtrack(0)
                v = Polynomial.var(vid)
                lo_lit = self.atom_lit(Cmp(v, "<=", below))
                hi_lit = self.atom_lit(Cmp(v, ">=", above))
                self.new_lemmas.append((self.lit_cmp(lo_lit), self.lit_cmp(hi_lit)))
                self.add_clause([lo_lit, hi_lit])
                if self.unsat:
                    return None
                continue
            self.nodes += 1
            self.lim.append(len(self.trail))
            self.enqueue(lit, None)


class LinearBackend:
    """Decides conjunctions of formulas over Bool, Real, Int and Fixed variables.

    Theory lemmas (clauses valid for the variable boxes alone) are kept
    across checks over the same variables.
    """

    name = "linear"

    def __init__(self):
        self.last_nodes = 0
        self._lemma_key = None
        self._lemmas: List[Tuple[Cmp, ...]] = []
        self._search: Optional[_Search] = None
        self._asserted: List[Formula] = []

    def check(self, formulas: Sequence[Formula], variables: Sequence[Var]):
        for v in variables:
            if not isinstance(v.sort, (BoolSort,) + _NUMERIC):
                raise UnsupportedSort(f"linear backend cannot decide {v.name}: {type(v.sort).__name__}")
        formulas = list(formulas)
        numeric = [v for v in variables if isinstance(v.sort, _NUMERIC)]
        key = tuple((v.id, v.sort) for v in numeric)
        bools = tuple(v.id for v in variables if isinstance(v.sort, BoolSort))
        if key != self._lemma_key:
            self._lemma_key, self._lemmas = key, []
        s = self._search
        n = len(self._asserted)
        if (
            s is not None
            and s.key == (key, bools)
            and len(formulas) >= n
            and formulas[:n] == self._asserted
        ):
            # the previous assertions are a prefix: extend the same search
            s.restart()
            new = formulas[n:]
        else:
            s = _Search(numeric)
            s.key = (key, bools)
            for lemma in self._lemmas:
                s.add_clause([s.atom_lit(c) for c in lemma])
            new = formulas
        root = simplify(_split_relations(to_nnf(conj(new))))
        for a in _atoms_of(root):
            if isinstance(a, Cmp):
                _lin(a)  # raises NonlinearAtom early
        s.assert_formula(root)
        start_nodes, start_lemmas = s.nodes, len(s.new_lemmas)
        model = s.solve()
        self._search, self._asserted = s, formulas
        self.last_nodes = s.nodes - start_nodes
        self._lemmas.extend(s.new_lemmas[start_lemmas:])
        del self._lemmas[:-_MAX_LEMMAS]
        if model is None:
            return Unsat()
        out: Dict[int, object] = dict(model)
        for vid, var in s.bool_var.items():
            if s.assign[var] is not None:
                out[vid] = s.assign[var]
        return Sat(out)


def _atoms_of(f: Formula):
    stack = [f]
    while stack:
        g = stack.pop()
        if isinstance(g, (And, Or)):
            stack.extend(g.args)
        elif isinstance(g, Not):
            stack.append(g.arg)
        else:
            yield g
