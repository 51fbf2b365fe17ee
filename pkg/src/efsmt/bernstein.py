"""Bernstein-basis range enclosures and a branch-and-bound universal checker.

A polynomial over the unit box ``[0,1]^n`` is written in the tensor
Bernstein basis of degree ``D``

    p(t) = sum_I b_I prod_i C(D_i, I_i) t_i^I_i (1 - t_i)^(D_i - I_i).

The coefficients enclose the range: ``min b <= p <= max b`` on the box,
and the coefficients at extreme multi-indices equal the values at the box
corners.  Coefficients are exact rationals held in numpy object arrays.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .backends.session import Sat, Unknown, Unsat, UnsupportedSort
from .ir import (
    FALSE,
    TRUE,
    Cmp,
    Formula,
    Interval,
    IRError,
    NotAGForm,
    RealSort,
    Rule,
    Var,
    ag_rules,
    compare,
    conj,
    simplify,
    to_nnf,
)
from .poly import Polynomial, as_fraction

MAX_TABLE_DEGREE = 16
BINOM = [[math.comb(n, k) for k in range(n + 1)] for n in range(MAX_TABLE_DEGREE + 1)]

Box = Dict[int, Tuple[Fraction, Fraction]]
BoxLike = Mapping[int, Union[Interval, Tuple]]


class DegreeError(IRError):
    pass


class UnsupportedAtom(IRError):
    pass


def binom(n: int, k: int) -> int:
    if n <= MAX_TABLE_DEGREE:
        return BINOM[n][k]
    return math.comb(n, k)


def as_box(box: BoxLike) -> Box:
    out: Box = {}
    for v, iv in box.items():
        if isinstance(iv, Interval):
            out[v] = (iv.lo, iv.hi)
        else:
            lo, hi = iv
            out[v] = (as_fraction(lo), as_fraction(hi))
        if out[v][0] > out[v][1]:
            raise IRError(f"empty interval for variable {v}")
    return out


def normalize_box(p: Polynomial, box: BoxLike) -> Polynomial:
    """Rewrite ``p`` over the unit box: ``q(t) = p(lo + t*(hi - lo))``.

    Point intervals are substituted as constants first; every other
    variable keeps its id and now ranges over ``[0, 1]``.
    """
    box = as_box(box)
    points = {v: lo for v, (lo, hi) in box.items() if lo == hi and v in p.variables()}
    q = p.substitute(points)
    maps = {
        v: (hi - lo, lo)
        for v, (lo, hi) in box.items()
        if lo != hi and v in q.variables()
    }
    return q.affine_compose(maps) if maps else q


@dataclass
class BernsteinTensor:
    """Coefficients ``b_I`` of a polynomial over ``box`` in variable order ``vars``."""

    vars: Tuple[int, ...]
    degrees: Tuple[int, ...]
    coeffs: np.ndarray
    box: Box

    @property
    def lower(self) -> Fraction:
        return min(self.coeffs.flat)

    @property
    def upper(self) -> Fraction:
        return max(self.coeffs.flat)

    def corner(self, bits: Sequence[int]) -> Fraction:
        """Coefficient at the extreme multi-index selected by ``bits``."""
        idx = tuple(d if b else 0 for b, d in zip(bits, self.degrees))
        return self.coeffs[idx]

    def corner_point(self, bits: Sequence[int]) -> Dict[int, Fraction]:
        return {v: self.box[v][1] if b else self.box[v][0] for v, b in zip(self.vars, bits)}

    def all_satisfy(self, op: str, rhs: Fraction = Fraction(0)) -> bool:
        return all(compare(c, op, rhs) for c in self.coeffs.flat)


def _power_array(p: Polynomial, vars: Sequence[int], degrees: Sequence[int]) -> np.ndarray:
    a = np.empty(tuple(d + 1 for d in degrees), dtype=object)
    a.fill(Fraction(0))
    pos = {v: i for i, v in enumerate(vars)}
    for mono, c in p.terms:
        idx = [0] * len(vars)
        for v, e in mono:
            if v not in pos:
                raise IRError(f"variable {v} is not part of the box")
            idx[pos[v]] = e
        a[tuple(idx)] = c
    return a


def _conversion_matrix(d: int) -> np.ndarray:
    # b_i = sum_{j <= i} C(i, j) / C(d, j) * a_j
    m = np.empty((d + 1, d + 1), dtype=object)
    m.fill(Fraction(0))
    for i in range(d + 1):
        for j in range(i + 1):
            m[i, j] = Fraction(binom(i, j), binom(d, j))
    return m


def _apply_axis(m: np.ndarray, a: np.ndarray, axis: int) -> np.ndarray:
    moved = np.moveaxis(a, axis, 0)
    shape = moved.shape
    out = m.dot(moved.reshape(shape[0], -1)).reshape((m.shape[0],) + shape[1:])
    return np.moveaxis(out, 0, axis)


def to_bernstein(
    p: Polynomial,
    degrees: Optional[Sequence[int]] = None,
    vars: Optional[Sequence[int]] = None,
    box: Optional[BoxLike] = None,
) -> BernsteinTensor:
    """Bernstein coefficients of ``p``, which must already live on the unit box.

    ``vars`` fixes the axis order (default: sorted variables of ``p``);
    ``degrees`` defaults to the per-variable degrees of ``p``.  ``box`` is
    the original box the unit box stands for and only serves witnesses.
    """
    vars = tuple(sorted(p.variables()) if vars is None else vars)
    if degrees is None:
        degrees = tuple(p.degree(v) for v in vars)
    degrees = tuple(degrees)
    if len(degrees) != len(vars):
        raise DegreeError("one degree per variable required")
    for v, d in zip(vars, degrees):
        if d < p.degree(v):
            raise DegreeError(f"degree {d} is below the degree {p.degree(v)} of variable {v}")
    coeffs = _power_array(p, vars, degrees)
    for axis, d in enumerate(degrees):
        if d > 0:
            coeffs = _apply_axis(_conversion_matrix(d), coeffs, axis)
    if box is None:
        b = {v: (Fraction(0), Fraction(1)) for v in vars}
    else:
        b = as_box(box)
        b = {v: b[v] for v in vars}
    return BernsteinTensor(vars, degrees, coeffs, b)


def subdivide(t: BernsteinTensor, dim: int, at: Fraction = Fraction(1, 2)) -> Tuple[BernsteinTensor, BernsteinTensor]:
    """de Casteljau split of axis ``dim`` (an index into ``t.vars``)."""
    at = as_fraction(at)
    d = t.degrees[dim]
    moved = np.moveaxis(t.coeffs, dim, 0)
    rows = [moved[i] for i in range(d + 1)]
    left, right = [rows[0]], [rows[-1]]
    level = rows
    for _ in range(d):
        level = [(1 - at) * level[i] + at * level[i + 1] for i in range(len(level) - 1)]
        left.append(level[0])
        right.append(level[-1])
    right.reverse()
    lc = np.moveaxis(np.array(left, dtype=object).reshape(moved.shape), 0, dim)
    rc = np.moveaxis(np.array(right, dtype=object).reshape(moved.shape), 0, dim)
    v = t.vars[dim]
    lo, hi = t.box[v]
    mid = lo + at * (hi - lo)
    lbox, rbox = dict(t.box), dict(t.box)
    lbox[v] = (lo, mid)
    rbox[v] = (mid, hi)
    return BernsteinTensor(t.vars, t.degrees, lc, lbox), BernsteinTensor(t.vars, t.degrees, rc, rbox)


# ---------------------------------------------------------------------------
# verdicts


@dataclass(frozen=True)
class Proved:
    depth: int = 0
    boxes: int = 1


@dataclass(frozen=True)
class Refuted:
    witness: Dict[int, Fraction]


@dataclass(frozen=True)
class Undecided:
    reason: str = "refinement depth exhausted"


AtomVerdict = Union[Proved, Refuted, Undecided]

_INEQ = ("<", "<=", ">", ">=")


def _require_ineq(a: Cmp) -> None:
    if a.op not in _INEQ:
        raise UnsupportedAtom(f"Bernstein checks need an inequality, got {a.op!r}")


class _Item:
    """One atom tracked through subdivision: ``poly op 0`` as a tensor."""

    __slots__ = ("atom", "tensor")

    def __init__(self, atom: Cmp, tensor: BernsteinTensor):
        self.atom = atom
        self.tensor = tensor

    def proved(self) -> bool:
        return self.tensor.all_satisfy(self.atom.op)

    def disproved(self) -> bool:
        return self.tensor.all_satisfy(_NEG[self.atom.op])

    def split(self, dim: int):
        a, b = subdivide(self.tensor, dim)
        return _Item(self.atom, a), _Item(self.atom, b)


_NEG = {"<": ">=", "<=": ">", ">": "<=", ">=": "<"}


def _prepare(atom: Cmp, box: Box, vars: Tuple[int, ...]) -> _Item:
    _require_ineq(atom)
    g = atom.lhs_minus_rhs
    missing = g.variables() - box.keys()
    if missing:
        raise IRError(f"atom mentions variables outside the box: {sorted(missing)}")
    q = normalize_box(g, box)
    degrees = tuple(q.degree(v) for v in vars)
    t = to_bernstein(q, degrees, vars, {v: box[v] for v in vars})
    return _Item(Cmp(q, atom.op), t)


def _split_dim(box: Box, vars: Tuple[int, ...], items: Sequence[_Item]) -> Optional[int]:
    used = {i for it in items for i, d in enumerate(it.tensor.degrees) if d > 0}
    best = None
    for i in sorted(used, key=lambda i: vars[i]):
        lo, hi = box[vars[i]]
        if best is None or hi - lo > box[vars[best]][1] - box[vars[best]][0]:
            best = i
    return best


def _corners(vars: Tuple[int, ...], box: Box, fixed: Mapping[int, Fraction]):
    for bits in itertools.product((0, 1), repeat=len(vars)):
        point = dict(fixed)
        for v, b in zip(vars, bits):
            point[v] = box[v][1] if b else box[v][0]
        yield point


def check_atom(atom: Cmp, box: BoxLike, max_depth: int = 10) -> AtomVerdict:
    """Decide ``forall box: atom`` by coefficient enclosure and bisection."""
    return check_ag([Rule((), atom)], box, max_depth)


def check_ag(rules: Sequence[Rule], box: BoxLike, max_depth: int = 10) -> AtomVerdict:
    """Decide ``forall box: AND_j (AND_p A_jp -> G_j)``.

    In each sub-box a rule is discharged when the negation of one of its
    assumptions, or its guarantee, holds on every Bernstein coefficient.
    A rule is refuted by an exact corner point that satisfies all of its
    assumptions and violates its guarantee.  Remaining sub-boxes are bisected
    along their widest dimension up to ``max_depth`` levels.
    """
    box = as_box(box)
    for r in rules:
        for a in r.assumptions + (r.guarantee,):
            _require_ineq(a)
    fixed = {v: lo for v, (lo, hi) in box.items() if lo == hi}
    vars = tuple(sorted(v for v, (lo, hi) in box.items() if lo != hi))
    live = [
        ([_prepare(a, box, vars) for a in r.assumptions], _prepare(r.guarantee, box, vars), r)
        for r in rules
    ]
    stats = {"boxes": 0, "depth": 0, "undecided": False}
    found = _ag_rec(live, box, vars, fixed, 0, max_depth, stats)
    if found is not None:
        return Refuted(found)
    if stats["undecided"]:
        return Undecided()
    return Proved(stats["depth"], stats["boxes"])


def _ag_rec(live, box: Box, vars, fixed, depth: int, max_depth: int, stats) -> Optional[Dict[int, Fraction]]:
    stats["boxes"] += 1
    stats["depth"] = max(stats["depth"], depth)
    pending = []
    for assumptions, guarantee, rule in live:
        if guarantee.proved() or any(a.disproved() for a in assumptions):
            continue
        pending.append((assumptions, guarantee, rule))
    if not pending:
        return None
    for point in _corners(vars, box, fixed):
        for _, _, rule in pending:
            if all(a.holds(point) for a in rule.assumptions) and not rule.guarantee.holds(point):
                return point
    if depth >= max_depth:
        stats["undecided"] = True
        return None
    items = [it for a, g, _ in pending for it in a + [g]]
    dim = _split_dim(box, vars, items)
    if dim is None:
        # every polynomial is constant here yet undecided: impossible for
        # exact coefficients, kept as a guard
        stats["undecided"] = True
        return None
    halves = ([], [])
    for assumptions, guarantee, rule in pending:
        sa = [a.split(dim) for a in assumptions]
        sg = guarantee.split(dim)
        for k in (0, 1):
            halves[k].append(([s[k] for s in sa], sg[k], rule))
    for k in (0, 1):
        sub_box = halves[k][0][1].tensor.box
        full = dict(box)
        full.update(sub_box)
        found = _ag_rec(halves[k], full, vars, fixed, depth + 1, max_depth, stats)
        if found is not None:
            return found
    return None


# ---------------------------------------------------------------------------
# session backend


class BernsteinBackend:
    """Satisfiability of a conjunction over real variables by refuting its negation.

    ``Refuted`` yields a satisfying corner point, ``Proved`` means Unsat and
    ``Undecided`` is reported as Unknown.
    """

    name = "bernstein"

    def __init__(self, max_depth: int = 10):
        self.max_depth = max_depth
        self.last_nodes = 0

    def check(self, formulas: Sequence[Formula], variables: Sequence[Var]):
        self.last_nodes = 0
        for v in variables:
            if not isinstance(v.sort, RealSort):
                raise UnsupportedSort(f"Bernstein checks need real sorts, {v.name} is not")
        neg = simplify(to_nnf(conj(list(formulas)), negate=True))
        if neg == TRUE:
            return Unsat()
        if neg == FALSE:
            return Sat({})
        try:
            rules = ag_rules(neg)
        except NotAGForm as e:
            return Unknown(f"not in assume-guarantee form: {e}")
        box = {v.id: (v.sort.interval.lo, v.sort.interval.hi) for v in variables}
        verdict = check_ag(rules, box, self.max_depth)
        if isinstance(verdict, Proved):
            self.last_nodes = verdict.boxes
            return Unsat()
        if isinstance(verdict, Refuted):
            return Sat(dict(verdict.witness))
        return Unknown("Bernstein refinement depth exhausted")
