"""Exact Fourier-Motzkin elimination over rationals with model extraction."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from ..ir import Cmp, IRError

Coeffs = Tuple[Tuple[int, Fraction], ...]


class NonlinearAtom(IRError):
    pass


@dataclass(frozen=True)
class Lin:
    """``sum coeffs*x + const  op  0`` with ``op`` in ``>``, ``>=``, ``=``."""

    coeffs: Coeffs
    const: Fraction
    op: str

    def vars(self):
        return [v for v, _ in self.coeffs]

    def coeff(self, v: int) -> Fraction:
        for w, c in self.coeffs:
            if w == v:
                return c
        return Fraction(0)

    def holds_const(self) -> bool:
        if self.op == ">":
            return self.const > 0
        if self.op == ">=":
            return self.const >= 0
        return self.const == 0

    def value(self, point: Mapping[int, Fraction]) -> Fraction:
        return self.const + sum(c * point[v] for v, c in self.coeffs)


def holds(c: Lin, point: Mapping[int, Fraction]) -> bool:
    x = c.value(point)
    return x > 0 if c.op == ">" else x >= 0 if c.op == ">=" else x == 0


def _mk(coeffs: Dict[int, Fraction], const: Fraction, op: str) -> Lin:
    return Lin(tuple(sorted((v, c) for v, c in coeffs.items() if c)), const, op)


def from_cmp(a: Cmp) -> Lin:
    """Translate a linear comparison atom (``!=`` must be split beforehand)."""
    if a.poly.degree() > 1:
        raise NonlinearAtom(f"nonlinear atom {a.poly.to_str()} {a.op} {a.rhs}")
    coeffs = {mono[0][0]: c for mono, c in a.poly.terms if mono}
    const = -a.rhs
    if a.op in (">", ">=", "="):
        return _mk(coeffs, const, a.op)
    if a.op in ("<", "<="):
        return _mk({v: -c for v, c in coeffs.items()}, -const, ">" if a.op == "<" else ">=")
    raise IRError("disequality must be split before elimination")


def bound(v: int, lo: Fraction, hi: Fraction) -> List[Lin]:
    return [_mk({v: Fraction(1)}, -lo, ">="), _mk({v: Fraction(-1)}, hi, ">=")]


def _combine(p: Lin, n: Lin, v: int) -> Lin:
    a, b = p.coeff(v), -n.coeff(v)  # both positive
    coeffs: Dict[int, Fraction] = {}
    for w, c in p.coeffs:
        coeffs[w] = coeffs.get(w, 0) + b * c
    for w, c in n.coeffs:
        coeffs[w] = coeffs.get(w, 0) + a * c
    coeffs.pop(v, None)
    op = ">" if ">" in (p.op, n.op) else ">="
    return _mk(coeffs, b * p.const + a * n.const, op)


def _solve_for(eq: Lin, v: int) -> Dict[int, Fraction]:
    """Express ``v`` from ``eq``: returns coefficients with key -1 as constant."""
    a = eq.coeff(v)
    expr = {w: -c / a for w, c in eq.coeffs if w != v}
    expr[-1] = -eq.const / a
    return expr


def _subst(c: Lin, v: int, expr: Dict[int, Fraction]) -> Lin:
    k = c.coeff(v)
    if not k:
        return c
    coeffs = {w: x for w, x in c.coeffs if w != v}
    const = c.const + k * expr[-1]
    for w, x in expr.items():
        if w != -1:
            coeffs[w] = coeffs.get(w, 0) + k * x
    return _mk(coeffs, const, c.op)


Grid = Tuple[Fraction, Fraction]  # (origin, step)
Source = frozenset


def _prune_src(rows: List[Tuple[Lin, Source]]):
    """Drop constant rows (or report their sources) and keep the tightest row per direction."""
    best: Dict[Coeffs, Tuple[Lin, Source]] = {}
    eqs: List[Tuple[Lin, Source]] = []
    for c, src in rows:
        if not c.coeffs:
            if not c.holds_const():
                return None, src
            continue
        if c.op == "=":
            eqs.append((c, src))
            continue
        scale = abs(c.coeffs[0][1])
        key = tuple((v, k / scale) for v, k in c.coeffs)
        const = c.const / scale
        old = best.get(key)
        if (
            old is None
            or const < old[0].const
            or (const == old[0].const and c.op == ">" and old[0].op == ">=")
            or (const == old[0].const and c.op == old[0].op and len(src) < len(old[1]))
        ):
            best[key] = (Lin(key, const, c.op), src)
    for key in list(best):
        if key not in best:
            continue
        neg = tuple((v, -k) for v, k in key)
        if neg not in best:
            continue
        (a, sa), (b, sb) = best[key], best[neg]
        total = a.const + b.const
        if total < 0 or (total == 0 and ">" in (a.op, b.op)):
            return None, sa | sb
        if total == 0:
            del best[key], best[neg]
            eqs.append((Lin(key, a.const, "="), sa | sb))
    return eqs + list(best.values()), None


def _split_eqs(rows: List[Tuple[Lin, Source]], v: int) -> List[Tuple[Lin, Source]]:
    """Equalities found during elimination become two non-strict rows when they mention ``v``."""
    out = []
    for c, src in rows:
        if c.op == "=" and c.coeff(v):
            out.append((Lin(c.coeffs, c.const, ">="), src))
            out.append((Lin(tuple((w, -k) for w, k in c.coeffs), -c.const, ">="), src))
        else:
            out.append((c, src))
    return out


def _grid_pick(lo, lo_strict, hi, hi_strict, grid: Grid) -> Optional[Fraction]:
    """Grid point in the interval nearest its midpoint (ties go down)."""
    origin, step = grid
    k_lo = -((origin - lo) // step)  # ceil((lo - origin) / step)
    if lo_strict and origin + k_lo * step == lo:
        k_lo += 1
    k_hi = (hi - origin) // step
    if hi_strict and origin + k_hi * step == hi:
        k_hi -= 1
    if k_lo > k_hi:
        return None
    mid = (lo + hi) / 2
    k = (mid - origin) // step
    k = min(max(k, k_lo), k_hi)
    best = origin + k * step
    if k + 1 <= k_hi and (origin + (k + 1) * step) - mid < mid - best:
        best = origin + (k + 1) * step
    return best


def fm_check(
    rows: Sequence[Tuple[Lin, Source]],
    order: Sequence[int],
    grids: Optional[Mapping[int, Grid]] = None,
):
    """Decide tagged constraints: ``(model, None)`` or ``(None, conflict sources)``.

    The model follows the ``fm_solve`` rule, except that variables listed in
    ``grids`` take the grid point nearest the midpoint of their final
    interval when one exists.
    """
    grids = grids or {}
    cur, bad = _prune_src(list(rows))
    if cur is None:
        return None, bad
    position = {v: i for i, v in enumerate(order)}
    solved: List[Tuple[int, Dict[int, Fraction]]] = []
    while True:
        hit = next(((c, s) for c, s in cur if c.op == "=" and c.coeffs), None)
        if hit is None:
            break
        eq, esrc = hit
        v = max(eq.vars(), key=lambda w: position.get(w, -1))
        expr = _solve_for(eq, v)
        solved.append((v, expr))
        nxt = [(_subst(c, v, expr), s | esrc if c.coeff(v) else s) for c, s in cur if c is not eq]
        cur, bad = _prune_src(nxt)
        if cur is None:
            return None, bad
    eliminated = {v for v, _ in solved}
    fm_vars = [v for v in order if v not in eliminated]
    history: List[Tuple[int, List[Lin]]] = []
    for v in reversed(fm_vars):
        pos, neg, rest = [], [], []
        for c, s in _split_eqs(cur, v):
            k = c.coeff(v)
            (pos if k > 0 else neg if k < 0 else rest).append((c, s))
        history.append((v, [c for c, _ in pos + neg]))
        new = rest + [(_combine(p, n, v), ps | ns) for p, ps in pos for n, ns in neg]
        cur, bad = _prune_src(new)
        if cur is None:
            return None, bad
    model: Dict[int, Fraction] = {}
    for v, involved in reversed(history):
        lo = hi = None
        lo_strict = hi_strict = False
        for c in involved:
            k = c.coeff(v)
            rest = c.const + sum(x * model[w] for w, x in c.coeffs if w != v)
            b = -rest / k
            if k > 0:
                if lo is None or b > lo or (b == lo and c.op == ">"):
                    lo, lo_strict = b, c.op == ">"
            else:
                if hi is None or b < hi or (b == hi and c.op == ">"):
                    hi, hi_strict = b, c.op == ">"
        if lo is None or hi is None:
            raise IRError(f"variable {v} is not bounded on both sides")
        value = lo if lo == hi else (lo + hi) / 2
        if v in grids and lo != hi:
            g = _grid_pick(lo, lo_strict, hi, hi_strict, grids[v])
            if g is not None:
                value = g
        model[v] = value
    for v, expr in reversed(solved):
        model[v] = expr[-1] + sum(x * model[w] for w, x in expr.items() if w != -1)
    return model, None


def fm_solve(cons: Sequence[Lin], order: Sequence[int]) -> Optional[Dict[int, Fraction]]:
    """Decide the conjunction ``cons``; return a model over ``order`` or None.

    Equalities are eliminated by substitution first; the remaining variables
    are eliminated by Fourier-Motzkin in reverse ``order``.  The model takes
    the midpoint of each variable's final feasible interval, or the endpoint
    when that interval is a single point.  Every variable of ``order`` must be
    bounded by ``cons`` on both sides.
    """
    model, _ = fm_check([(c, frozenset()) for c in cons], order)
    return model
