"""Problem transformations: discretization, strengthening, Routh arrays and
complex splitting."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

from .bernstein import Proved, check_atom
from .ir import (
    Cmp,
    EFProblem,
    FixedSort,
    IRError,
    Implies,
    RealSort,
    Rule,
    Var,
    conj,
    eq,
    lt,
)
from .poly import Number, Polynomial, as_fraction, divide_exact

BoxMap = Mapping[int, Tuple[Number, Number]]


# ---------------------------------------------------------------------------
# discretization


def discretize(p: EFProblem, step: Number, which: str = "both") -> EFProblem:
    """Replace the selected real sorts by fixed-point grids of ``step``."""
    step = as_fraction(step)
    if step <= 0:
        raise IRError("step must be positive")
    if which not in ("exists", "forall", "both"):
        raise IRError(f"which must be exists, forall or both, not {which!r}")

    def conv(vs):
        return tuple(
            Var(v.id, v.name, FixedSort(v.sort.interval, step)) if isinstance(v.sort, RealSort) else v
            for v in vs
        )

    ex = conv(p.exists_vars) if which in ("exists", "both") else p.exists_vars
    fa = conv(p.forall_vars) if which in ("forall", "both") else p.forall_vars
    return EFProblem(ex, fa, p.matrix)


# ---------------------------------------------------------------------------
# strengthening


class StrengthenError(IRError):
    def __init__(self, msg: str, var: Optional[int] = None):
        super().__init__(msg)
        self.var = var


@dataclass(frozen=True)
class StrengthenReport:
    original: Cmp
    strengthened: Cmp
    shifts: Dict[int, Fraction] = field(default_factory=dict)
    justification: Dict[int, str] = field(default_factory=dict)


def _extend(box: Dict[int, Tuple[Fraction, Fraction]], vs, step: Fraction):
    out = dict(box)
    for v in vs:
        lo, hi = out[v]
        out[v] = (lo - step, hi + step)
    return out


def _sign(d: Polynomial, box, depth: int) -> Optional[int]:
    if isinstance(check_atom(Cmp(d, ">="), box, depth), Proved):
        return 1
    if isinstance(check_atom(Cmp(d, "<="), box, depth), Proved):
        return -1
    return None


def strengthen(
    atom: Cmp,
    universal: BoxMap,
    step: Number,
    params: BoxMap | None = None,
    polarity: str = "positive",
    samples: int = 1000,
    seed: int = 0,
    max_depth: int = 8,
) -> StrengthenReport:
    """Shift universal variables by one grid step so the new atom implies the old.

    With ``polarity="positive"`` (a guarantee) each variable moves in the
    direction that works against the comparison.  ``"negative"`` is for
    atoms in an assumption position: the shift goes the other way, which
    weakens the assumption and therefore strengthens the implication.
    Monotonicity in each shifted variable is certified from the sign of the
    partial derivative over the box widened by ``step`` (falling back to the
    box itself), and the implication is re-checked on random samples.
    """
    if atom.op not in ("<", "<=", ">", ">="):
        raise StrengthenError(f"cannot strengthen a {atom.op!r} atom")
    if polarity not in ("positive", "negative"):
        raise StrengthenError(f"unknown polarity {polarity!r}")
    step = as_fraction(step)
    params = dict(params or {})
    box = {v: (as_fraction(lo), as_fraction(hi)) for v, (lo, hi) in {**params, **universal}.items()}
    g = atom.lhs_minus_rhs
    shift_vars = sorted(v for v in universal if v in g.variables())
    if not shift_vars:
        return StrengthenReport(atom, atom)
    missing = g.variables() - box.keys()
    if missing:
        raise StrengthenError(f"no box for variables {sorted(missing)}")
    wants_large = atom.op in (">", ">=")
    shifts: Dict[int, Fraction] = {}
    why: Dict[int, str] = {}
    wide = _extend(box, shift_vars, step)
    for v in shift_vars:
        d = g.derivative(v)
        sign, where = _sign(d, wide, max_depth), "box widened by one step"
        if sign is None:
            sign, where = _sign(d, box, max_depth), "box"
        if sign is None:
            raise StrengthenError(f"cannot certify the sign of the derivative in variable {v}", v)
        # adversarial move: the one that pushes g against the comparison
        direction = -sign if wants_large else sign
        if polarity == "negative":
            direction = -direction
        shifts[v] = direction * step
        why[v] = f"d/dv {'>=' if sign > 0 else '<='} 0 on the {where}"
    new = g.affine_compose({v: (1, s) for v, s in shifts.items()})
    report = StrengthenReport(atom, Cmp(new, atom.op), shifts, why)
    _check_implication(report, box, polarity, samples, seed)
    return report


def _check_implication(r: StrengthenReport, box, polarity: str, samples: int, seed: int) -> None:
    rng = random.Random(seed)
    vs = sorted(box)
    for _ in range(samples):
        pt = {}
        for v in vs:
            lo, hi = box[v]
            pt[v] = lo + (hi - lo) * Fraction(rng.randrange(1025), 1024)
        new, old = r.strengthened.holds(pt), r.original.holds(pt)
        bad = (new and not old) if polarity == "positive" else (old and not new)
        if bad:
            raise StrengthenError(f"sampled implication fails at {pt}")


def strengthen_rule(
    rule: Rule, universal: BoxMap, step: Number, params: BoxMap | None = None, **kw
) -> Tuple[Rule, List[StrengthenReport]]:
    """Strengthen an assume-guarantee rule: weaken assumptions, tighten the guarantee."""
    reports = [strengthen(a, universal, step, params, polarity="negative", **kw) for a in rule.assumptions]
    g = strengthen(rule.guarantee, universal, step, params, polarity="positive", **kw)
    return Rule(tuple(r.strengthened for r in reports), g.strengthened), reports + [g]


# ---------------------------------------------------------------------------
# Routh-Hurwitz


class DegenerateRouth(IRError):
    pass


def _as_poly(c) -> Polynomial:
    return c if isinstance(c, Polynomial) else Polynomial.const(as_fraction(c))


def routh_first_column(coeffs: Sequence[Union[Polynomial, Number]], zero_pivot: str = "unstable") -> List[Polynomial]:
    """First-column conditions of the Routh array, highest degree first.

    Rows are built fraction-free and every new entry is divided exactly by
    earlier pivots whenever the division is polynomial, so for degree two
    the result is the coefficient list itself.  Stability holds iff every
    returned polynomial is positive.  An identically zero pivot means some
    root lies on or right of the imaginary axis; by default the column ends
    with that zero (so the conditions fail); ``zero_pivot="error"`` raises.
    """
    cs = [_as_poly(c) for c in coeffs]
    if not cs or cs[0].is_zero():
        raise DegenerateRouth("leading coefficient is identically zero")
    if cs[0].is_constant() and cs[0].constant < 0:
        cs = [-c for c in cs]
    n = len(cs) - 1
    width = n // 2 + 1
    zero = Polynomial()
    rows = [cs[0::2], cs[1::2]]
    rows = [r + [zero] * (width - len(r)) for r in rows]
    column = [rows[0][0]]
    pivots = [rows[0][0]]
    for k in range(1, n + 1):
        cur = rows[k]
        if cur[0].is_zero():
            if zero_pivot == "error":
                raise DegenerateRouth(f"pivot of row {k} is identically zero")
            column.append(zero)
            return column
        column.append(cur[0])
        if k == n:
            break
        prev = rows[k - 1]
        nxt = []
        for j in range(width):
            a = prev[j + 1] if j + 1 < width else zero
            b = cur[j + 1] if j + 1 < width else zero
            nxt.append(cur[0] * a - prev[0] * b)
        pivots.append(cur[0])
        rows.append(_reduce_row(nxt, pivots[::-1]))
    return column


def _reduce_row(row: List[Polynomial], divisors: Sequence[Polynomial]) -> List[Polynomial]:
    """Divide the whole row by the first positive pivot that divides it exactly."""
    for d in divisors:
        if d.is_constant():
            if d.constant > 0:
                return [e.scale(1 / d.constant) for e in row]
            continue
        qs = [divide_exact(e, d) if not e.is_zero() else e for e in row]
        if all(q is not None for q in qs):
            return qs
    return row


def routh_conditions(coeffs: Sequence[Union[Polynomial, Number]]) -> List[Cmp]:
    return [Cmp(c, ">") for c in routh_first_column(coeffs)]


# ---------------------------------------------------------------------------
# complex split


def coefficients_in(p: Polynomial, v: int) -> Dict[int, Polynomial]:
    """``p`` as ``sum_k c_k * v^k`` with ``c_k`` free of ``v``."""
    acc: Dict[int, Dict] = {}
    for mono, c in p.terms:
        k = dict(mono).get(v, 0)
        rest = tuple((w, e) for w, e in mono if w != v)
        acc.setdefault(k, {})
        acc[k][rest] = acc[k].get(rest, 0) + c
    return {k: Polynomial(t) for k, t in acc.items()}


def complex_split(den: Polynomial, s: int, alpha: int, beta: int) -> Tuple[Polynomial, Polynomial]:
    """Real and imaginary parts of ``den`` at ``s = alpha + beta*i``."""
    cs = coefficients_in(den, s)
    a, b = Polynomial.var(alpha), Polynomial.var(beta)
    re_k, im_k = Polynomial.const(1), Polynomial()
    re, im = Polynomial(), Polynomial()
    for k in range(max(cs, default=0) + 1):
        if k in cs:
            re = re + cs[k] * re_k
            im = im + cs[k] * im_k
        re_k, im_k = re_k * a - im_k * b, re_k * b + im_k * a
    return re, im


def direct_stability_formula(den: Polynomial, s: int, alpha: int, beta: int):
    """``den(alpha + beta i) = 0 -> alpha < 0``.

    The root coordinates are unbounded in principle; callers must give
    ``alpha`` and ``beta`` boxes before solving, so the Routh route is
    preferred.
    """
    re, im = complex_split(den, s, alpha, beta)
    return Implies(conj([eq(re, 0), eq(im, 0)]), lt(Polynomial.var(alpha), 0))
