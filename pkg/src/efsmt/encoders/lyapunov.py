"""Lyapunov certificates for scalar rational dynamics ``dz/dt = N(z)/D(z)``.

The energy template ``V`` is a polynomial in ``z`` and parameters.  The
derivative ``dV/dt = V'(z) N(z) / D(z)`` is cleared of its denominator: by
``D`` when ``D`` has a certified sign on the box, otherwise by ``D^2``, which
is exact wherever the dynamics are defined.  Either way the condition
becomes ``g(params, z) >= 0`` with ``g`` polynomial.

Two routes are provided.  ``"bernstein"`` emits a single assume-guarantee
rule ``-r < z < r -> g >= 0`` over real sorts.  ``"strengthenedBV"``
requires ``g = c(params) * q(z)``, splits on the sign of ``c`` and replaces
``q >= 0`` (or ``q <= 0``) by a union of intervals between real roots of
``q``.  Every interval atom is shifted by one grid step with
:func:`efsmt.transforms.strengthen` so that the grid problem implies the
continuous one.  :func:`lyapunov_bv_literal` gives the literal shifted
system for the running example verbatim, for comparison.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import sympy

from ..bernstein import Proved, check_atom
from ..ir import (
    Cmp,
    EFProblem,
    Fixed,
    Implies,
    Real,
    Value,
    Var,
    VarPool,
    conj,
    disj,
    ge,
    gt,
    le,
    lt,
)
from ..poly import Number, Polynomial, as_fraction, divide_exact
from ..transforms import coefficients_in, strengthen
from .common import EncodingError, parse_poly, poly_to_sympy, to_fraction

Box = Tuple[Number, Number]
MODES = ("bernstein", "strengthenedBV")


@dataclass(frozen=True)
class LyapunovSystem:
    """Scalar dynamics and an energy template, all as text over ``z`` and ``params``."""

    numerator: str
    denominator: str
    template: str
    params: Dict[str, Box]
    radius: Box = (0, 10)
    z_box: Box = (-5, 5)


@dataclass
class LyapunovEncoding:
    system: LyapunovSystem
    mode: str
    problem: EFProblem
    params: Dict[str, Var]
    r: Var
    z: Var
    guarantee: Polynomial  # g with dV/dt <= 0  <=>  g >= 0
    positivity: List[Cmp]
    multiplier: str  # "D", "-D" or "D^2"
    notes: List[str] = field(default_factory=list)

    def witness(self, **values: Number) -> Dict[int, Fraction]:
        out = {self.params[n].id: as_fraction(x) for n, x in values.items() if n in self.params}
        if "r" in values:
            out[self.r.id] = as_fraction(values["r"])
        return out

    def decode(self, w: Mapping[int, Value]) -> Dict[str, Fraction]:
        out = {n: w[v.id] for n, v in self.params.items() if v.id in w}
        if self.r.id in w:
            out["r"] = w[self.r.id]
        return out


def _sign(p: Polynomial, box, depth: int = 12) -> Optional[int]:
    if isinstance(check_atom(Cmp(p, ">"), box, depth), Proved):
        return 1
    if isinstance(check_atom(Cmp(p, "<"), box, depth), Proved):
        return -1
    return None


def derivative_condition(
    numerator: Polynomial, denominator: Polynomial, template: Polynomial, z: int, box, strict_denominator: bool = False
) -> Tuple[Polynomial, str]:
    """``g`` with ``dV/dt <= 0`` iff ``g >= 0`` wherever ``D != 0``, and the multiplier used."""
    vdot = template.derivative(z) * numerator
    sign = _sign(denominator, box)
    if sign == 1:
        return -vdot, "D"
    if sign == -1:
        return vdot, "-D"
    if strict_denominator:
        lo, hi = box[z]
        raise EncodingError(f"denominator has no certified sign on z in [{lo}, {hi}]")
    return -(vdot * denominator), "D^2"


def positivity_conditions(template: Polynomial, z: int, params: Sequence[int]) -> List[Cmp]:
    """Conditions on parameters making ``V > 0`` for ``z != 0``.

    Supported shape: ``c(params) * z^(2k)`` with ``k >= 1``.
    """
    cs = coefficients_in(template, z)
    if len(cs) != 1:
        raise EncodingError("template must be a single even power of z times a parameter factor")
    (k, c), = cs.items()
    if k == 0 or k % 2:
        raise EncodingError("template must be a single even power of z times a parameter factor")
    return [Cmp(c, ">")]


def split_factor(g: Polynomial, z: int) -> Tuple[Polynomial, Polynomial]:
    """Write ``g = c(params) * q(z)``; raises when ``g`` does not factor that way."""
    cs = coefficients_in(g, z)
    lead = cs[max(cs)]
    q = Polynomial()
    for k, ck in cs.items():
        ratio = divide_exact(ck, lead)
        if ratio is None or not ratio.is_constant():
            raise EncodingError("guarantee does not factor as parameter part times z part")
        q = q + Polynomial.var(z) ** k * ratio.constant
    return lead, q


def sign_intervals(q: Polynomial, z: int, lo: Fraction, hi: Fraction, want: int) -> List[Tuple[Fraction, Fraction]]:
    """Closed rational intervals inside ``[lo, hi]`` where ``want * q >= 0``.

    Adjacent pieces are merged across shared roots.  Irrational roots are
    replaced by the inner end of an isolating interval, so the result is a
    subset of the true region; isolated roots are dropped.
    """
    zs = sympy.Symbol("z")
    expr = poly_to_sympy(q, {z: "z"})
    if expr == 0:
        return [(lo, hi)]
    poly = sympy.Poly(expr, zs)
    roots: List[Tuple[Fraction, Fraction]] = []
    for (a, b), _ in poly.intervals(eps=Fraction(1, 2**20)):
        a, b = to_fraction(a), to_fraction(b)
        if b > lo and a < hi:
            roots.append((a, b))
    roots.sort()
    # gaps between consecutive roots, bounded by the box
    cuts = [(lo, lo)] + roots + [(hi, hi)]
    pieces: List[Tuple[Fraction, Fraction]] = []
    for (a0, b0), (a1, b1) in zip(cuts, cuts[1:]):
        left, right = max(b0, lo), min(a1, hi)
        if left >= right:
            continue
        mid = (left + right) / 2
        if want * q.evaluate({z: mid}) > 0:
            pieces.append((left, right))
    merged: List[Tuple[Fraction, Fraction]] = []
    for a, b in pieces:
        if merged and merged[-1][1] == a:
            # the pieces meet at a rational root, which also satisfies q = 0
            merged[-1] = (merged[-1][0], b)
        else:
            merged.append((a, b))
    return merged


def _interval_atoms(zp: Polynomial, a: Fraction, b: Fraction, lo: Fraction, hi: Fraction) -> List[Cmp]:
    atoms = []
    if a > lo:
        atoms.append(ge(zp, a))
    if b < hi:
        atoms.append(le(zp, b))
    return atoms


def encode_lyapunov(
    system: LyapunovSystem,
    mode: str = "bernstein",
    step: Number = Fraction(1, 32),
    strict_denominator: bool = False,
) -> LyapunovEncoding:
    if mode not in MODES:
        raise EncodingError(f"unknown mode {mode!r}; expected one of {MODES}")
    step = as_fraction(step)
    pool = VarPool()
    zlo, zhi = (as_fraction(x) for x in system.z_box)
    rlo, rhi = (as_fraction(x) for x in system.radius)
    if mode == "bernstein":
        params = {n: pool.exists_var(n, Real(lo, hi)) for n, (lo, hi) in system.params.items()}
        r = pool.exists_var("r", Real(rlo, rhi))
        z = pool.forall_var("z", Real(zlo, zhi))
    else:
        params = {n: pool.exists_var(n, Fixed(lo, hi, step)) for n, (lo, hi) in system.params.items()}
        r = pool.exists_var("r", Fixed(rlo, rhi, step))
        z = pool.forall_var("z", Fixed(zlo, zhi, step))
    if "z" in params or "r" in params:
        raise EncodingError("parameter names z and r are reserved")
    symbols = {**{n: v.poly for n, v in params.items()}, "z": z.poly}
    num = parse_poly(system.numerator, symbols)
    den = parse_poly(system.denominator, symbols)
    tmpl = parse_poly(system.template, symbols)
    for name, p in (("numerator", num), ("denominator", den)):
        if p.variables() - {z.id}:
            raise EncodingError(f"{name} must depend on z only")
    box = {z.id: (zlo, zhi)}
    g, mult = derivative_condition(num, den, tmpl, z.id, box, strict_denominator)
    positive = positivity_conditions(tmpl, z.id, [v.id for v in params.values()])
    notes = []
    if mult == "D^2":
        notes.append(f"denominator changes sign on z in [{zlo}, {zhi}]; cleared by its square")
    cond = positive + [gt(r.poly, 0)]
    zp, rp = z.poly, r.poly
    if mode == "bernstein":
        rule = Implies(conj([lt(-rp, zp), lt(zp, rp)]), ge(g, 0))
        matrix = conj(cond + [rule])
    else:
        c, q = split_factor(g, z.id)
        pbox = {v.id: (v.sort.interval.lo, v.sort.interval.hi) for v in [*params.values(), r]}
        universal = {z.id: (zlo, zhi)}

        def tighten(a: Cmp, polarity: str) -> Cmp:
            return strengthen(a, universal, step, pbox, polarity=polarity).strengthened

        assume = [tighten(lt(-rp, zp), "negative"), tighten(lt(zp, rp), "negative")]
        branches = []
        for want, guard in ((1, ge(c, 0)), (-1, lt(c, 0))):
            pieces = sign_intervals(q, z.id, zlo, zhi, want)
            region = disj(conj(tighten(a, "positive") for a in _interval_atoms(zp, a, b, zlo, zhi)) for a, b in pieces)
            branches.append(Implies(guard, region))
        matrix = conj(cond + [Implies(conj(assume), conj(branches))])
    problem = pool.problem(matrix)
    return LyapunovEncoding(system, mode, problem, params, r, z, g, positive, mult, notes)


def paper_system() -> LyapunovSystem:
    """``dz/dt = 2/(2+z) - z - 1`` with ``V = a z^2``; the equilibrium is shifted to 0."""
    return LyapunovSystem(numerator="-z**2 - 3*z", denominator="2 + z", template="a*z**2", params={"a": (0, 10)})


def paper_system_bv() -> LyapunovSystem:
    """Grid variant: wider ``z`` box and an ``a`` box that contains 32."""
    return LyapunovSystem(
        numerator="-z**2 - 3*z", denominator="2 + z", template="a*z**2", params={"a": (0, 40)}, z_box=(-10, 10)
    )


def lyapunov_bv_literal(step: Number = Fraction(1, 32), a_box: Box = (0, 10), r_box: Box = (0, 10)) -> LyapunovEncoding:
    """The literal shifted grid system for the running example, term by term.

    ``a, r`` range over ``a_box, r_box`` and ``z`` over ``[-10, 10]``, all
    with grid ``step``::

        (z + s > -r and z - s < r) ->
            ((2a >= 0 -> (z - s >= 0 or (z - s >= -2 and z + s <= 0)))
             and (2a < 0 -> z + s <= -3))
    """
    s = as_fraction(step)
    pool = VarPool()
    a = pool.exists_var("a", Fixed(a_box[0], a_box[1], s))
    r = pool.exists_var("r", Fixed(r_box[0], r_box[1], s))
    z = pool.forall_var("z", Fixed(-10, 10, s))
    ap, rp, zp = a.poly, r.poly, z.poly
    matrix = Implies(
        conj([gt(zp + s, -rp), lt(zp - s, rp)]),
        conj(
            [
                Implies(ge(ap * 2, 0), disj([ge(zp - s, 0), conj([ge(zp - s, -2), le(zp + s, 0)])])),
                Implies(lt(ap * 2, 0), le(zp + s, -3)),
            ]
        ),
    )
    g = (ap * 2) * zp**2 * (zp + 2) * (zp + 3)
    sys = LyapunovSystem("-z**2 - 3*z", "2 + z", "a*z**2", {"a": a_box}, r_box, (-10, 10))
    return LyapunovEncoding(sys, "strengthenedBV", pool.problem(matrix), {"a": a}, r, z, g, [], "D^2")


def sampled_check(enc: LyapunovEncoding, values: Mapping[str, Number], samples: int = 10_000, seed: int = 0) -> bool:
    """``V > 0`` and ``g >= 0`` at random points with ``0 < |z| < r`` (the sampled domain oracle)."""
    rng = random.Random(seed)
    w = enc.witness(**values)
    r = w[enc.r.id]
    zlo, zhi = enc.z.sort.interval.lo, enc.z.sort.interval.hi
    lo, hi = max(-r, zlo), min(r, zhi)
    if lo >= hi:
        return True
    symbols = {**{n: v.poly for n, v in enc.params.items()}, "z": enc.z.poly}
    tmpl = parse_poly(enc.system.template, symbols)
    den = parse_poly(enc.system.denominator, symbols)
    for _ in range(samples):
        zv = lo + (hi - lo) * Fraction(rng.randrange(1, 2**16), 2**16)
        if zv == 0 or den.evaluate({enc.z.id: zv}) == 0:
            continue
        point = {**w, enc.z.id: zv}
        if tmpl.evaluate(point) <= 0 or enc.guarantee.evaluate(point) < 0:
            return False
    return True
