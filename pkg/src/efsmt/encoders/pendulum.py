"""Wheeled inverted pendulum under PD control, linearized at the upright position.

With ``x1`` the tilt angle, ``x2`` its rate and torque ``tau = kp x1 + kd x2``::

    (J2 + M2 l^2) x2' = M2 g l x1 - M2 l r tau / J1

The energy template is ``V = a x1^2 + b x2^2``.  Since ``D = J2 + M2 l^2``
and ``J1`` are positive, ``dV/dt`` has the sign of
``W = D J1 dV/dt = 2 a x1 x2 D J1 + 2 b x2 (M2 g l x1 J1 - M2 l r (kp x1 + kd x2))``.

The strict instance asks for ``V > 0 and W < 0`` on the punctured box
``0 < |(x1, x2)|, |x1| < xb1, |x2| < xb2`` for all masses and lengths; the
weak instance relaxes ``W < 0`` to ``W <= 0``.  ``W`` vanishes whenever
``x2 = 0``, so the strict instance is refuted by every state ``(k, 0)``
with ``0 < |k| < xb1``.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Mapping, Optional, Tuple

from ..backends.session import Sat, Unsat
from ..bernstein import BernsteinBackend
from ..ir import (
    EFProblem,
    Formula,
    Implies,
    Real,
    Value,
    Var,
    VarPool,
    conj,
    disj,
    gt,
    le,
    lt,
    negate_to_nnf,
    simplify,
    substitute,
)
from ..poly import Number, Polynomial, as_fraction
from .common import EncodingError

Box = Tuple[Number, Number]


@dataclass(frozen=True)
class PendulumParams:
    J1: Number = Fraction(1, 100)
    J2: Number = Fraction(1, 50)
    g: Number = Fraction(981, 100)
    r: Number = Fraction(1, 25)
    M2: Box = (Fraction(1, 2), 1)
    l: Box = (Fraction(1, 10), Fraction(1, 5))
    state: Box = (-1, 1)
    radius: Box = (0, 1)
    gains: Box = (-100, 100)
    energy: Box = (0, 10)


@dataclass
class PendulumEncoding:
    params: PendulumParams
    strict: bool
    problem: EFProblem
    exists: Dict[str, Var]
    forall: Dict[str, Var]
    V: Polynomial
    W: Polynomial

    def witness(self, **values: Number) -> Dict[int, Fraction]:
        return {self.exists[n].id: as_fraction(x) for n, x in values.items()}

    def decode(self, w: Mapping[int, Value]) -> Dict[str, Fraction]:
        return {n: w[v.id] for n, v in self.exists.items() if v.id in w}


def encode_pendulum(params: PendulumParams = PendulumParams(), strict: bool = True) -> PendulumEncoding:
    P = params
    J1, J2, g, r = (as_fraction(x) for x in (P.J1, P.J2, P.g, P.r))
    if J1 <= 0 or J2 <= 0:
        raise EncodingError("inertias must be positive")
    if as_fraction(P.M2[0]) <= 0 or as_fraction(P.l[0]) <= 0:
        raise EncodingError("mass and length boxes must be positive")
    pool = VarPool()
    ex = {
        "xb1": pool.exists_var("xb1", Real(*P.radius)),
        "xb2": pool.exists_var("xb2", Real(*P.radius)),
        "kp": pool.exists_var("kp", Real(*P.gains)),
        "kd": pool.exists_var("kd", Real(*P.gains)),
        "a": pool.exists_var("a", Real(*P.energy)),
        "b": pool.exists_var("b", Real(*P.energy)),
    }
    fa = {
        "x1": pool.forall_var("x1", Real(*P.state)),
        "x2": pool.forall_var("x2", Real(*P.state)),
        "M2": pool.forall_var("M2", Real(*P.M2)),
        "l": pool.forall_var("l", Real(*P.l)),
    }
    xb1, xb2, kp, kd, a, b = (ex[n].poly for n in ("xb1", "xb2", "kp", "kd", "a", "b"))
    x1, x2, M2, l = (fa[n].poly for n in ("x1", "x2", "M2", "l"))
    D = M2 * l * l + J2
    V = a * x1 * x1 + b * x2 * x2
    W = a * x1 * x2 * D * (2 * J1) + b * x2 * (M2 * l * x1 * (g * J1) - M2 * l * (kp * x1 + kd * x2) * r) * 2
    cond = [gt(xb1, 0), gt(xb2, 0), gt(a, 0), gt(b, 0)]
    inside = conj(
        [
            lt(-xb1, x1),
            lt(x1, xb1),
            lt(-xb2, x2),
            lt(x2, xb2),
            disj([lt(x1, 0), gt(x1, 0), lt(x2, 0), gt(x2, 0)]),
        ]
    )
    decay = lt(W, 0) if strict else le(W, 0)
    matrix = conj(cond + [Implies(inside, conj([gt(V, 0), decay]))])
    return PendulumEncoding(P, strict, pool.problem(matrix), ex, fa, V, W)


def pendulum_preset(params: PendulumParams = PendulumParams()) -> Dict[str, PendulumEncoding]:
    return {"strict": encode_pendulum(params, True), "weak": encode_pendulum(params, False)}


def dynamics(P: PendulumParams, values: Mapping[str, float], M2: float, l: float, x: Tuple[float, float]):
    """Closed-loop vector field ``(x1', x2')`` in floating point."""
    J1, J2, g, r = (float(as_fraction(v)) for v in (P.J1, P.J2, P.g, P.r))
    tau = float(values["kp"]) * x[0] + float(values["kd"]) * x[1]
    D = J2 + M2 * l * l
    return x[1], (M2 * g * l * x[0] - M2 * l * r * tau / J1) / D


def vdot(enc: PendulumEncoding, values: Mapping[str, Number], M2: Number, l: Number, x1: Number, x2: Number) -> Fraction:
    """Exact ``dV/dt`` from the encoded ``W``."""
    P = enc.params
    D = as_fraction(P.J2) + as_fraction(M2) * as_fraction(l) ** 2
    point = {enc.exists[n].id: as_fraction(v) for n, v in values.items()}
    point.update(
        {
            enc.forall["x1"].id: as_fraction(x1),
            enc.forall["x2"].id: as_fraction(x2),
            enc.forall["M2"].id: as_fraction(M2),
            enc.forall["l"].id: as_fraction(l),
        }
    )
    return enc.W.evaluate(point) / (D * as_fraction(P.J1))


def refutable_at(
    enc: PendulumEncoding, values: Mapping[str, Number], x1: Number, x2: Number = 0
) -> Optional[bool]:
    """Whether the negated matrix has a model with the state fixed at ``(x1, x2)``.

    None when the Bernstein check over the mass and length boxes is undecided.
    """
    fixed = {enc.exists[n].id: as_fraction(v) for n, v in values.items()}
    fixed[enc.forall["x1"].id] = as_fraction(x1)
    fixed[enc.forall["x2"].id] = as_fraction(x2)
    neg: Formula = simplify(substitute(negate_to_nnf(enc.problem.matrix), fixed))
    rest = [enc.forall["M2"], enc.forall["l"]]
    res = BernsteinBackend().check([neg], rest)
    if isinstance(res, Sat):
        return True
    if isinstance(res, Unsat):
        return False
    return None


def random_candidate(enc: PendulumEncoding, rng: random.Random) -> Dict[str, Fraction]:
    """Random exists assignment satisfying the positivity conditions."""
    out = {}
    for n, v in enc.exists.items():
        lo, hi = v.sort.interval.lo, v.sort.interval.hi
        x = lo + (hi - lo) * Fraction(rng.randrange(1, 1024), 1024)
        out[n] = x
    return out
