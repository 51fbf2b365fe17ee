"""BIBO stability of a closed loop from its characteristic denominator.

The denominator is given by its coefficients, highest degree first.  Each
coefficient is a number, a string over the declared parameter names (parsed
exactly with sympy) or a callable taking the name -> Polynomial map.
Controllable parameters are existential and environment parameters are
universal; the matrix is the Routh first-column positivity condition.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, List, Mapping, Sequence, Tuple, Union

import numpy as np

from ..ir import Cmp, EFProblem, Real, Value, Var, VarPool, conj
from ..poly import Number, Polynomial, as_fraction
from ..transforms import routh_first_column
from .common import EncodingError, parse_poly

Coefficient = Union[Number, str, Polynomial, Callable[[Mapping[str, Polynomial]], Polynomial]]
Box = Tuple[Number, Number]


def parse_coefficient(c: Coefficient, symbols: Mapping[str, Polynomial]) -> Polynomial:
    if isinstance(c, Polynomial):
        return c
    if callable(c):
        return c(symbols)
    if isinstance(c, str):
        return parse_poly(c, symbols)
    return Polynomial.const(as_fraction(c))


@dataclass
class BiboEncoding:
    problem: EFProblem
    ctrl: Dict[str, Var]
    env: Dict[str, Var]
    coefficients: List[Polynomial]
    column: List[Polynomial]

    def decode(self, w: Mapping[int, Value]) -> Dict[str, Fraction]:
        return {n: w[v.id] for n, v in self.ctrl.items() if v.id in w}

    def witness(self, **values: Number) -> Dict[int, Fraction]:
        return {self.ctrl[n].id: as_fraction(x) for n, x in values.items()}


def encode_bibo(
    coefficients: Sequence[Coefficient],
    ctrl: Mapping[str, Box],
    env: Mapping[str, Box] | None = None,
) -> BiboEncoding:
    env = dict(env or {})
    clash = set(ctrl) & set(env)
    if clash:
        raise EncodingError(f"names declared twice: {sorted(clash)}")
    pool = VarPool()
    cv = {n: pool.exists_var(n, Real(lo, hi)) for n, (lo, hi) in ctrl.items()}
    ev = {n: pool.forall_var(n, Real(lo, hi)) for n, (lo, hi) in env.items()}
    symbols = {n: v.poly for n, v in {**cv, **ev}.items()}
    coeffs = [parse_coefficient(c, symbols) for c in coefficients]
    column = routh_first_column(coeffs)
    matrix = conj(Cmp(c, ">") for c in column)
    return BiboEncoding(pool.problem(matrix), cv, ev, coeffs, column)


def cruise_control(mass: Box = (600, 1200), gains: Box = (-100, 100)) -> BiboEncoding:
    """Closed loop of a PI cruise controller without friction: ``m s^2 + kp s + ki``."""
    return encode_bibo(["m", "kp", "ki"], {"kp": gains, "ki": gains}, {"m": mass})


def stable_numeric(coefficients: Sequence[Number], margin: float = 1e-6):
    """Numeric root oracle: True/False, or None when a root is within ``margin`` of the axis."""
    roots = np.roots([float(c) if isinstance(c, float) else float(as_fraction(c)) for c in coefficients])
    if any(abs(r.real) < margin for r in roots):
        return None
    return bool(all(r.real < 0 for r in roots))
