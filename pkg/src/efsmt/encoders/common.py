"""Shared helpers for the encoders."""

from __future__ import annotations

from fractions import Fraction
from typing import Mapping

import sympy

from ..ir import IRError
from ..poly import Polynomial


class EncodingError(IRError):
    pass


def to_fraction(x) -> Fraction:
    r = sympy.Rational(x)
    return Fraction(int(r.p), int(r.q))


def sympy_to_poly(expr, symbols: Mapping[str, Polynomial]) -> Polynomial:
    """Exact conversion of a sympy polynomial expression over ``symbols``."""
    expr = sympy.sympify(expr)
    names = sorted(symbols)
    extra = {str(s) for s in expr.free_symbols} - set(names)
    if extra:
        raise EncodingError(f"unknown names {sorted(extra)}")
    if not names:
        return Polynomial.const(to_fraction(expr))
    try:
        poly = sympy.Poly(expr, *[sympy.Symbol(n) for n in names], domain="QQ")
    except sympy.PolynomialError as e:
        raise EncodingError(f"not a polynomial: {expr}") from e
    out = Polynomial()
    for exps, c in poly.terms():
        term = Polynomial.const(to_fraction(c))
        for name, e in zip(names, exps):
            if e:
                term = term * symbols[name] ** e
        out = out + term
    return out


def parse_poly(text: str, symbols: Mapping[str, Polynomial]) -> Polynomial:
    """Parse an infix polynomial over the given names; decimals are read exactly."""
    local = {n: sympy.Symbol(n) for n in symbols}
    try:
        expr = sympy.sympify(text, locals=local, rational=True)
    except (sympy.SympifyError, SyntaxError, TypeError) as e:
        raise EncodingError(f"cannot parse {text!r}") from e
    return sympy_to_poly(expr, symbols)


def poly_to_sympy(p: Polynomial, names: Mapping[int, str]):
    out = sympy.Integer(0)
    for mono, c in p.terms:
        term = sympy.Rational(c.numerator, c.denominator)
        for v, e in mono:
            term *= sympy.Symbol(names[v]) ** e
        out += term
    return out
