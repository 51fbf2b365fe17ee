"""Sparse multivariate polynomials with exact rational coefficients.

Variables are dense integer ids.  A monomial is a tuple of ``(var, exp)``
pairs sorted by variable id with every exponent >= 1; the empty tuple is the
constant monomial.  Polynomials are immutable and kept in canonical order,
so structural equality coincides with mathematical equality.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Callable, Dict, Iterable, Iterator, Mapping, Tuple, Union

Monomial = Tuple[Tuple[int, int], ...]
Number = Union[int, Fraction]

ONE_MONO: Monomial = ()


def as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    raise TypeError(f"cannot convert {value!r} to an exact rational")


def _mono_mul(a: Monomial, b: Monomial) -> Monomial:
    if not a:
        return b
    if not b:
        return a
    powers = dict(a)
    for v, e in b:
        powers[v] = powers.get(v, 0) + e
    return tuple(sorted(powers.items()))


def _mono_key(m: Monomial):
    # graded order: total degree first, then the power vector
    return (sum(e for _, e in m), m)


class Polynomial:
    """Immutable sparse polynomial ``sum coeff * prod var**exp``."""

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Mapping[Monomial, Number] | Iterable[Tuple[Monomial, Number]] = ()):
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: Dict[Monomial, Fraction] = {}
        for mono, c in items:
            c = as_fraction(c)
            if c:
                mono = tuple(sorted((v, e) for v, e in mono if e))
                acc[mono] = acc.get(mono, Fraction(0)) + c
        self._terms = tuple(sorted(((m, c) for m, c in acc.items() if c), key=lambda t: _mono_key(t[0])))
        self._hash = None

    # construction -----------------------------------------------------
    @classmethod
    def const(cls, c: Number) -> "Polynomial":
        return cls({ONE_MONO: c})

    @classmethod
    def var(cls, v: int) -> "Polynomial":
        return cls({((v, 1),): 1})

    @classmethod
    def _raw(cls, terms: Dict[Monomial, Fraction]) -> "Polynomial":
        p = cls.__new__(cls)
        p._terms = tuple(sorted(((m, c) for m, c in terms.items() if c), key=lambda t: _mono_key(t[0])))
        p._hash = None
        return p

    # inspection -------------------------------------------------------
    @property
    def terms(self) -> Tuple[Tuple[Monomial, Fraction], ...]:
        return self._terms

    def items(self) -> Iterator[Tuple[Monomial, Fraction]]:
        return iter(self._terms)

    def coeff(self, mono: Monomial) -> Fraction:
        for m, c in self._terms:
            if m == mono:
                return c
        return Fraction(0)

    @property
    def constant(self) -> Fraction:
        return self.coeff(ONE_MONO)

    def is_zero(self) -> bool:
        return not self._terms

    def is_constant(self) -> bool:
        return all(not m for m, _ in self._terms)

    def variables(self) -> frozenset:
        return frozenset(v for m, _ in self._terms for v, _ in m)

    def degree(self, v: int | None = None) -> int:
        if v is None:
            return max((sum(e for _, e in m) for m, _ in self._terms), default=0)
        return max((e for m, _ in self._terms for w, e in m if w == v), default=0)

    def degree_in(self, vs) -> int:
        """Largest total degree of any monomial restricted to ``vs``."""
        vs = set(vs)
        return max((sum(e for w, e in m if w in vs) for m, _ in self._terms), default=0)

    def without_constant(self) -> "Polynomial":
        return Polynomial._raw({m: c for m, c in self._terms if m})

    # arithmetic -------------------------------------------------------
    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            return other
        return Polynomial.const(other)

    def __add__(self, other) -> "Polynomial":
        other = self._coerce(other)
        acc = dict(self._terms)
        for m, c in other._terms:
            acc[m] = acc.get(m, Fraction(0)) + c
        return Polynomial._raw(acc)

    __radd__ = __add__

    def __neg__(self) -> "Polynomial":
        return Polynomial._raw({m: -c for m, c in self._terms})

    def __sub__(self, other) -> "Polynomial":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "Polynomial":
        return self._coerce(other) - self

    def scale(self, k: Number) -> "Polynomial":
        k = as_fraction(k)
        return Polynomial._raw({m: c * k for m, c in self._terms})

    def __mul__(self, other) -> "Polynomial":
        if not isinstance(other, Polynomial):
            return self.scale(other)
        acc: Dict[Monomial, Fraction] = {}
        for m1, c1 in self._terms:
            for m2, c2 in other._terms:
                m = _mono_mul(m1, m2)
                acc[m] = acc.get(m, Fraction(0)) + c1 * c2
        return Polynomial._raw(acc)

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "Polynomial":
        if n < 0:
            raise ValueError("negative power")
        result = Polynomial.const(1)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    # comparison / hashing -----------------------------------------------
    def __eq__(self, other) -> bool:
        if isinstance(other, Polynomial):
            return self._terms == other._terms
        if isinstance(other, (int, Fraction)) and not isinstance(other, bool):
            return self._terms == Polynomial.const(other)._terms
        return NotImplemented

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(self._terms)
        return self._hash

    def __repr__(self) -> str:
        return f"Polynomial({self.to_str()})"

    def to_str(self, names: Mapping[int, str] | None = None) -> str:
        if not self._terms:
            return "0"
        parts = []
        for m, c in self._terms:
            factors = []
            for v, e in m:
                n = names.get(v, f"v{v}") if names else f"v{v}"
                factors.append(n if e == 1 else f"{n}^{e}")
            body = "*".join(factors)
            if not body:
                parts.append(str(c))
            elif c == 1:
                parts.append(body)
            elif c == -1:
                parts.append("-" + body)
            else:
                parts.append(f"{c}*{body}")
        return " + ".join(parts).replace("+ -", "- ")

    # evaluation / composition -------------------------------------------
    def evaluate(self, point: Mapping[int, Number]) -> Fraction:
        total = Fraction(0)
        for m, c in self._terms:
            t = c
            for v, e in m:
                t *= as_fraction(point[v]) ** e
            total += t
        return total

    def eval_float(self, point: Mapping[int, float]) -> float:
        total = 0.0
        for m, c in self._terms:
            t = float(c)
            for v, e in m:
                t *= point[v] ** e
            total += t
        return total

    def substitute(self, values: Mapping[int, Number]) -> "Polynomial":
        """Replace the bound variables by constants."""
        if not values:
            return self
        acc: Dict[Monomial, Fraction] = {}
        for m, c in self._terms:
            rest = []
            for v, e in m:
                if v in values:
                    c = c * as_fraction(values[v]) ** e
                else:
                    rest.append((v, e))
            key = tuple(rest)
            acc[key] = acc.get(key, Fraction(0)) + c
        return Polynomial._raw(acc)

    def compose(self, maps: Mapping[int, "Polynomial"]) -> "Polynomial":
        """Substitute polynomials for variables."""
        result = Polynomial()
        cache: Dict[Tuple[int, int], Polynomial] = {}
        for m, c in self._terms:
            t = Polynomial.const(c)
            for v, e in m:
                if v in maps:
                    key = (v, e)
                    if key not in cache:
                        cache[key] = maps[v] ** e
                    t = t * cache[key]
                else:
                    t = t * Polynomial({((v, e),): 1})
            result = result + t
        return result

    def affine_compose(self, maps: Mapping[int, Tuple[Number, Number, int | None]]) -> "Polynomial":
        """Apply ``v -> scale*w + shift`` per variable.

        ``maps[v] = (scale, shift, w)``; ``w`` defaults to ``v`` itself.
        """
        polys = {}
        for v, spec in maps.items():
            scale, shift = spec[0], spec[1]
            w = spec[2] if len(spec) > 2 and spec[2] is not None else v
            polys[v] = Polynomial.var(w).scale(scale) + as_fraction(shift)
        return self.compose(polys)

    def derivative(self, v: int) -> "Polynomial":
        acc: Dict[Monomial, Fraction] = {}
        for m, c in self._terms:
            for i, (w, e) in enumerate(m):
                if w == v:
                    nm = m[:i] + (((w, e - 1),) if e > 1 else ()) + m[i + 1:]
                    acc[nm] = acc.get(nm, Fraction(0)) + c * e
        return Polynomial._raw(acc)

    def map_coeffs(self, fn: Callable[[Fraction], Fraction]) -> "Polynomial":
        return Polynomial._raw({m: fn(c) for m, c in self._terms})


def _lex_divides(a: Monomial, b: Monomial) -> Monomial | None:
    """Return ``b / a`` if the monomial ``a`` divides ``b``."""
    pb = dict(b)
    for v, e in a:
        if pb.get(v, 0) < e:
            return None
        pb[v] -= e
    return tuple(sorted((v, e) for v, e in pb.items() if e))


def divide_exact(p: Polynomial, q: Polynomial) -> Polynomial | None:
    """Exact multivariate division; ``None`` when ``q`` does not divide ``p``."""
    if q.is_zero():
        raise ZeroDivisionError("division by the zero polynomial")
    order = sorted(p.variables() | q.variables())

    def key(m: Monomial):
        d = dict(m)
        vec = tuple(d.get(v, 0) for v in order)
        return (sum(vec), vec)

    lm_q, lc_q = max(q.terms, key=lambda t: key(t[0]))
    quotient = Polynomial()
    rem = p
    while not rem.is_zero():
        lm_r, lc_r = max(rem.terms, key=lambda t: key(t[0]))
        m = _lex_divides(lm_q, lm_r)
        if m is None:
            return None
        t = Polynomial({m: lc_r / lc_q})
        quotient = quotient + t
        rem = rem - t * q
    return quotient
