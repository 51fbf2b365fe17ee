"""Bernstein enclosure, subdivision and verdicts; discretization, strengthening and Routh arrays."""

import random
from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from efsmt.bernstein import (
    BernsteinBackend,
    Proved,
    Refuted,
    Undecided,
    check_ag,
    check_atom,
    normalize_box,
    subdivide,
    to_bernstein,
)
from efsmt.backends.session import Sat, Unsat
from efsmt.encoders.bibo import stable_numeric
from efsmt.ir import Cmp, EFProblem, Fixed, Real, Rule, Var, gt
from efsmt.poly import Polynomial
from efsmt.transforms import (
    DegenerateRouth,
    StrengthenError,
    complex_split,
    discretize,
    routh_first_column,
    strengthen,
)

X, Y = Polynomial.var(0), Polynomial.var(1)


def bernstein_by_reexpansion(coeffs_t, degree):
    """Solve ``sum b_i C(n,i) t^i (1-t)^(n-i) = p(t)`` symbolically for ``b``."""
    t = sympy.Symbol("t")
    bs = sympy.symbols(f"b0:{degree + 1}")
    basis = sum(b * sympy.binomial(degree, i) * t**i * (1 - t) ** (degree - i) for i, b in enumerate(bs))
    target = sum(sympy.Rational(c) * t**k for k, c in enumerate(coeffs_t))
    eqs = sympy.Poly(sympy.expand(basis - target), t).all_coeffs()
    sol = sympy.solve(eqs, bs, dict=True)[0]
    return [Fraction(str(sol[b])) for b in bs]


def test_worked_bernstein_example():
    atom = Cmp(X * X - X * 4 + 4, ">", Fraction(-3))
    box = {0: (1, 3)}
    verdict = check_atom(atom, box)
    assert isinstance(verdict, Proved) and verdict.depth == 0
    t = to_bernstein(normalize_box(X * X - X * 4 + 4, box))
    # on [1,3] with x = 1 + 2t: 4t^2 - 4t + 1
    assert list(t.coeffs) == bernstein_by_reexpansion([1, -4, 4], 2) == [1, -1, 1]


poly_coeffs = st.lists(st.integers(-9, 9), min_size=1, max_size=6)


@settings(max_examples=200)
@given(poly_coeffs, st.integers(-4, 4), st.integers(1, 4))
def test_enclosure_univariate(cs, lo, width):
    p = Polynomial.const(0)
    for k, c in enumerate(cs):
        p = p + X**k * c
    box = {0: (Fraction(lo), Fraction(lo + width))}
    t = to_bernstein(normalize_box(p, box), degrees=[max(len(cs) - 1, 0)], vars=[0])
    rng = random.Random(len(cs) * 31 + lo)
    for _ in range(100):
        x = Fraction(lo) + Fraction(width) * Fraction(rng.randrange(0, 1001), 1000)
        assert t.lower <= p.evaluate({0: x}) <= t.upper
    # endpoint coefficients are exact
    assert t.coeffs[0] == p.evaluate({0: Fraction(lo)})
    assert t.coeffs[-1] == p.evaluate({0: Fraction(lo + width)})


@settings(max_examples=100)
@given(poly_coeffs, poly_coeffs)
def test_enclosure_bivariate(a, b):
    p = Polynomial.const(0)
    for k, c in enumerate(a):
        p = p + X**k * c
    for k, c in enumerate(b):
        p = p + X * Y**k * c
    box = {0: (Fraction(-1), Fraction(2)), 1: (Fraction(0), Fraction(1))}
    t = to_bernstein(normalize_box(p, box), vars=[0, 1], degrees=[max(p.degree(0), 1), max(p.degree(1), 1)])
    rng = random.Random(7)
    for _ in range(100):
        pt = {0: Fraction(rng.randrange(-1000, 2001), 1000), 1: Fraction(rng.randrange(0, 1001), 1000)}
        assert t.lower <= p.evaluate(pt) <= t.upper


@settings(max_examples=100)
@given(poly_coeffs, st.fractions(Fraction(1, 8), Fraction(7, 8)))
def test_subdivision_matches_direct_conversion(cs, at):
    p = Polynomial.const(0)
    for k, c in enumerate(cs):
        p = p + X**k * c
    d = max(len(cs) - 1, 0)
    t = to_bernstein(p, degrees=[d], vars=[0])
    left, right = subdivide(t, 0, at)
    direct_left = to_bernstein(normalize_box(p, {0: (Fraction(0), at)}), degrees=[d], vars=[0])
    direct_right = to_bernstein(normalize_box(p, {0: (at, Fraction(1))}), degrees=[d], vars=[0])
    assert list(left.coeffs) == list(direct_left.coeffs)
    assert list(right.coeffs) == list(direct_right.coeffs)


def test_refutation_gives_exact_counterexample():
    v = check_atom(Cmp(X * X - 2, ">"), {0: (0, 2)})
    assert isinstance(v, Refuted)
    assert not (v.witness[0] ** 2 - 2 > 0)


def test_depth_exhaustion_is_undecided():
    # x^2 >= 0 touches zero inside the box only at the midpoint
    v = check_atom(Cmp((X - Fraction(1, 3)) ** 2, ">"), {0: (0, 1)}, max_depth=3)
    assert isinstance(v, (Undecided, Refuted))
    v = check_atom(Cmp((X - Fraction(1, 3)) ** 2 + Fraction(1, 10**6), ">"), {0: (0, 1)}, max_depth=2)
    assert isinstance(v, Undecided)


def test_assumptions_restrict_the_box():
    rule = Rule((Cmp(X, ">", Fraction(1)),), Cmp(X * X, ">", Fraction(1, 2)))
    assert isinstance(check_ag([rule], {0: (-2, 2)}), Proved)
    # touching boundaries (x = 1 makes both sides false) stay undecided
    tight = Rule((Cmp(X, ">", Fraction(1)),), Cmp(X * X, ">", Fraction(1)))
    assert isinstance(check_ag([tight], {0: (-2, 2)}, max_depth=6), Undecided)
    bad = Rule((Cmp(X, ">", Fraction(1, 2)),), Cmp(X * X, ">", Fraction(1)))
    assert isinstance(check_ag([bad], {0: (-2, 2)}), Refuted)


def test_bernstein_backend_session_semantics():
    x = Var(0, "x", Real(-1, 1))
    assert isinstance(BernsteinBackend().check([Cmp(X * X, "<", Fraction(-1))], [x]), Unsat)
    res = BernsteinBackend().check([Cmp(X * X, ">", Fraction(1, 2))], [x])
    assert isinstance(res, Sat) and res.model[0] ** 2 > Fraction(1, 2)


# -- transforms --------------------------------------------------------------------


def test_discretize_replaces_real_sorts():
    x, y = Var(0, "x", Real(0, 1)), Var(1, "y", Real(0, 1))
    p = discretize(EFProblem((x,), (y,), gt(X, Y)), Fraction(1, 4), "forall")
    assert p.exists_vars[0].sort == Real(0, 1)
    assert p.forall_vars[0].sort == Fixed(0, 1, Fraction(1, 4))


def test_strengthen_direction():
    rep = strengthen(Cmp(Y - X, ">="), {1: (0, 1)}, Fraction(1, 4), {0: (0, 1)})
    assert rep.shifts == {1: Fraction(-1, 4)}
    rep = strengthen(Cmp(Y - X, ">="), {1: (0, 1)}, Fraction(1, 4), {0: (0, 1)}, polarity="negative")
    assert rep.shifts == {1: Fraction(1, 4)}
    with pytest.raises(StrengthenError):
        strengthen(Cmp(Y * Y - Fraction(1, 4), ">"), {1: (-1, 1)}, Fraction(1, 4))


@settings(max_examples=100)
@given(st.integers(0, 3), st.integers(0, 3), st.integers(-3, 3), st.sampled_from([1, -1]), st.sampled_from([">", ">="]))
def test_grid_validity_of_strengthened_atom_implies_continuous_validity(c2, c1, c0, sign, op):
    # g(y) = sign (c2 y^2 + c1 y) + c0 + x is monotone in y on [0, 2]; y lives on a 1/4 grid
    g = (Y * Y * c2 + Y * c1) * sign + c0 + X
    try:
        rep = strengthen(Cmp(g, op), {1: (0, 2)}, Fraction(1, 4), {0: (-20, 20)})
    except StrengthenError:
        # refusing is sound; y^2 is not monotone once the box is widened below 0
        assert c2 and sign == 1
        return
    shifted = rep.strengthened.lhs_minus_rhs - X
    grid = [Fraction(k, 4) for k in range(9)]
    # the least x for which the strengthened atom holds on every grid point
    a = -min(shifted.evaluate({1: y}) for y in grid) + (Fraction(1, 10**6) if op == ">" else 0)
    assert all(rep.strengthened.holds({0: a, 1: y}) for y in grid)
    rng = random.Random(c2 * 100 + c1 * 10 + c0)
    for _ in range(200):
        y = Fraction(rng.randrange(0, 2001), 1000)
        assert rep.original.holds({0: a, 1: y})


def test_routh_degree_two_is_coefficient_list():
    a, b, c = Polynomial.var(0), Polynomial.var(1), Polynomial.var(2)
    assert routh_first_column([a, b, c]) == [a, b, c]


def test_routh_zero_pivot():
    assert routh_first_column([1, 0, 1])[-1].is_zero()
    with pytest.raises(DegenerateRouth):
        routh_first_column([1, 0, 1], zero_pivot="error")


def test_routh_against_numeric_roots():
    rng = random.Random(2024)
    checked = 0
    while checked < 100:
        deg = rng.randint(1, 5)
        cs = [rng.randint(1, 9)] + [rng.randint(-3, 9) for _ in range(deg)]
        truth = stable_numeric(cs)
        if truth is None:
            continue
        col = routh_first_column(cs)
        assert all(c.constant > 0 for c in col) == truth, cs
        checked += 1


def test_complex_split():
    # s^2 + 1 at s = a + b i: (a^2 - b^2 + 1) + (2ab) i
    s, a, b = Polynomial.var(0), Polynomial.var(1), Polynomial.var(2)
    re, im = complex_split(s * s + 1, 0, 1, 2)
    assert re == a * a - b * b + 1 and im == a * b * 2
    pt = {1: Fraction(0), 2: Fraction(1)}
    assert re.evaluate(pt) == 0 and im.evaluate(pt) == 0


def test_numeric_stability_oracle():
    assert stable_numeric([1, 3, 2]) is True
    assert stable_numeric([1, -1, 2]) is False
    assert stable_numeric([1, 0, 1]) is None
    assert np.isclose(sorted(np.roots([1, 3, 2]).real)[0], -2)
