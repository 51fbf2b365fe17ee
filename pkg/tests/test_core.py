"""Polynomials, formulas, sorts and the problem file format."""

import glob
import os
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from efsmt.fileformat import ParseError, document_from_problem, parse, print_document
from efsmt.ir import (
    FALSE,
    TRUE,
    BoolVar,
    Cmp,
    EFProblem,
    Fixed,
    Implies,
    Int,
    IRError,
    Not,
    NotAGForm,
    Real,
    Var,
    ag_rules,
    conj,
    disj,
    evaluate,
    gt,
    linearizable,
    lt,
    negate_to_nnf,
    simplify,
    substitute,
)
from efsmt.poly import Polynomial, as_fraction
from efsmt.sexp import SexpError, parse_all

from helpers import formulas

ROOT = os.path.dirname(os.path.dirname(__file__))
X, Y = Polynomial.var(0), Polynomial.var(1)


# -- polynomials -------------------------------------------------------------


def test_polynomial_canonical_equality():
    assert (X + Y) * (X - Y) == X * X - Y * Y
    assert (X + 1) ** 2 == X * X + X * 2 + 1
    assert (X - X).is_zero


def test_polynomial_evaluate_and_substitute():
    p = X * X * 3 - Y + Fraction(1, 2)
    assert p.evaluate({0: 2, 1: 1}) == Fraction(23, 2)
    assert p.substitute({0: Fraction(1, 3)}) == -Y + Fraction(5, 6)


def test_polynomial_derivative():
    p = X ** 3 * Y + X * 2
    assert p.derivative(0) == X * X * Y * 3 + 2
    assert p.derivative(1) == X ** 3


def test_as_fraction_rejects_floats_and_bools():
    assert as_fraction("3/4") == Fraction(3, 4)
    with pytest.raises(TypeError):
        as_fraction(0.5)
    with pytest.raises(TypeError):
        as_fraction(True)


@given(st.lists(st.integers(-5, 5), min_size=3, max_size=3), st.fractions(-3, 3), st.fractions(-3, 3))
def test_polynomial_ring_laws(cs, a, b):
    p = X * cs[0] + Y * cs[1] + cs[2]
    q = X * Y - X + 1
    pt = {0: a, 1: b}
    assert (p * q).evaluate(pt) == p.evaluate(pt) * q.evaluate(pt)
    assert (p + q).evaluate(pt) == p.evaluate(pt) + q.evaluate(pt)


# -- sorts and formulas ------------------------------------------------------


def test_sort_domains():
    assert Int(-1, 2).values() == [-1, 0, 1, 2]
    assert Fixed(0, 1, Fraction(1, 4)).values() == [Fraction(k, 4) for k in range(5)]
    assert Real(0, 1).contains(Fraction(1, 3))
    assert not Fixed(0, 1, Fraction(1, 4)).contains(Fraction(1, 3))


def test_bad_sorts_are_rejected():
    with pytest.raises(IRError):
        Real(2, 1)
    with pytest.raises(IRError):
        Fixed(0, 1, 0)


def test_constant_comparisons_fold():
    assert simplify(gt(Polynomial.const(1), 0)) is TRUE
    assert simplify(lt(Polynomial.const(1), 0)) is FALSE
    f = conj([gt(X, 0), lt(Y, 1)])
    assert simplify(substitute(f, {0: 1, 1: 0})) is TRUE


VARS = [Var(i, f"v{i}", Int(-2, 2)) for i in range(3)]


@given(formulas(VARS))
def test_nnf_negation_is_complement(f):
    neg = negate_to_nnf(f)
    for a in range(-2, 3):
        for b in range(-2, 3):
            pt = {0: Fraction(a), 1: Fraction(b), 2: Fraction(a - b)}
            assert evaluate(neg, pt) == (not evaluate(f, pt))


@given(formulas(VARS))
def test_simplify_preserves_meaning(f):
    g = simplify(f)
    for a in range(-2, 3):
        for b in range(-2, 3):
            pt = {0: Fraction(a), 1: Fraction(b), 2: Fraction(0)}
            assert evaluate(g, pt) == evaluate(f, pt)


def test_problem_validation():
    x = Var(0, "x", Real(0, 1))
    b = Var(1, "b", Int(0, 1))
    with pytest.raises(IRError):
        EFProblem((x,), (), gt(Y, 0))
    with pytest.raises(IRError):
        EFProblem((x,), (x,), gt(X, 0))
    with pytest.raises(IRError):
        EFProblem((x, b), (), BoolVar(1))


def test_linearizable():
    x, y = Var(0, "x", Real(0, 1)), Var(1, "y", Real(0, 1))
    assert linearizable(EFProblem((x,), (y,), gt(X * Y + X, 0)))
    assert not linearizable(EFProblem((x,), (y,), gt(X * X, 0)))
    assert not linearizable(EFProblem((x,), (y,), gt(X * Y * Y, 0)))


def test_ag_rules_shapes():
    rules = ag_rules(Implies(conj([gt(Y, 0), lt(Y, 1)]), gt(X, Y)))
    assert len(rules) == 1 and len(rules[0].assumptions) == 2
    rules = ag_rules(disj([lt(Y, 0), gt(X, Y)]))
    assert len(rules) == 1 and rules[0].assumptions[0] == Cmp(Y, ">=")
    with pytest.raises(NotAGForm):
        ag_rules(Not(BoolVar(0)))


# -- s-expressions and the problem format -------------------------------------


def test_sexp_positions():
    nodes = parse_all("(a\n  (b 1))")
    assert nodes[0].items[1].line == 2
    with pytest.raises(SexpError) as e:
        parse_all("(a (b)")
    assert e.value.line == 1


RUNNING = """\
(declare-exists x Real -30 30)
(declare-forall y Real -30 30)
(assume (< 0 y))
(assume (< y 10))
(guarantee (< (- y (* 2 x)) 7))
"""


def test_parse_running_example():
    doc = parse(RUNNING)
    p = doc.problem()
    assert [v.name for v in p.exists_vars] == ["x"] and [v.name for v in p.forall_vars] == ["y"]
    assert isinstance(p.matrix, Implies)
    assert evaluate(p.matrix, {0: Fraction(2), 1: Fraction(9)})
    assert not evaluate(p.matrix, {0: Fraction(0), 1: Fraction(9)})


def test_parse_decimal_literals_are_exact():
    p = parse("(declare-exists x Real -0.5 1.25)\n(guarantee (> x 0.1))").problem()
    assert p.exists_vars[0].sort.interval.lo == Fraction(-1, 2)
    assert evaluate(p.matrix, {0: Fraction(1, 10) + Fraction(1, 1000)})
    assert not evaluate(p.matrix, {0: Fraction(1, 10)})


@pytest.mark.parametrize(
    "text, message, line",
    [
        ("", "no declarations", 1),
        ("; only a comment\n", "no declarations", 1),
        ("(declare-exists x Complex 0 1)", "unknown sort", 1),
        ("(declare-exists x Real)", "bound", 1),
        ("(declare-exists x Real 0 1)\n(guarantee (< x))", "argument", 2),
        ("(declare-exists x Real 0 1)\n(guarantee (< x z))", "undeclared", 2),
        ("(declare-exists x Real 0 1)\n(guarantee (frob x))", "unknown", 2),
        ("(declare-exists x Real 0 1)\n(declare-forall x Real 0 1)", "declared", 2),
        ("(preset priority-demo)\n(declare-exists x Real 0 1)", "preset", 1),
    ],
)
def test_parse_errors_carry_positions(text, message, line):
    with pytest.raises(ParseError) as e:
        parse(text)
    assert message in str(e.value).lower()
    assert e.value.line == line


def test_preset_options():
    doc = parse("(preset lyapunov-bv step=1/16 flag=true name=abc)")
    assert doc.preset == ("lyapunov-bv", {"step": Fraction(1, 16), "flag": True, "name": "abc"})


CORPUS = sorted(glob.glob(os.path.join(ROOT, "problems", "*.efs")))


@pytest.mark.parametrize("path", CORPUS, ids=[os.path.basename(p) for p in CORPUS])
def test_round_trip_on_corpus(path):
    with open(path) as fh:
        doc = parse(fh.read())
    text = print_document(doc)
    again = parse(text)
    assert print_document(again) == text
    if not doc.is_preset:
        assert again.problem() == doc.problem()


def test_corpus_is_present():
    assert len(CORPUS) >= 10


def test_document_from_encoded_problem_round_trips():
    from efsmt.encoders import build_preset

    p = build_preset("cruise-control").problem
    text = print_document(document_from_problem(p))
    q = parse(text).problem()
    assert [v.name for v in q.variables] == [v.name for v in p.variables]
    assert print_document(parse(text)) == text
