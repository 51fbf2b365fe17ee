"""Random formulas and brute-force oracles shared by the property tests."""

import itertools
import random
from fractions import Fraction

from hypothesis import strategies as st

from efsmt.ir import (
    BoolSort,
    Cmp,
    EFProblem,
    Fixed,
    Int,
    Not,
    Var,
    conj,
    disj,
    evaluate,
)
from efsmt.poly import Polynomial

OPS = ("<", "<=", ">", ">=", "=", "!=")


@st.composite
def linear_atoms(draw, vars):
    coeffs = draw(st.lists(st.integers(-3, 3), min_size=len(vars), max_size=len(vars)))
    const = draw(st.integers(-6, 6))
    p = Polynomial.const(const)
    for v, c in zip(vars, coeffs):
        p = p + v.poly * c
    return Cmp(p, draw(st.sampled_from(OPS)))


@st.composite
def formulas(draw, vars, depth=2):
    if depth == 0 or draw(st.integers(0, 2)) == 0:
        return draw(linear_atoms(vars))
    kind = draw(st.sampled_from(["and", "or", "not"]))
    if kind == "not":
        return Not(draw(formulas(vars, depth - 1)))
    parts = draw(st.lists(formulas(vars, depth - 1), min_size=1, max_size=3))
    return conj(parts) if kind == "and" else disj(parts)


def brute_sat(fs, vars):
    doms = [v.sort.values() for v in vars]
    for vals in itertools.product(*doms):
        a = dict(zip((v.id for v in vars), vals))
        if all(evaluate(f, a) for f in fs):
            return a
    return None


def brute_ef(p: EFProblem):
    """Double loop over both grids: True when some exists point works."""
    ex_doms = [v.sort.values() for v in p.exists_vars]
    fa_doms = [v.sort.values() for v in p.forall_vars]
    fa_points = [dict(zip((v.id for v in p.forall_vars), vals)) for vals in itertools.product(*fa_doms)]
    for vals in itertools.product(*ex_doms):
        a = dict(zip((v.id for v in p.exists_vars), vals))
        if all(evaluate(p.matrix, {**a, **b}) for b in fa_points):
            return True
    return False


def random_small_sort(rng: random.Random, kinds=("int", "fixed", "bool")):
    kind = rng.choice(kinds)
    if kind == "bool":
        return BoolSort()
    lo = rng.randint(-3, 1)
    if kind == "int":
        return Int(lo, lo + rng.randint(1, 4))
    step = rng.choice([Fraction(1, 2), Fraction(1), Fraction(1, 4)])
    return Fixed(lo, lo + step * rng.randint(1, 4), step)


def grid_size(vars):
    n = 1
    for v in vars:
        n *= len(v.sort.values())
    return n


def random_ef_problem(rng: random.Random, max_points: int = 200, kinds=("int", "fixed", "bool")) -> EFProblem:
    """Random EF problem over ``kinds`` sorts whose full grid has at most ``max_points`` points."""
    while True:
        n_ex, n_fa = rng.randint(1, 2), rng.randint(1, 2)
        vs = [Var(i, f"v{i}", random_small_sort(rng, kinds)) for i in range(n_ex + n_fa)]
        if grid_size(vs) <= max_points:
            break
    ex, fa = vs[:n_ex], vs[n_ex:]
    nums = [v for v in vs if not isinstance(v.sort, BoolSort)]
    bools = [v for v in vs if isinstance(v.sort, BoolSort)]

    def atom():
        from efsmt.ir import BoolVar

        if bools and (not nums or rng.random() < 0.25):
            b = BoolVar(rng.choice(bools).id)
            return b if rng.random() < 0.5 else Not(b)
        p = Polynomial.const(rng.randint(-4, 4))
        for v in nums:
            c = rng.randint(-2, 2)
            if c:
                p = p + v.poly * c
        return Cmp(p, rng.choice(OPS))

    def form(d):
        if d == 0 or rng.random() < 0.3:
            return atom()
        parts = [form(d - 1) for _ in range(rng.randint(2, 3))]
        return conj(parts) if rng.random() < 0.5 else disj(parts)

    return EFProblem(tuple(ex), tuple(fa), form(2))
