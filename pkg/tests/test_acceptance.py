"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

Every sub-check of a criterion runs even after an earlier one fails, so the
printed line lists all the failing parts.
"""

import random
import time
from fractions import Fraction

from efsmt.backends.linear import LinearBackend
from efsmt.backends.session import Unsat
from efsmt.bernstein import Proved, check_atom, normalize_box, to_bernstein
from efsmt.encoders import (
    RESOURCE_TEMPLATES,
    TEMPERATURE_WITNESS,
    build_preset,
    cruise_control,
    encode_hybrid,
    encode_lyapunov,
    encode_pendulum,
    encode_priority,
    lyapunov_bv_literal,
    oracle_priority,
    paper_system,
    paper_system_bv,
    refutable_at,
    resource_system,
    sampled_check,
    stable_numeric,
    temperature_system,
)
from efsmt.encoders.pendulum import PendulumParams, random_candidate
from efsmt.engine import EngineConfig, Invalid, Unknown, Valid, solve, verify_witness
from efsmt.fileformat import parse
from efsmt.ir import Cmp, gt, negate_to_nnf
from efsmt.poly import Polynomial
from efsmt.transforms import discretize, routh_first_column

from helpers import brute_ef, random_ef_problem
from test_bernstein_transforms import bernstein_by_reexpansion

RUNNING = """\
(declare-exists x Real -30 30)
(declare-forall y Real -30 30)
(assume (< 0 y))
(assume (< y 10))
(guarantee (< (- y (* 2 x)) 7))
"""

EXTRAPOLATE = """\
(declare-exists x Real 0 10)
(declare-forall y Real 0 10)
(guarantee (>= y x))
"""

INCOMPLETE = """\
(declare-exists x {sort})
(declare-forall y Real 0 1)
(constrain (> x 0))
(assume (> y 0))
(assume (!= y x))
(guarantee (> y x))
"""


class Checks:
    """Collects named sub-check outcomes and reports them on one line."""

    def __init__(self, number, title):
        self.number, self.title = number, title
        self.failed = []
        self.start = time.perf_counter()

    def check(self, name, ok):
        if not ok:
            self.failed.append(name)
        return ok

    def within(self, name, seconds):
        elapsed = time.perf_counter() - self.start
        return self.check(f"{name} took {elapsed:.1f}s > {seconds}s", elapsed < seconds)

    def finish(self, capsys):
        status = "PASS" if not self.failed else "FAIL"
        line = f"criterion {self.number:>2} {status}: {self.title}"
        if self.failed:
            line += " [" + "; ".join(self.failed) + "]"
        with capsys.disabled():
            print("\n" + line)
        assert not self.failed, line


def equivalent(f, g, vars):
    return isinstance(LinearBackend().check([f, negate_to_nnf(g)], vars), Unsat) and isinstance(
        LinearBackend().check([g, negate_to_nnf(f)], vars), Unsat
    )


def test_criterion_01_running_example(capsys):
    c = Checks(1, "running example valid, first learned constraint is x > 1")
    p = parse(RUNNING).problem()
    x = p.by_name("x")
    v = solve(p, EngineConfig(strategy="la-la"))
    c.within("solve", 1)
    c.check("verdict valid", isinstance(v, Valid))
    c.check("at most 20 iterations", v.stats.iterations <= 20)
    c.check("first candidate x = 0", v.trace.candidates[0] == {x.id: 0})
    first = v.trace.learned[0]
    c.check(f"first learned constraint {first} equivalent to x > 1", equivalent(first, gt(x.poly, 1), [x]))
    c.finish(capsys)


def test_criterion_02_extrapolation(capsys):
    c = Checks(2, "extrapolation on finds x = 0, off stops at the cap")
    p = parse(EXTRAPOLATE).problem()
    x = p.by_name("x")
    on = solve(p, EngineConfig(max_iterations=20))
    c.check("on: valid", isinstance(on, Valid))
    c.check("on: witness x = 0", isinstance(on, Valid) and on.witness[x.id] == 0)
    c.check("on: at most 20 iterations", on.stats.iterations <= 20)
    off = solve(p, EngineConfig(max_iterations=20, extrapolation_enabled=False))
    c.check("off: unknown", isinstance(off, Unknown))
    c.check("off: stopped at the cap", off.stats.iterations == 20)
    c.finish(capsys)


def test_criterion_03_incompleteness(capsys):
    c = Checks(3, "real exists sort unknown, fixed 1/32 sort invalid")
    real = parse(INCOMPLETE.format(sort="Real 0 1")).problem()
    v = solve(real, EngineConfig(max_iterations=50))
    c.check("real: unknown at the cap", isinstance(v, Unknown) and v.stats.iterations == 50)
    fixed = parse(INCOMPLETE.format(sort="Fixed 0 1 1/32")).problem()
    w = solve(fixed)
    c.check("fixed: invalid", isinstance(w, Invalid))
    # double loop with y on a 1/64 grid, fine enough to hold x/2 for every grid x
    c.check("fixed: brute force finds no witness", not brute_ef(discretize(fixed, Fraction(1, 64), "forall")))
    c.within("both runs", 5)
    c.finish(capsys)


def test_criterion_04_bernstein(capsys):
    c = Checks(4, "Bernstein worked example and enclosure suite")
    X = Polynomial.var(0)
    verdict = check_atom(Cmp(X * X - X * 4 + 4, ">", Fraction(-3)), {0: (1, 3)})
    c.check("proved at depth 0", isinstance(verdict, Proved) and verdict.depth == 0)
    t = to_bernstein(normalize_box(X * X - X * 4 + 4, {0: (1, 3)}))
    oracle = bernstein_by_reexpansion([1, -4, 4], 2)
    c.check("coefficients (1, -1, 1)", list(t.coeffs) == oracle == [1, -1, 1])
    rng = random.Random(4)
    violations = 0
    for _ in range(1000):
        deg = rng.randint(0, 6)
        p = Polynomial.const(0)
        for k in range(deg + 1):
            p = p + X**k * rng.randint(-9, 9)
        lo = Fraction(rng.randint(-20, 20), 4)
        hi = lo + Fraction(rng.randint(1, 16), 4)
        enc = to_bernstein(normalize_box(p, {0: (lo, hi)}), degrees=[deg], vars=[0])
        for _ in range(100):
            x = lo + (hi - lo) * Fraction(rng.randrange(0, 10001), 10000)
            if not enc.lower <= p.evaluate({0: x}) <= enc.upper:
                violations += 1
    c.check(f"{violations} enclosure violations", violations == 0)
    c.finish(capsys)


def test_criterion_05_priority(capsys):
    c = Checks(5, "priority synthesis, reference witnesses and variable counts")
    cfg = EngineConfig(strategy="fixed-fixed")
    for name, channel in (("priority-demo", False), ("priority-channel", True)):
        inst = build_preset(name)
        v = solve(inst.problem, cfg)
        c.check(f"{name}: valid", isinstance(v, Valid))
        if isinstance(v, Valid):
            c.check(f"{name}: oracle", inst.oracle(v.witness)[0])
    enc = encode_priority(resource_system(), RESOURCE_TEMPLATES)
    w = enc.witness(
        {("a", "d"), ("c", "b")}, {"m": True, "n": True}, {"m": {(0, 0): False}, "n": {(0, 0): True, (1, 0): False}}
    )
    c.check("reference witness verifies", verify_witness(enc.problem, w, cfg) is True)
    chan = encode_priority(resource_system(True), RESOURCE_TEMPLATES)
    cw = chan.witness({("a", "e")}, {"m": True, "n": False}, {"m": {(0, 0): False}})
    c.check("reference channel witness verifies", verify_witness(chan.problem, cw, cfg) is True)
    c.check("a<e is safe under the oracle", oracle_priority(resource_system(True), [("a", "e")]).status == "safe")
    template_vars = len(enc.guard) + sum(len(s) for s in enc.selectors.values())
    template_vars += sum(len(s) for s in enc.selectors_next.values())
    counts = (len(enc.prio), template_vars, len(enc.problem.forall_vars))
    c.check(f"variable counts {counts}", counts == (25, 8, 4))
    c.within("all runs", 30)
    c.finish(capsys)


def test_criterion_06_temperature(capsys):
    c = Checks(6, "temperature controller witness and simulated solution")
    enc = encode_hybrid(temperature_system())
    c.check("reference witness verifies", verify_witness(enc.problem, enc.witness(**TEMPERATURE_WITNESS)) is True)
    inst = build_preset("temperature")
    v = solve(inst.problem)
    c.check("valid", isinstance(v, Valid))
    if isinstance(v, Valid):
        ok, msg = inst.oracle(v.witness)
        c.check(f"simulation: {msg}", ok and "10000 steps" in msg)
    c.within("all runs", 30)
    c.finish(capsys)


def test_criterion_07_bibo(capsys):
    c = Checks(7, "cruise control gains and Routh suite")
    enc = cruise_control()
    v = solve(enc.problem)
    c.check("valid", isinstance(v, Valid))
    if isinstance(v, Valid):
        vals = enc.decode(v.witness)
        c.check("kp > 0 and ki > 0", vals["kp"] > 0 and vals["ki"] > 0)
        c.check("witness verifies", verify_witness(enc.problem, v.witness) is True)
    rng = random.Random(7)
    disagreements, checked = 0, 0
    while checked < 100:
        deg = rng.randint(1, 5)
        cs = [rng.randint(1, 9)] + [rng.randint(-4, 9) for _ in range(deg)]
        truth = stable_numeric(cs, margin=1e-6)
        if truth is None:
            continue
        col = routh_first_column(cs)
        if all(p.constant > 0 for p in col) != truth:
            disagreements += 1
        checked += 1
    c.check(f"{disagreements} Routh disagreements", disagreements == 0)
    c.finish(capsys)


def test_criterion_08_lyapunov(capsys):
    c = Checks(8, "Lyapunov witnesses on both routes and solved instances")
    step = Fraction(1, 32)
    cfg = EngineConfig(strategy="fixed-fixed", fixed_step=step)
    literal = lyapunov_bv_literal(step)
    try:
        ok = verify_witness(literal.problem, literal.witness(a=32, r=1), cfg) is True
    except Exception as e:  # a = 32 may fall outside the literal a box
        ok = False
        c.check(f"literal grid system rejects (32, 1): {e}", ok)
    else:
        c.check("literal grid system accepts (32, 1)", ok)
    t0 = time.perf_counter()
    bv = encode_lyapunov(paper_system_bv(), "strengthenedBV", step)
    c.check("strengthened grid encoding accepts (32, 1)", verify_witness(bv.problem, bv.witness(a=32, r=1), cfg) is True)
    v = solve(bv.problem, cfg)
    c.check("grid route: valid", isinstance(v, Valid))
    if isinstance(v, Valid):
        c.check("grid route: sampled oracle", sampled_check(bv, bv.decode(v.witness)))
    c.check("grid route under 60s", time.perf_counter() - t0 < 60)
    t0 = time.perf_counter()
    bern = encode_lyapunov(paper_system(), "bernstein")
    c.check("Bernstein encoding accepts (8, 1)", verify_witness(bern.problem, bern.witness(a=8, r=1)) is True)
    v = solve(bern.problem)
    c.check("Bernstein route: valid", isinstance(v, Valid))
    if isinstance(v, Valid):
        c.check("Bernstein route: sampled oracle", sampled_check(bern, bern.decode(v.witness)))
    c.check("Bernstein route under 60s", time.perf_counter() - t0 < 60)
    c.finish(capsys)


def test_criterion_09_soundness(capsys):
    c = Checks(9, "200 random grid problems agree with the double loop")
    rng = random.Random(9)
    mismatches = 0
    for _ in range(200):
        p = random_ef_problem(rng, max_points=200, kinds=("fixed",))
        if solve(p).kind != ("valid" if brute_ef(p) else "invalid"):
            mismatches += 1
    c.check(f"{mismatches} mismatches", mismatches == 0)
    c.finish(capsys)


def test_criterion_10_pendulum(capsys):
    c = Checks(10, "strict pendulum candidates are refutable on the x1 axis inside their box")
    enc = encode_pendulum(PendulumParams(), strict=True)
    rng = random.Random(10)
    misses = 0
    for _ in range(50):
        cand = random_candidate(enc, rng)
        for _ in range(10):
            # k ranges over the nonzero states of the candidate's own box |x1| < xb1
            k = cand["xb1"] * Fraction(rng.randrange(1, 1000), 1000) * rng.choice([1, -1])
            if refutable_at(enc, cand, k, 0) is not True:
                misses += 1
    c.check(f"{misses} of 500 points not refutable", misses == 0)
    c.finish(capsys)

