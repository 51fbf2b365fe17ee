"""Encoders: priority synthesis, hybrid templates, BIBO, Lyapunov, pendulum and presets."""

import random
from fractions import Fraction

import pytest
import sympy

from efsmt.encoders import (
    PRESETS,
    RESOURCE_TEMPLATES,
    TEMPERATURE_WITNESS,
    EncodingError,
    PendulumParams,
    build_preset,
    cruise_control,
    encode_bibo,
    encode_hybrid,
    encode_lyapunov,
    encode_pendulum,
    encode_priority,
    oracle_priority,
    paper_system,
    refutable_at,
    resource_system,
    simulate,
    stable_numeric,
    temperature_system,
)
from efsmt.encoders.common import parse_poly, poly_to_sympy
from efsmt.encoders.hybrid import check_templates
from efsmt.encoders.lyapunov import derivative_condition, sampled_check, sign_intervals, split_factor
from efsmt.encoders.pendulum import dynamics, random_candidate, vdot
from efsmt.engine import EngineConfig, Valid, solve, verify_witness
from efsmt.poly import Polynomial

# -- priorities ---------------------------------------------------------------------


def test_priority_oracle_on_hand_examples():
    system = resource_system()
    assert oracle_priority(system, []).status == "unsafe"
    assert oracle_priority(system, [("a", "d"), ("c", "b")]).status == "safe"
    # blocking both acquisitions leaves only the idle loop e
    res = oracle_priority(system, [("a", "e"), ("c", "e")])
    assert res.status == "safe" and res.reachable == {(0, 0)}


def test_priority_encoding_counts():
    enc = encode_priority(resource_system(), RESOURCE_TEMPLATES)
    template_vars = len(enc.guard) + sum(len(s) for s in enc.selectors.values()) + sum(
        len(s) for s in enc.selectors_next.values()
    )
    assert (len(enc.prio), template_vars, len(enc.problem.forall_vars)) == (25, 8, 4)


def test_priority_decode_round_trip():
    enc = encode_priority(resource_system(), RESOURCE_TEMPLATES)
    w = enc.witness({("a", "d"), ("c", "b")}, {"m": True, "n": True}, {"n": {(0, 0): True, (1, 0): False}})
    sol = enc.decode(w)
    assert {("a", "d"), ("c", "b")} <= set(sol.priorities)
    assert sol.used == {"m": True, "n": True}


def test_unsafe_priority_witness_is_refuted():
    system = resource_system()
    enc = encode_priority(system, RESOURCE_TEMPLATES)
    w = enc.witness(set(), {"m": True, "n": True}, {"m": {(0, 0): False}, "n": {(0, 0): True, (1, 0): False}})
    assert verify_witness(enc.problem, w, EngineConfig(strategy="fixed-fixed")) is False


# -- hybrid -------------------------------------------------------------------------------


def test_hybrid_reference_witness_simulates_safely():
    system = temperature_system()
    enc = encode_hybrid(system)
    vals = dict(TEMPERATURE_WITNESS)
    for mode in ("late", "early", "random"):
        res = simulate(system, vals, steps=2000, switch=mode, keep=2000)
        assert res.safe, mode
        assert check_templates(enc, vals, res.visited)


def test_hybrid_simulation_detects_unsafe_rates():
    system = temperature_system()
    vals = dict(TEMPERATURE_WITNESS, gamma=Fraction(-5))
    assert not simulate(system, vals, steps=2000).safe


def test_hybrid_encoding_shape():
    enc = encode_hybrid(temperature_system())
    names = [v.name for v in enc.problem.exists_vars]
    assert {"alpha", "beta", "gamma", "eta", "l0", "u0", "l1", "u1", "l0'"} <= set(names)
    assert {v.name for v in enc.problem.forall_vars} >= {"h", "t"}


def test_unknown_hybrid_parameter():
    from efsmt.encoders.hybrid import HybridSystem, Mode

    bad = HybridSystem(
        modes=(Mode("rho", 1), Mode(1, 1)), params={}, initial=0, safe=(0, 1), clock_max=1,
        template_box=(0, 1), h_box=(0, 1),
    )
    with pytest.raises(EncodingError):
        encode_hybrid(bad)


# -- BIBO -----------------------------------------------------------------------------------


def test_cruise_control_column_and_witness():
    enc = cruise_control()
    assert enc.column == enc.coefficients  # degree two: the coefficients themselves
    assert verify_witness(enc.problem, enc.witness(kp=1, ki=1)) is True
    assert verify_witness(enc.problem, enc.witness(kp=-1, ki=1)) is False


def test_bibo_with_symbolic_higher_degree():
    # s^3 + 2 s^2 + k s + 1 is stable iff 2k > 1
    enc = encode_bibo([1, 2, "k", 1], {"k": (-5, 5)})
    assert verify_witness(enc.problem, enc.witness(k=1)) is True
    assert verify_witness(enc.problem, enc.witness(k=Fraction(1, 4))) is False
    v = solve(enc.problem)
    assert isinstance(v, Valid)
    k = float(enc.decode(v.witness)["k"])
    assert stable_numeric([1, 2, k, 1]) is True


def test_bibo_rejects_duplicate_names():
    with pytest.raises(EncodingError):
        encode_bibo(["m", "k"], {"k": (0, 1)}, {"k": (0, 1)})


def test_polynomial_text_round_trip():
    syms = {"a": Polynomial.var(0), "z": Polynomial.var(1)}
    p = parse_poly("a*z**2 - 3/2*z + 1", syms)
    expr = poly_to_sympy(p, {0: "a", 1: "z"})
    assert sympy.simplify(expr - sympy.sympify("a*z**2 - 3*z/2 + 1")) == 0
    with pytest.raises(EncodingError):
        parse_poly("sin(z)", syms)


# -- Lyapunov -------------------------------------------------------------------------------


def test_lyapunov_derivative_condition():
    enc = encode_lyapunov(paper_system(), "bernstein")
    a, z = sympy.symbols("a z")
    g = poly_to_sympy(enc.guarantee, {enc.params["a"].id: "a", enc.z.id: "z"})
    # dV/dt = 2 a z f(z) with f = (-z^2 - 3z)/(2+z); g = -dV/dt * D^2
    expected = -2 * a * z * (-z**2 - 3 * z) * (2 + z)
    assert sympy.expand(g - expected) == 0
    assert enc.multiplier == "D^2"


def test_lyapunov_bernstein_witness_and_solution():
    enc = encode_lyapunov(paper_system(), "bernstein")
    assert verify_witness(enc.problem, enc.witness(a=8, r=1)) is True
    assert verify_witness(enc.problem, enc.witness(a=8, r=4)) is False  # reaches z < -2
    v = solve(enc.problem)
    assert isinstance(v, Valid) and sampled_check(enc, enc.decode(v.witness))


def test_sign_intervals_and_factor_split():
    z = Polynomial.var(1)
    a = Polynomial.var(0)
    c, q = split_factor(a * z * z * 2 + a * z * 4, 1)
    assert c == a * 2 and q == z * z + z * 2
    pieces = sign_intervals(q, 1, Fraction(-5), Fraction(5), 1)
    assert pieces == [(Fraction(-5), Fraction(-2)), (Fraction(0), Fraction(5))]


def test_derivative_condition_uses_denominator_sign():
    z = Polynomial.var(0)
    g, mult = derivative_condition(-z, z + 3, z * z, 0, {0: (Fraction(-1), Fraction(1))})
    assert mult == "D"
    with pytest.raises(EncodingError):
        derivative_condition(-z, z, z * z, 0, {0: (Fraction(-1), Fraction(1))}, strict_denominator=True)


# -- pendulum -------------------------------------------------------------------------------


def test_pendulum_vdot_finite_difference():
    enc = encode_pendulum(PendulumParams(), strict=True)
    rng = random.Random(3)
    for _ in range(20):
        cand = random_candidate(enc, rng)
        M2, l = rng.uniform(0.5, 1.0), rng.uniform(0.1, 0.2)
        x = (rng.uniform(-1, 1), rng.uniform(-1, 1))
        f = dynamics(enc.params, cand, M2, l, x)
        a, b = float(cand["a"]), float(cand["b"])

        def V(p):
            return a * p[0] ** 2 + b * p[1] ** 2

        # central differences are exact for quadratic V up to rounding
        h = 1e-3
        fd = (V((x[0] + h * f[0], x[1] + h * f[1])) - V((x[0] - h * f[0], x[1] - h * f[1]))) / (2 * h)
        exact = float(vdot(enc, cand, Fraction(M2), Fraction(l), Fraction(x[0]), Fraction(x[1])))
        if abs(exact) > 1e-9:
            assert abs(fd - exact) / abs(exact) < 1e-6


def test_pendulum_vdot_vanishes_on_zero_rate():
    enc = encode_pendulum(PendulumParams(), strict=True)
    cand = random_candidate(enc, random.Random(0))
    assert vdot(enc, cand, 1, Fraction(1, 10), Fraction(1, 3), 0) == 0


def test_pendulum_refutation_is_symmetric():
    enc = encode_pendulum(PendulumParams(), strict=True)
    rng = random.Random(11)
    for _ in range(5):
        cand = random_candidate(enc, rng)
        for _ in range(3):
            k = Fraction(rng.randrange(1, 1000), 1000) * rng.choice([1, -1])
            x2 = Fraction(rng.randrange(-1000, 1000), 1000)
            assert refutable_at(enc, cand, k, x2) == refutable_at(enc, cand, -k, -x2)


def test_pendulum_weak_instance_is_not_refuted_on_the_axis():
    enc = encode_pendulum(PendulumParams(), strict=False)
    cand = {"xb1": Fraction(1, 2), "xb2": Fraction(1, 2), "kp": 50, "kd": 10, "a": 1, "b": 1}
    assert refutable_at(enc, cand, Fraction(1, 4), 0) is False


# -- presets --------------------------------------------------------------------------------


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_build(name):
    inst = build_preset(name)
    assert inst.problem.exists_vars and inst.problem.forall_vars


def test_preset_errors():
    with pytest.raises(EncodingError):
        build_preset("nope")
    with pytest.raises(EncodingError):
        build_preset("cruise-control", wheels=4)


def test_cruise_preset_oracle():
    inst = build_preset("cruise-control")
    v = solve(inst.problem)
    assert isinstance(v, Valid)
    ok, _ = inst.oracle(v.witness)
    assert ok
