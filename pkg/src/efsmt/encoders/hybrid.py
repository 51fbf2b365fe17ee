"""Switching-controller synthesis for a two-mode hybrid system.

A continuous quantity ``h`` evolves at a constant rate in each mode and a
clock ``t`` measures time since the last switch.  Mode 0 may switch once
``t`` reaches a guard lower bound and must switch at its dwell bound; mode
1 switches at its dwell bound.  Rates, guards and dwell bounds may be
unknown parameters.

Each mode carries an invariant template ``l <= h - rate*t <= u``, which
tracks the value of ``h`` at the last switch.  The encoding requires the
templates to contain the initial value, stay inside the safe band and be
closed under flows and jumps.  ``literal=True`` puts the template bounds
directly on ``h`` instead (a plain interval per mode); that variant is kept
for comparison and is usually too weak to admit a witness.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

from .common import EncodingError
from ..ir import (
    Bool,
    BoolVar,
    EFProblem,
    Formula,
    Implies,
    Not,
    Real,
    Value,
    Var,
    VarPool,
    conj,
    eq,
    ge,
    le,
    lt,
)
from ..poly import Number, Polynomial, as_fraction

Param = Union[str, Number]



@dataclass(frozen=True)
class Mode:
    rate: Param
    dwell: Param
    guard: Optional[Param] = None  # earliest switching time; None means at dwell


@dataclass(frozen=True)
class HybridSystem:
    modes: Tuple[Mode, Mode]
    params: Dict[str, Tuple[Number, Number]]
    initial: Number
    safe: Tuple[Number, Number]
    clock_max: Number
    template_box: Tuple[Number, Number]
    h_box: Tuple[Number, Number]
    progress: Tuple[Tuple[Param, str, Param], ...] = ()


@dataclass
class HybridEncoding:
    system: HybridSystem
    problem: EFProblem
    params: Dict[str, Var]
    bounds: Dict[str, Var]
    forall: Dict[str, Var]
    literal: bool = False

    def witness(self, **values: Number) -> Dict[int, Fraction]:
        """Exists assignment from parameter and bound names; primed copies follow."""
        out: Dict[int, Fraction] = {}
        for name, v in {**self.params, **self.bounds}.items():
            base = name.rstrip("'")
            if base in values:
                out[v.id] = as_fraction(values[base])
        return out

    def decode(self, w: Mapping[int, Value]) -> Dict[str, Fraction]:
        return {name: w[v.id] for name, v in {**self.params, **self.bounds}.items() if v.id in w}


def _term(x: Param, params: Mapping[str, Var]) -> Polynomial:
    if isinstance(x, str):
        if x not in params:
            raise EncodingError(f"unknown parameter {x!r}")
        return params[x].poly
    return Polynomial.const(as_fraction(x))


_REL = {"<": lt, "<=": le, ">=": ge, ">": lambda a, b: lt(b, a), "=": eq}


def encode_hybrid(system: HybridSystem, literal: bool = False) -> HybridEncoding:
    pool = VarPool()
    params = {name: pool.exists_var(name, Real(lo, hi)) for name, (lo, hi) in system.params.items()}
    tlo, thi = system.template_box
    bounds: Dict[str, Var] = {}
    for name in ("l0", "u0", "l1", "u1"):
        bounds[name] = pool.exists_var(name, Real(tlo, thi))
    for name in ("l0", "u0", "l1", "u1"):
        bounds[name + "'"] = pool.exists_var(name + "'", Real(tlo, thi))
    hlo, hhi = system.h_box
    cmax = as_fraction(system.clock_max)
    mode = pool.forall_var("mode", Bool)
    mode_n = pool.forall_var("mode'", Bool)
    h = pool.forall_var("h", Real(hlo, hhi))
    h_n = pool.forall_var("h'", Real(hlo, hhi))
    t = pool.forall_var("t", Real(0, cmax))
    d = pool.forall_var("delta", Real(0, cmax))
    fa = {"mode": mode, "mode'": mode_n, "h": h, "h'": h_n, "t": t, "delta": d}

    def at(i: int, nxt: bool = False) -> Formula:
        m = BoolVar((mode_n if nxt else mode).id)
        return m if i else Not(m)

    rate = [_term(m.rate, params) for m in system.modes]
    dwell = [_term(m.dwell, params) for m in system.modes]
    guard = [_term(m.guard, params) if m.guard is not None else None for m in system.modes]

    def band(i: int, value: Polynomial, primed: bool = False) -> Formula:
        s = "'" if primed else ""
        return conj([le(bounds[f"l{i}{s}"], value), le(value, bounds[f"u{i}{s}"])])

    def tracked(i: int, hv: Polynomial, tv: Polynomial) -> Polynomial:
        return hv if literal else hv - rate[i] * tv

    lo_safe, hi_safe = (as_fraction(x) for x in system.safe)
    cond: List[Formula] = []
    for name in ("l0", "u0", "l1", "u1"):
        cond.append(eq(bounds[name], bounds[name + "'"]))
    for lhs, op, rhs in system.progress:
        if op not in _REL:
            raise EncodingError(f"unknown relation {op!r}")
        cond.append(_REL[op](_term(lhs, params), _term(rhs, params)))
    init = as_fraction(system.initial)
    cond.append(conj([le(bounds["l0"], init), le(init, bounds["u0"])]))

    body: List[Formula] = []
    hp, tp, dp, hnp = h.poly, t.poly, d.poly, h_n.poly
    for i in (0, 1):
        inv = conj([at(i), le(0, tp), le(tp, dwell[i]), band(i, tracked(i, hp, tp))])
        # safety
        body.append(Implies(inv, conj([le(lo_safe, hp), le(hp, hi_safe)])))
        # flow
        pre = conj(
            [
                at(i),
                at(i, True),
                le(0, tp),
                le(tp + dp, dwell[i]),
                band(i, tracked(i, hp, tp)),
                eq(hnp, hp + rate[i] * dp),
            ]
        )
        body.append(Implies(pre, band(i, tracked(i, hnp, tp + dp), primed=True)))
        # jump to the other mode with the clock reset
        j = 1 - i
        earliest = guard[i] if guard[i] is not None else dwell[i]
        pre = conj(
            [
                at(i),
                at(j, True),
                le(earliest, tp),
                le(tp, dwell[i]),
                band(i, tracked(i, hp, tp)),
                eq(hnp, hp),
            ]
        )
        body.append(Implies(pre, band(j, hnp, primed=True)))
    return HybridEncoding(system, pool.problem(conj(cond + body)), params, bounds, fa, literal)


def temperature_system(box: Number = 10) -> HybridSystem:
    """Heater/cooler: rate 2 in mode 0, unknown rate ``gamma`` in mode 1."""
    return HybridSystem(
        modes=(Mode(2, "alpha", "beta"), Mode("gamma", "eta")),
        params={"alpha": (0, box), "beta": (0, box), "gamma": (-box, box), "eta": (0, box)},
        initial=100,
        safe=(80, 120),
        clock_max=box,
        template_box=(0, 200),
        h_box=(0, 200),
        progress=(("beta", "<=", "alpha"), ("alpha", "<=", 10), (0, "<", "eta"), ("eta", "<=", 6)),
    )


TEMPERATURE_WITNESS = dict(alpha=10, beta=10, gamma=Fraction(-20, 6), eta=6, l0=100, u0=100, l1=120, u1=120)


# ---------------------------------------------------------------------------
# simulation oracle


@dataclass
class SimulationResult:
    safe: bool
    steps: int
    violation: Optional[Tuple[int, Fraction, Fraction]] = None  # (mode, t, h)
    visited: List[Tuple[int, Fraction, Fraction]] = field(default_factory=list)


def simulate(
    system: HybridSystem,
    values: Mapping[str, Number],
    steps: int = 10_000,
    dt: Number = Fraction(1, 16),
    switch: str = "late",
    seed: int = 0,
    keep: int = 0,
) -> SimulationResult:
    """Exact rational simulation of the closed loop.

    ``switch="late"`` leaves mode 0 at its dwell bound, ``"early"`` at the
    guard and ``"random"`` at a random grid time between the two.
    """
    vals = {k: as_fraction(v) for k, v in values.items()}

    def val(x: Param) -> Fraction:
        return vals[x] if isinstance(x, str) else as_fraction(x)

    dt = as_fraction(dt)
    rng = random.Random(seed)
    lo, hi = (as_fraction(x) for x in system.safe)
    m, t, h = 0, Fraction(0), as_fraction(system.initial)
    visited = []

    def deadline(i: int) -> Fraction:
        mode = system.modes[i]
        late = val(mode.dwell)
        if mode.guard is None or switch == "late":
            return late
        early = val(mode.guard)
        if switch == "early":
            return early
        k = int((late - early) / dt)
        return early + dt * rng.randint(0, max(k, 0))

    until = deadline(0)
    for n in range(steps):
        if keep and len(visited) < keep:
            visited.append((m, t, h))
        if not lo <= h <= hi:
            return SimulationResult(False, n, (m, t, h), visited)
        if t >= until:
            m, t = 1 - m, Fraction(0)
            until = deadline(m)
            continue
        step = min(dt, until - t)
        h += val(system.modes[m].rate) * step
        t += step
    return SimulationResult(True, steps, None, visited)


def check_templates(
    enc: HybridEncoding, values: Mapping[str, Number], trace: Sequence[Tuple[int, Fraction, Fraction]]
) -> bool:
    """Every visited state lies in the decoded invariant of its mode."""
    vals = {k: as_fraction(v) for k, v in values.items()}
    for m, t, h in trace:
        r = enc.system.modes[m].rate
        r = vals[r] if isinstance(r, str) else as_fraction(r)
        x = h if enc.literal else h - r * t
        if not vals[f"l{m}"] <= x <= vals[f"u{m}"]:
            return False
    return True
