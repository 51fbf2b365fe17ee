"""Encoders for controller-synthesis problems and the named presets built from them.

A preset builds an :class:`~efsmt.ir.EFProblem` together with a decoder
that turns a witness into domain terms and an oracle that checks a decoded
solution independently of the solver.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, Mapping, Optional, Tuple

from ..ir import EFProblem, Value
from ..poly import as_fraction
from ..transforms import discretize
from .bibo import BiboEncoding, cruise_control, encode_bibo, stable_numeric
from .common import EncodingError
from .hybrid import (
    TEMPERATURE_WITNESS,
    HybridEncoding,
    HybridSystem,
    Mode,
    encode_hybrid,
    simulate,
    temperature_system,
)
from .lyapunov import (
    LyapunovEncoding,
    LyapunovSystem,
    encode_lyapunov,
    lyapunov_bv_literal,
    paper_system,
    paper_system_bv,
    sampled_check,
)
from .pendulum import PendulumEncoding, PendulumParams, encode_pendulum, pendulum_preset, refutable_at
from .priority import (
    RESOURCE_TEMPLATES,
    Component,
    ComponentSystem,
    PriorityEncoding,
    PrioritySolution,
    Template,
    encode_priority,
    oracle_priority,
    resource_system,
)

Oracle = Callable[[Mapping[int, Value]], Tuple[bool, str]]


@dataclass
class PresetInstance:
    name: str
    problem: EFProblem
    decode: Callable[[Mapping[int, Value]], Dict[str, object]]
    oracle: Optional[Oracle] = None
    strategy: str = "auto"
    notes: Dict[str, object] = field(default_factory=dict)


def _priority(name: str, channel: bool) -> PresetInstance:
    system = resource_system(channel)
    enc = encode_priority(system, RESOURCE_TEMPLATES)

    def decode(w):
        sol = enc.decode(w)
        return {
            "priorities": " ".join(f"{a}<{b}" for a, b in sorted(sol.priorities)),
            "invariant": " ".join(str(s) for s in sorted(sol.invariant)),
            "templates": " ".join(t for t, used in sorted(sol.used.items()) if used),
        }

    def oracle(w):
        res = oracle_priority(system, enc.decode(w).priorities)
        return res.status == "safe", res.status

    return PresetInstance(name, enc.problem, decode, oracle)


def _temperature(name: str, box=10, step=1, literal=False) -> PresetInstance:
    enc = encode_hybrid(temperature_system(as_fraction(box)), literal=bool(literal))
    problem = discretize(enc.problem, as_fraction(step), "exists") if step else enc.problem

    def oracle(w):
        res = simulate(enc.system, enc.decode(w))
        return res.safe, f"simulated {res.steps} steps" + ("" if res.safe else f", left the band at {res.violation}")

    return PresetInstance(name, problem, enc.decode, oracle)


def _cruise(name: str, m_lo=600, m_hi=1200, gain=100) -> PresetInstance:
    g = as_fraction(gain)
    enc = cruise_control((as_fraction(m_lo), as_fraction(m_hi)), (-g, g))

    def oracle(w):
        vals = enc.decode(w)
        for m in (as_fraction(m_lo), as_fraction(m_hi)):
            ok = stable_numeric([m, vals["kp"], vals["ki"]])
            if not ok:
                return False, f"unstable or marginal at m={m}"
        return True, "roots in the open left half plane at both mass bounds"

    return PresetInstance(name, enc.problem, enc.decode, oracle)


def _lyapunov_oracle(enc: LyapunovEncoding) -> Oracle:
    def oracle(w):
        ok = sampled_check(enc, enc.decode(w))
        return ok, "sampled V > 0 and dV/dt <= 0 on 0 < |z| < r"

    return oracle


def _lyapunov_bernstein(name: str) -> PresetInstance:
    enc = encode_lyapunov(paper_system(), "bernstein")
    return PresetInstance(name, enc.problem, enc.decode, _lyapunov_oracle(enc), notes={"multiplier": enc.multiplier})


def _lyapunov_bv(name: str, step=Fraction(1, 32)) -> PresetInstance:
    enc = encode_lyapunov(paper_system_bv(), "strengthenedBV", as_fraction(step))
    return PresetInstance(name, enc.problem, enc.decode, _lyapunov_oracle(enc), strategy="fixed-fixed")


def _lyapunov_bv_literal(name: str, step=Fraction(1, 32), a_max=10) -> PresetInstance:
    enc = lyapunov_bv_literal(as_fraction(step), (0, as_fraction(a_max)))
    return PresetInstance(name, enc.problem, enc.decode, _lyapunov_oracle(enc), strategy="fixed-fixed")


def _pendulum(name: str, strict: bool) -> PresetInstance:
    enc = encode_pendulum(PendulumParams(), strict)
    return PresetInstance(name, enc.problem, enc.decode)


PRESETS: Dict[str, Callable[..., PresetInstance]] = {
    "priority-demo": lambda **kw: _priority("priority-demo", False, **kw),
    "priority-channel": lambda **kw: _priority("priority-channel", True, **kw),
    "temperature": lambda **kw: _temperature("temperature", **kw),
    "cruise-control": lambda **kw: _cruise("cruise-control", **kw),
    "lyapunov-bernstein": lambda **kw: _lyapunov_bernstein("lyapunov-bernstein", **kw),
    "lyapunov-bv": lambda **kw: _lyapunov_bv("lyapunov-bv", **kw),
    "lyapunov-bv-literal": lambda **kw: _lyapunov_bv_literal("lyapunov-bv-literal", **kw),
    "pendulum-strict": lambda **kw: _pendulum("pendulum-strict", True, **kw),
    "pendulum-weak": lambda **kw: _pendulum("pendulum-weak", False, **kw),
}


def build_preset(name: str, **kwargs) -> PresetInstance:
    if name not in PRESETS:
        raise EncodingError(f"unknown preset {name!r}; known: {', '.join(PRESETS)}")
    try:
        return PRESETS[name](**kwargs)
    except TypeError as e:
        raise EncodingError(f"bad arguments for preset {name}: {e}") from e


__all__ = [
    "BiboEncoding",
    "Component",
    "ComponentSystem",
    "EncodingError",
    "HybridEncoding",
    "HybridSystem",
    "LyapunovEncoding",
    "LyapunovSystem",
    "Mode",
    "PRESETS",
    "PendulumEncoding",
    "PendulumParams",
    "PresetInstance",
    "PriorityEncoding",
    "PrioritySolution",
    "RESOURCE_TEMPLATES",
    "TEMPERATURE_WITNESS",
    "Template",
    "build_preset",
    "cruise_control",
    "encode_bibo",
    "encode_hybrid",
    "encode_lyapunov",
    "encode_pendulum",
    "encode_priority",
    "lyapunov_bv_literal",
    "oracle_priority",
    "paper_system",
    "paper_system_bv",
    "pendulum_preset",
    "refutable_at",
    "resource_system",
    "simulate",
    "stable_numeric",
    "temperature_system",
]
