"""Counterexample-guided exists-forall loop.

An E-session over the existential variables proposes candidates; an
F-session holding the negated matrix searches for a counterexample to each
candidate.  Every counterexample is generalized, instantiated into the
matrix and handed back to the E-session as a learned constraint.
"""

from __future__ import annotations

import enum
import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .backends.enum import EnumBackend
from .backends.linear import LinearBackend
from .backends.session import (
    Sat,
    SessionError,
    SolverSession,
    Unknown as UnknownResult,
    Unsat,
    complete,
    generalize_model,
)
from .bernstein import BernsteinBackend
from .ir import (
    TRUE,
    And,
    BoolSort,
    Cmp,
    EFProblem,
    FixedSort,
    Formula,
    IRError,
    NotAGForm,
    RealSort,
    Value,
    Var,
    ag_rules,
    atoms,
    conj,
    evaluate,
    free_vars,
    ge,
    gt,
    le,
    linearizable,
    lt,
    eq,
    negate_to_nnf,
    to_nnf,
    simplify,
    substitute,
)
from .poly import as_fraction


class Strategy(enum.Enum):
    LA_LA = "la-la"
    LA_BERNSTEIN = "la-bernstein"
    FIXED_FIXED = "fixed-fixed"
    AUTO = "auto"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class EngineConfig:
    max_iterations: int = 1000
    strategy: Strategy = Strategy.AUTO
    extrapolation_enabled: bool = True
    extrapolation_window: int = 4
    extrapolation_ratio: Fraction = Fraction(1, 2)
    fixed_step: Fraction = Fraction(1, 32)
    bernstein_max_depth: int = 10
    verify_witness: bool = True
    verify_samples: int = 1000
    seed: int = 0
    external_command: Optional[str] = None

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be at least 1")
        object.__setattr__(self, "fixed_step", as_fraction(self.fixed_step))
        if self.fixed_step <= 0:
            raise ConfigError("fixed_step must be positive")
        if self.extrapolation_window < 2:
            raise ConfigError("extrapolation_window must be at least 2")
        if isinstance(self.strategy, str):
            object.__setattr__(self, "strategy", Strategy(self.strategy))


@dataclass
class Stats:
    iterations: int = 0
    counterexamples: int = 0
    f_checks: int = 0
    extrapolation_blocks: int = 0
    e_nodes: int = 0
    f_nodes: int = 0


@dataclass
class Trace:
    candidates: List[Dict[int, Value]] = field(default_factory=list)
    counterexamples: List[Dict[int, Value]] = field(default_factory=list)
    learned: List[Formula] = field(default_factory=list)
    blocks: List[Formula] = field(default_factory=list)


@dataclass
class Verdict:
    stats: Stats
    trace: Trace
    strategy: Strategy

    @property
    def kind(self) -> str:
        return type(self).__name__.lower()


@dataclass
class Valid(Verdict):
    witness: Dict[int, Value] = field(default_factory=dict)


@dataclass
class Invalid(Verdict):
    pass


@dataclass
class Unknown(Verdict):
    reason: str = ""


# ---------------------------------------------------------------------------
# problem analysis


def split_conditions(p: EFProblem) -> Tuple[List[Formula], Formula]:
    """Top-level conjuncts over existential variables only, and the rest."""
    parts = list(p.matrix.args) if isinstance(p.matrix, And) else [p.matrix]
    ex = p.exists_ids()
    cond = [f for f in parts if free_vars(f) <= ex]
    body = [f for f in parts if not free_vars(f) <= ex]
    return cond, conj(body)


def _finite(vs: Sequence[Var]) -> bool:
    return all(v.sort.finite for v in vs)


def _la_sorts(vs: Sequence[Var]) -> bool:
    return all(isinstance(v.sort, (BoolSort, RealSort)) for v in vs)


def is_ag_form(p: EFProblem) -> bool:
    _, body = split_conditions(p)
    if not all(isinstance(v.sort, RealSort) for v in p.forall_vars):
        return False
    for shape in (body, simplify(to_nnf(body))):
        try:
            ag_rules(shape)
            return True
        except NotAGForm:
            pass
    return False


def resolve_strategy(p: EFProblem, cfg: EngineConfig) -> Strategy:
    s = cfg.strategy
    if s is Strategy.AUTO:
        if linearizable(p):
            return Strategy.LA_LA
        if is_ag_form(p):
            return Strategy.LA_BERNSTEIN
        if _finite(p.variables):
            return Strategy.FIXED_FIXED
        raise ConfigError(
            "no strategy applies: the matrix is neither linearizable nor in "
            "assume-guarantee form over real universals, and some sorts are "
            "unbounded grids; strengthen the universal atoms and discretize"
        )
    if s is Strategy.LA_LA and not linearizable(p):
        raise ConfigError("la-la needs a linearizable matrix (each monomial: one exists var times one forall var)")
    if s is Strategy.LA_BERNSTEIN and not is_ag_form(p):
        raise ConfigError("la-bernstein needs an assume-guarantee matrix over real universal variables")
    if s is Strategy.FIXED_FIXED and not _finite(p.forall_vars):
        raise ConfigError("fixed-fixed needs finite universal sorts; strengthen and discretize first")
    return s


def _side_backend(vs: Sequence[Var], strategy: Strategy, side: str, cfg: EngineConfig):
    if cfg.external_command and _la_sorts(vs) and not (side == "F" and strategy is Strategy.LA_BERNSTEIN):
        from .backends.external import ExternalBackend

        return ExternalBackend(cfg.external_command)
    if side == "F" and strategy is Strategy.LA_BERNSTEIN:
        return BernsteinBackend(cfg.bernstein_max_depth)
    if strategy is Strategy.FIXED_FIXED and _finite(vs):
        return EnumBackend()
    if _la_sorts(vs) or not (_finite(vs) and any(isinstance(v.sort, RealSort) for v in vs)):
        return LinearBackend()
    return EnumBackend()


def _discretize_exists(p: EFProblem, step: Fraction) -> EFProblem:
    ex = tuple(
        Var(v.id, v.name, FixedSort(v.sort.interval, step)) if isinstance(v.sort, RealSort) else v
        for v in p.exists_vars
    )
    return p.replace(exists_vars=ex)


# ---------------------------------------------------------------------------
# the loop


class Solver:
    """State of one ``solve`` call; the public helpers below wrap it."""

    def __init__(self, p: EFProblem, cfg: EngineConfig = EngineConfig()):
        self.cfg = cfg
        self.strategy = resolve_strategy(p, cfg)
        if self.strategy is Strategy.FIXED_FIXED:
            p = _discretize_exists(p, cfg.fixed_step)
        self.p = p
        self.cond, self.body = split_conditions(p)
        self.neg_body = negate_to_nnf(self.body)
        self.e_backend = _side_backend(p.exists_vars, self.strategy, "E", cfg)
        self.f_backend = _side_backend(p.forall_vars, self.strategy, "F", cfg)
        self.stats = Stats()
        self.trace = Trace()
        self.e = SolverSession(p.exists_vars, self.e_backend)
        for c in self.cond:
            self.e.add(c)
        self.f = SolverSession(p.variables, self.f_backend)
        self.f.add(self.neg_body)
        self._window_start = 0

    # F side -------------------------------------------------------------
    def f_check(self, candidate: Mapping[int, Value]):
        """Search a counterexample to ``candidate``: Unsat, Sat(cex) or Unknown."""
        self.stats.f_checks += 1
        self.f.push()
        self.f.fix(candidate)
        try:
            res = self.f.check()
        except (SessionError, IRError) as e:
            res = UnknownResult(f"F-solver: {e}")
        finally:
            self.f.pop()
        self.stats.f_nodes = self.f.stats.nodes
        if isinstance(res, Sat):
            return Sat({k: v for k, v in res.model.items() if k in self.p.forall_ids()})
        return res

    def generalize(self, candidate: Mapping[int, Value], cex: Mapping[int, Value]) -> Dict[int, Value]:
        total = complete(cex, self.p.forall_vars)
        goal = simplify(substitute(self.neg_body, candidate))
        aux = SolverSession(self.p.forall_vars, self.f_backend)
        return generalize_model(aux, total, goal, self.p.forall_vars)

    def learn(self, cex: Mapping[int, Value], completion: Optional[Mapping[int, Value]] = None) -> Formula:
        """Instantiate the matrix body at a (partial) counterexample."""
        f = simplify(substitute(self.body, cex))
        unbound = [v for v in self.p.forall_vars if v.id in free_vars(f)]
        if not unbound:
            return f
        linear = all(
            a.poly.degree(v.id) <= 1 for a in atoms(f) if isinstance(a, Cmp) for v in unbound
        )
        if linear and len(unbound) <= 4:
            choices = []
            for v in unbound:
                if isinstance(v.sort, BoolSort):
                    choices.append([False, True])
                else:
                    lo, hi = v.sort.interval.lo, v.sort.interval.hi
                    choices.append([lo] if lo == hi else [lo, hi])
            inst = [
                simplify(substitute(f, dict(zip((v.id for v in unbound), vals))))
                for vals in itertools.product(*choices)
            ]
            return simplify(conj(inst))
        fill = complete(completion or {}, unbound)
        return simplify(substitute(f, {v.id: fill[v.id] for v in unbound}))

    # extrapolation --------------------------------------------------------
    def _limits(self, seqs: List[List[Value]], vs: Sequence[Var]) -> Optional[List[Tuple[Value, Value, bool]]]:
        """Per variable ``(last, limit, converging)`` or None if any diverges."""
        out = []
        ratio = self.cfg.extrapolation_ratio
        for v, seq in zip(vs, seqs):
            if isinstance(v.sort, BoolSort) or not all(isinstance(x, Fraction) for x in seq):
                if len(set(seq)) != 1:
                    return None
                out.append((seq[-1], seq[-1], False))
                continue
            deltas = [b - a for a, b in zip(seq, seq[1:])]
            if all(d == 0 for d in deltas):
                out.append((seq[-1], seq[-1], False))
                continue
            if any(d == 0 for d in deltas):
                return None
            if not (all(d > 0 for d in deltas) or all(d < 0 for d in deltas)):
                return None
            if any(abs(d2) > ratio * abs(d1) for d1, d2 in zip(deltas, deltas[1:])):
                return None
            q = deltas[-1] / deltas[-2]
            limit = seq[-1] + deltas[-1] * q / (1 - q)
            iv = v.sort.interval
            limit = min(max(limit, iv.lo), iv.hi)
            out.append((seq[-1], limit, True))
        return out

    def extrapolate(self) -> Optional[Formula]:
        w = self.cfg.extrapolation_window
        cands = self.trace.candidates[self._window_start:]
        cexs = self.trace.counterexamples[self._window_start:]
        if len(cands) < w or len(cexs) < w:
            return None
        cands, cexs = cands[-w:], cexs[-w:]
        ex = self.p.exists_vars
        fa = self.p.forall_vars
        xl = self._limits([[c[v.id] for c in cands] for v in ex], ex)
        if xl is None or not any(conv for _, _, conv in xl):
            return None
        totals = [complete(c, fa) for c in cexs]
        yl = self._limits([[c[v.id] for c in totals] for v in fa], fa)
        if yl is None:
            return None
        parts: List[Formula] = []
        for v, (last, limit, conv) in zip(ex, xl):
            if not conv:
                parts.append(eq(v, last) if not isinstance(v.sort, BoolSort) else _bool_lit(v, last))
            elif limit == last:
                return None
            elif limit < last:
                parts += [gt(v, limit), le(v, last)]
            else:
                parts += [ge(v, last), lt(v, limit)]
        y_point: Dict[int, Value] = {}
        for v, (last, limit, _) in zip(fa, yl):
            if isinstance(v.sort, FixedSort):
                limit = v.sort.snap(limit)
            y_point[v.id] = limit
        sub_box = conj(parts)
        probe = SolverSession(ex, self.e_backend)
        for c in self.cond:
            probe.add(c)
        probe.add(sub_box)
        probe.add(simplify(substitute(self.body, y_point)))
        try:
            res = probe.check()
        except (SessionError, IRError):
            return None
        self.stats.e_nodes += probe.stats.nodes
        if not isinstance(res, Unsat):
            return None
        return negate_to_nnf(sub_box)

    # verification -----------------------------------------------------------
    def verify_witness(self, w: Mapping[int, Value]) -> Optional[bool]:
        """True if ``w`` is verified, False if refuted, None if inconclusive."""
        for v in self.p.exists_vars:
            if v.id in w and not v.sort.contains(w[v.id]):
                return False
        w = complete(w, self.p.exists_vars)
        if not all(evaluate(c, w) for c in self.cond):
            return False
        inst = simplify(substitute(self.body, w))
        if inst == TRUE:
            return True
        sampled = self._sample_refute(inst)
        if sampled:
            return False
        res = self.f_check(w)
        if isinstance(res, Sat):
            return False
        if isinstance(res, Unsat):
            return True
        return None

    def _sample_refute(self, inst: Formula) -> bool:
        fa = self.p.forall_vars
        rng = random.Random(self.cfg.seed)
        if _finite(fa):
            size = 1
            for v in fa:
                size *= len(v.sort.values())
            if size <= 50_000:
                for vals in itertools.product(*(v.sort.values() for v in fa)):
                    if not evaluate(inst, dict(zip((v.id for v in fa), vals))):
                        return True
                return False
        points: List[Dict[int, Value]] = []
        if len(fa) <= 10:
            for bits in itertools.product((0, 1), repeat=len(fa)):
                points.append({v.id: _pick_end(v, b) for v, b in zip(fa, bits)})
        for _ in range(self.cfg.verify_samples):
            points.append({v.id: _random_value(v, rng) for v in fa})
        return any(not evaluate(inst, pt) for pt in points)

    # main loop --------------------------------------------------------------
    def _finish(self, cls, **kw) -> Verdict:
        self.stats.e_nodes += self.e.stats.nodes
        return cls(stats=self.stats, trace=self.trace, strategy=self.strategy, **kw)

    def run(self) -> Verdict:
        ex = self.p.exists_vars
        for _ in range(self.cfg.max_iterations):
            self.stats.iterations += 1
            try:
                res = self.e.check()
            except (SessionError, IRError) as e:
                return self._finish(Unknown, reason=f"E-solver: {e}")
            if isinstance(res, Unsat):
                return self._finish(Invalid)
            if isinstance(res, UnknownResult):
                return self._finish(Unknown, reason=f"E-solver: {res.reason}")
            cand = {v.id: x for v, x in zip(ex, (complete(res.model, ex)[v.id] for v in ex))}
            self.trace.candidates.append(cand)
            fres = self.f_check(cand)
            if isinstance(fres, UnknownResult):
                return self._finish(Unknown, reason=fres.reason)
            if isinstance(fres, Unsat):
                if self.cfg.verify_witness:
                    ok = self.verify_witness(cand)
                    if ok is None:
                        return self._finish(Unknown, reason="witness verification inconclusive")
                    if not ok:
                        return self._finish(Unknown, reason="witness failed independent verification")
                return self._finish(Valid, witness=cand)
            self.stats.counterexamples += 1
            total = complete(fres.model, self.p.forall_vars)
            cex = self.generalize(cand, total)
            self.trace.counterexamples.append(cex)
            learned = self.learn(cex, total)
            self.trace.learned.append(learned)
            self.e.add(learned)
            if self.cfg.extrapolation_enabled:
                block = self.extrapolate()
                if block is not None:
                    self.stats.extrapolation_blocks += 1
                    self.trace.blocks.append(block)
                    self.e.add(block)
                    self._window_start = len(self.trace.candidates)
        return self._finish(Unknown, reason=f"iteration cap {self.cfg.max_iterations} reached")


def _bool_lit(v: Var, value: bool) -> Formula:
    from .ir import BoolVar, Not

    return BoolVar(v.id) if value else Not(BoolVar(v.id))


def _pick_end(v: Var, bit: int) -> Value:
    if isinstance(v.sort, BoolSort):
        return bool(bit)
    return v.sort.interval.hi if bit else v.sort.interval.lo


def _random_value(v: Var, rng: random.Random) -> Value:
    if isinstance(v.sort, BoolSort):
        return rng.random() < 0.5
    if v.sort.finite:
        vals = v.sort.values()
        return vals[rng.randrange(len(vals))]
    iv = v.sort.interval
    return iv.lo + iv.width * Fraction(rng.randrange(1 << 20), 1 << 20)


# ---------------------------------------------------------------------------
# public helpers


def solve(p: EFProblem, cfg: EngineConfig = EngineConfig()) -> Verdict:
    return Solver(p, cfg).run()


def f_check(candidate: Mapping[int, Value], p: EFProblem, cfg: EngineConfig = EngineConfig()):
    return Solver(p, cfg).f_check(complete(candidate, p.exists_vars))


def learn(cex: Mapping[int, Value], p: EFProblem, cfg: EngineConfig = EngineConfig()) -> Formula:
    return Solver(p, cfg).learn(cex)


def verify_witness(p: EFProblem, w: Mapping[int, Value], cfg: EngineConfig = EngineConfig()) -> Optional[bool]:
    return Solver(p, cfg).verify_witness(w)
