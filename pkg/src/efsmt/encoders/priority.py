"""Priority synthesis for component systems.

Components are small automata that move one at a time (interleaving).  A
priority ``alpha < beta`` blocks ``alpha`` whenever ``beta`` is enabled.
The encoding asks for a strict partial order of priorities and a safety
invariant, given as a union of boolean state templates, that contains the
initial state, avoids risk (and deadlock) states and is closed under the
transitions the priorities leave enabled.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

from .common import EncodingError
from ..ir import (
    Bool,
    BoolVar,
    EFProblem,
    Formula,
    Iff,
    Implies,
    Not,
    Value,
    Var,
    VarPool,
    conj,
    disj,
)

State = Tuple[int, ...]
Pair = Tuple[str, str]



@dataclass(frozen=True)
class Component:
    name: str
    states: Tuple[int, ...]
    initial: int
    transitions: Tuple[Tuple[int, str, int], ...]


@dataclass(frozen=True)
class ComponentSystem:
    components: Tuple[Component, ...]
    risk: FrozenSet[State] = frozenset()
    candidates: Optional[FrozenSet[Pair]] = None
    forbidden: FrozenSet[Pair] = frozenset()

    def __post_init__(self):
        labels = [lab for c in self.components for _, lab, _ in c.transitions]
        seen: Dict[str, int] = {}
        for i, c in enumerate(self.components):
            for _, lab, _ in c.transitions:
                if seen.setdefault(lab, i) != i:
                    raise EncodingError(f"action {lab} is shared between components")
        for r in self.risk:
            if len(r) != len(self.components):
                raise EncodingError(f"risk state {r} has the wrong dimension")
        del labels

    @property
    def actions(self) -> List[str]:
        out: List[str] = []
        for c in self.components:
            for _, lab, _ in c.transitions:
                if lab not in out:
                    out.append(lab)
        return out

    def owner(self, action: str) -> int:
        for i, c in enumerate(self.components):
            if any(lab == action for _, lab, _ in c.transitions):
                return i
        raise KeyError(action)

    @property
    def initial(self) -> State:
        return tuple(c.initial for c in self.components)

    def global_states(self) -> List[State]:
        return list(itertools.product(*(c.states for c in self.components)))

    def enabled(self, s: State) -> List[Tuple[str, State]]:
        out = []
        for i, c in enumerate(self.components):
            for src, lab, dst in c.transitions:
                if src == s[i]:
                    out.append((lab, s[:i] + (dst,) + s[i + 1:]))
        return out

    def deadlocks(self) -> Set[State]:
        return {s for s in self.global_states() if not self.enabled(s)}

    def pairs(self) -> List[Pair]:
        if self.candidates is not None:
            return sorted(self.candidates)
        acts = self.actions
        return [(a, b) for a in acts for b in acts]


@dataclass(frozen=True)
class Template:
    """A guard plus one selector per bit of each constrained component."""

    name: str
    components: Tuple[int, ...]


def _bits(n: int) -> int:
    return max(1, (n - 1).bit_length())


def _index(comp: Component, state: int) -> int:
    return comp.states.index(state)


@dataclass
class PriorityEncoding:
    system: ComponentSystem
    templates: Tuple[Template, ...]
    problem: EFProblem
    prio: Dict[Pair, Var]
    guard: Dict[str, Var]
    selectors: Dict[str, Dict[Tuple[int, int], Var]]
    selectors_next: Dict[str, Dict[Tuple[int, int], Var]]
    x: Dict[Tuple[int, int], Var]
    x_next: Dict[Tuple[int, int], Var]

    # -- state encodings -------------------------------------------------
    def _state_formula(self, s: State, xs: Mapping[Tuple[int, int], Var]) -> Formula:
        lits = []
        for i, comp in enumerate(self.system.components):
            k = _index(comp, s[i])
            for b in range(_bits(len(comp.states))):
                v = BoolVar(xs[(i, b)].id)
                lits.append(v if (k >> b) & 1 else Not(v))
        return conj(lits)

    def in_inv(self, primed: bool = False) -> Formula:
        xs = self.x_next if primed else self.x
        sels = self.selectors_next if primed else self.selectors
        alts = []
        for t in self.templates:
            match = [
                Iff(BoolVar(xs[key].id), BoolVar(sel.id)) for key, sel in sels[t.name].items()
            ]
            alts.append(conj([BoolVar(self.guard[t.name].id)] + match))
        return disj(alts)

    def tran(self, action: str) -> Formula:
        i = self.system.owner(action)
        comp = self.system.components[i]
        options = []
        for src, lab, dst in comp.transitions:
            if lab != action:
                continue
            parts = []
            ks, kd = _index(comp, src), _index(comp, dst)
            for b in range(_bits(len(comp.states))):
                v, w = BoolVar(self.x[(i, b)].id), BoolVar(self.x_next[(i, b)].id)
                parts.append(v if (ks >> b) & 1 else Not(v))
                parts.append(w if (kd >> b) & 1 else Not(w))
            for j, other in enumerate(self.system.components):
                if j == i:
                    continue
                for b in range(_bits(len(other.states))):
                    parts.append(Iff(BoolVar(self.x[(j, b)].id), BoolVar(self.x_next[(j, b)].id)))
            options.append(conj(parts))
        return disj(options)

    def enabled(self, action: str) -> Formula:
        i = self.system.owner(action)
        comp = self.system.components[i]
        srcs = sorted({src for src, lab, _ in comp.transitions if lab == action})
        alts = []
        for src in srcs:
            k = _index(comp, src)
            lits = []
            for b in range(_bits(len(comp.states))):
                v = BoolVar(self.x[(i, b)].id)
                lits.append(v if (k >> b) & 1 else Not(v))
            alts.append(conj(lits))
        return disj(alts)

    # -- decoding --------------------------------------------------------
    def decode(self, witness: Mapping[int, Value]) -> "PrioritySolution":
        prios = frozenset(p for p, v in self.prio.items() if witness.get(v.id, False))
        used = {t.name: bool(witness.get(self.guard[t.name].id, False)) for t in self.templates}
        tmpl = {
            t.name: {key: bool(witness.get(v.id, False)) for key, v in self.selectors[t.name].items()}
            for t in self.templates
        }
        inv = set()
        for s in self.system.global_states():
            for t in self.templates:
                if not used[t.name]:
                    continue
                ok = True
                for (i, b), val in tmpl[t.name].items():
                    k = _index(self.system.components[i], s[i])
                    if bool((k >> b) & 1) != val:
                        ok = False
                if ok:
                    inv.add(s)
        assignment = {v.id: witness[v.id] for v in self.problem.exists_vars if v.id in witness}
        return PrioritySolution(transitive_closure(prios), frozenset(inv), used, tmpl, assignment)

    def witness(
        self,
        priorities: Iterable[Pair],
        used: Mapping[str, bool],
        selectors: Mapping[str, Mapping[Tuple[int, int], bool]] | None = None,
    ) -> Dict[int, bool]:
        """Exists assignment from a priority set and template choice."""
        chosen = set(priorities)
        out: Dict[int, bool] = {v.id: (p in chosen) for p, v in self.prio.items()}
        selectors = selectors or {}
        for t in self.templates:
            out[self.guard[t.name].id] = bool(used.get(t.name, False))
            for key, v in self.selectors[t.name].items():
                val = bool(selectors.get(t.name, {}).get(key, False))
                out[v.id] = val
                out[self.selectors_next[t.name][key].id] = val
        return out


@dataclass(frozen=True)
class PrioritySolution:
    priorities: FrozenSet[Pair]
    invariant: FrozenSet[State]
    used: Dict[str, bool]
    templates: Dict[str, Dict[Tuple[int, int], bool]]
    assignment: Dict[int, Value] = field(default_factory=dict)


def transitive_closure(pairs: Iterable[Pair]) -> FrozenSet[Pair]:
    rel = set(pairs)
    while True:
        extra = {(a, d) for a, b in rel for c, d in rel if b == c} - rel
        if not extra:
            return frozenset(rel)
        rel |= extra


def encode_priority(system: ComponentSystem, templates: Sequence[Template]) -> PriorityEncoding:
    if not templates:
        raise EncodingError("at least one template is required")
    pool = VarPool()
    pairs = system.pairs()
    prio = {p: pool.exists_var(f"{p[0]}<{p[1]}", Bool) for p in pairs}
    guard: Dict[str, Var] = {}
    sels: Dict[str, Dict[Tuple[int, int], Var]] = {}
    sels_next: Dict[str, Dict[Tuple[int, int], Var]] = {}
    for t in templates:
        guard[t.name] = pool.exists_var(f"{t.name}_val", Bool)
        sels[t.name] = {}
        for i in t.components:
            for b in range(_bits(len(system.components[i].states))):
                sels[t.name][(i, b)] = pool.exists_var(f"{t.name}_{i + 1}" + (f"_{b}" if b else ""), Bool)
        sels_next[t.name] = {}
        for key in sels[t.name]:
            sels_next[t.name][key] = pool.exists_var(sels[t.name][key].name + "'", Bool)
    xs: Dict[Tuple[int, int], Var] = {}
    xs_next: Dict[Tuple[int, int], Var] = {}
    for i, comp in enumerate(system.components):
        for b in range(_bits(len(comp.states))):
            suffix = f"{i + 1}" + (f"_{b}" if b else "")
            xs[(i, b)] = pool.forall_var(f"x{suffix}", Bool)
            xs_next[(i, b)] = pool.forall_var(f"x{suffix}'", Bool)
    enc = PriorityEncoding(system, tuple(templates), None, prio, guard, sels, sels_next, xs, xs_next)  # type: ignore[arg-type]

    p = lambda pair: BoolVar(prio[pair].id)  # noqa: E731
    cond: List[Formula] = []
    # primed and unprimed templates agree
    for t in templates:
        for key, v in sels[t.name].items():
            cond.append(Iff(BoolVar(v.id), BoolVar(sels_next[t.name][key].id)))
    cond.append(disj(BoolVar(guard[t.name].id) for t in templates))
    # strict partial order
    acts = system.actions
    for a in acts:
        if (a, a) in prio:
            cond.append(Not(p((a, a))))
    for a, b, c in itertools.product(acts, repeat=3):
        if (a, b) in prio and (b, c) in prio and (a, c) in prio and len({a, b, c}) > 1:
            cond.append(Implies(conj([p((a, b)), p((b, c))]), p((a, c))))
    for pair in sorted(system.forbidden):
        if pair in prio:
            cond.append(Not(p(pair)))

    inv, inv_next = enc.in_inv(False), enc.in_inv(True)
    body: List[Formula] = [Implies(enc._state_formula(system.initial, xs), inv)]
    bad = set(system.risk) | system.deadlocks()
    for s in sorted(bad):
        body.append(Implies(enc._state_formula(s, xs), Not(inv)))
    moves = []
    for a in acts:
        blockers = [
            Not(conj([p((a, b)), enc.enabled(b)])) for b in acts if b != a and (a, b) in prio
        ]
        moves.append(conj([enc.tran(a)] + blockers))
    body.append(Implies(conj([inv, disj(moves)]), inv_next))
    enc.problem = pool.problem(conj(cond + body))
    return enc


# ---------------------------------------------------------------------------
# independent oracle


@dataclass(frozen=True)
class OracleResult:
    status: str  # "safe", "unsafe" or "deadlock"
    trace: Tuple[State, ...] = ()
    state: Optional[State] = None
    reachable: FrozenSet[State] = frozenset()


def allowed_moves(system: ComponentSystem, prios: FrozenSet[Pair], s: State) -> List[Tuple[str, State]]:
    en = system.enabled(s)
    labels = {lab for lab, _ in en}
    return [(lab, t) for lab, t in en if not any((lab, b) in prios for b in labels)]


def oracle_priority(system: ComponentSystem, priorities: Iterable[Pair]) -> OracleResult:
    """Explicit reachability of the product under priority semantics."""
    prios = transitive_closure(priorities)
    start = system.initial
    parent: Dict[State, Optional[State]] = {start: None}
    queue = deque([start])
    while queue:
        s = queue.popleft()
        if s in system.risk:
            trace = []
            cur: Optional[State] = s
            while cur is not None:
                trace.append(cur)
                cur = parent[cur]
            return OracleResult("unsafe", tuple(reversed(trace)), s, frozenset(parent))
        moves = allowed_moves(system, prios, s)
        if not moves:
            return OracleResult("deadlock", (), s, frozenset(parent))
        for _, t in moves:
            if t not in parent:
                parent[t] = s
                queue.append(t)
    return OracleResult("safe", (), None, frozenset(parent))


# ---------------------------------------------------------------------------
# the two-component resource example


def resource_system(channel: bool = False) -> ComponentSystem:
    """Two components sharing an exclusive resource.

    ``a``/``c`` acquire and ``b``/``d`` release; ``e`` is an idle self-loop
    of the first component.  With ``channel`` the priorities ``alpha < beta``
    with ``alpha`` in {a, b, c} and ``beta`` in {c, d} are forbidden.
    """
    c1 = Component("C1", (0, 1), 0, ((0, "a", 1), (1, "b", 0), (0, "e", 0)))
    c2 = Component("C2", (0, 1), 0, ((0, "c", 1), (1, "d", 0)))
    forbidden = frozenset((x, y) for x in "abc" for y in "cd") if channel else frozenset()
    return ComponentSystem((c1, c2), frozenset({(1, 1)}), None, forbidden)


RESOURCE_TEMPLATES = (Template("m", (0,)), Template("n", (0, 1)))
