"""Solver sessions with push/pop contexts over pluggable QF backends."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Protocol, Sequence, Union

from ..ir import (
    Formula,
    IRError,
    Value,
    Var,
    free_vars,
    negate_to_nnf,
    substitute,
)


class SessionError(RuntimeError):
    pass


class UnsupportedSort(SessionError):
    pass


@dataclass(frozen=True)
class Sat:
    model: Dict[int, Value]


@dataclass(frozen=True)
class Unsat:
    pass


@dataclass(frozen=True)
class Unknown:
    reason: str


CheckResult = Union[Sat, Unsat, Unknown]


class Backend(Protocol):
    name: str

    def check(self, formulas: Sequence[Formula], variables: Sequence[Var]) -> CheckResult:
        ...


@dataclass
class SessionStats:
    checks: int = 0
    conflicts: int = 0
    nodes: int = 0


def complete(model: Mapping[int, Value], variables: Sequence[Var]) -> Dict[int, Value]:
    """Fill don't-care variables with their domain lower bounds."""
    out = dict(model)
    for v in variables:
        if v.id not in out:
            out[v.id] = v.sort.lower
    return out


class SolverSession:
    """A stack of asserted formulas and variable bindings.

    ``fix`` binds variables to constants inside the current frame; bound
    variables are substituted away before the backend sees the assertions.
    """

    def __init__(self, variables: Sequence[Var], backend: Backend):
        self.variables = list(variables)
        self.backend = backend
        self._frames: List[List[Formula]] = [[]]
        self._bindings: List[Dict[int, Value]] = [{}]
        self.stats = SessionStats()

    # context stack ----------------------------------------------------
    def push(self) -> None:
        self._frames.append([])
        self._bindings.append({})

    def pop(self) -> None:
        if len(self._frames) == 1:
            raise SessionError("pop without matching push")
        self._frames.pop()
        self._bindings.pop()

    @property
    def depth(self) -> int:
        return len(self._frames) - 1

    def add(self, f: Formula) -> None:
        known = {v.id for v in self.variables}
        extra = free_vars(f) - known
        if extra:
            raise SessionError(f"formula mentions undeclared variables {sorted(extra)}")
        self._frames[-1].append(f)

    def fix(self, binding: Mapping[int, Value]) -> None:
        self._bindings[-1].update(binding)

    def assertions(self) -> List[Formula]:
        return [f for frame in self._frames for f in frame]

    def bindings(self) -> Dict[int, Value]:
        out: Dict[int, Value] = {}
        for b in self._bindings:
            out.update(b)
        return out

    # checking ---------------------------------------------------------
    def check(self) -> CheckResult:
        self.stats.checks += 1
        bound = self.bindings()
        for v in self.variables:
            if v.id in bound and not v.sort.contains(bound[v.id]):
                self.stats.conflicts += 1
                return Unsat()
        formulas = [substitute(f, bound) for f in self.assertions()]
        free = [v for v in self.variables if v.id not in bound]
        res = self.backend.check(formulas, free)
        self.stats.nodes += getattr(self.backend, "last_nodes", 0)
        if isinstance(res, Unsat):
            self.stats.conflicts += 1
        if isinstance(res, Sat):
            model = dict(res.model)
            model.update(bound)
            return Sat(model)
        return res

    def fresh(self) -> "SolverSession":
        return SolverSession(self.variables, self.backend)


def generalize_model(
    session: SolverSession,
    model: Mapping[int, Value],
    goal: Formula,
    variables: Optional[Sequence[Var]] = None,
) -> Dict[int, Value]:
    """Drop bindings whose every value keeps ``goal`` true.

    Variables are visited in declaration order.  For each, the negation of
    ``goal`` is checked with the remaining bindings fixed; if it is
    unsatisfiable the variable is a don't-care and is dropped for good.
    Returns a partial model whose every completion satisfies ``goal``.
    """
    variables = list(variables if variables is not None else session.variables)
    current = {v.id: model[v.id] for v in variables if v.id in model}
    occurring = free_vars(goal)
    neg = negate_to_nnf(goal)
    for v in variables:
        if v.id not in current:
            continue
        trial = {k: x for k, x in current.items() if k != v.id}
        if v.id not in occurring:
            current = trial
            continue
        aux = SolverSession(variables, session.backend)
        aux.add(neg)
        aux.fix(trial)
        try:
            res = aux.check()
        except (SessionError, IRError):
            continue
        if isinstance(res, Unsat):
            current = trial
    return current
