"""Exhaustive search over finite domains with DPLL-style pruning.

Variables are assigned in declaration order with values ascending
(``False`` before ``True``), so the first model found is the
lexicographically smallest one.  At every node the formula is simplified
under the current binding; top-level literals force boolean values and
top-level single-variable comparisons filter numeric domains.
"""

from __future__ import annotations

from typing import Dict, List, Optional, Sequence

from ..ir import (
    FALSE,
    TRUE,
    And,
    BoolVar,
    Cmp,
    Formula,
    Not,
    RealSort,
    Value,
    Var,
    conj,
    simplify,
    substitute,
)
from .session import Sat, Unsat, UnsupportedSort


def _conjuncts(f: Formula) -> List[Formula]:
    return list(f.args) if isinstance(f, And) else [f]


class EnumBackend:
    name = "enum"

    def __init__(self):
        self.last_nodes = 0

    def check(self, formulas: Sequence[Formula], variables: Sequence[Var]):
        for v in variables:
            if isinstance(v.sort, RealSort):
                raise UnsupportedSort(f"enumeration needs a finite sort for {v.name}")
        self.last_nodes = 0
        self._vars = list(variables)
        self._domains = {v.id: v.sort.values() for v in variables}
        root = simplify(conj(list(formulas)))
        model = self._search(root, {}, 0)
        return Unsat() if model is None else Sat(model)

    def _propagate(self, f: Formula, binding: Dict[int, Value]) -> Optional[Formula]:
        """Assign forced literals until fixpoint; None signals a conflict."""
        while True:
            if f == FALSE:
                return None
            forced: Dict[int, Value] = {}
            for c in _conjuncts(f):
                if isinstance(c, BoolVar):
                    val, var = True, c.var
                elif isinstance(c, Not) and isinstance(c.arg, BoolVar):
                    val, var = False, c.arg.var
                else:
                    continue
                if forced.get(var, val) != val:
                    return None
                forced[var] = val
            if not forced:
                return f
            binding.update(forced)
            f = simplify(substitute(f, forced))

    def _filter(self, f: Formula, v: Var) -> List[Value]:
        values = self._domains[v.id]
        unary = [
            c for c in _conjuncts(f)
            if isinstance(c, Cmp) and c.poly.variables() == {v.id}
        ]
        if not unary:
            return values
        return [x for x in values if all(c.holds({v.id: x}) for c in unary)]

    def _search(self, f: Formula, binding: Dict[int, Value], i: int):
        self.last_nodes += 1
        binding = dict(binding)
        f = self._propagate(f, binding)
        if f is None:
            return None
        if f == TRUE:
            return binding
        while i < len(self._vars) and self._vars[i].id in binding:
            i += 1
        if i == len(self._vars):
            return None  # unreachable for well-formed input: no free variables left
        v = self._vars[i]
        for x in self._filter(f, v):
            g = simplify(substitute(f, {v.id: x}))
            if g == FALSE:
                continue
            binding[v.id] = x
            found = self._search(g, binding, i + 1)
            if found is not None:
                return found
            del binding[v.id]
        return None
