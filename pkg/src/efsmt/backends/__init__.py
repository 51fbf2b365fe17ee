"""Quantifier-free backends and the solver-session interface."""

from .enum import EnumBackend
from .external import ExternalBackend
from .linear import LinearBackend, NonlinearAtom
from .session import (
    Backend,
    CheckResult,
    Sat,
    SessionError,
    SolverSession,
    Unknown,
    Unsat,
    UnsupportedSort,
    complete,
    generalize_model,
)

__all__ = [
    "Backend",
    "CheckResult",
    "EnumBackend",
    "ExternalBackend",
    "LinearBackend",
    "NonlinearAtom",
    "Sat",
    "SessionError",
    "SolverSession",
    "Unknown",
    "Unsat",
    "UnsupportedSort",
    "complete",
    "generalize_model",
]
