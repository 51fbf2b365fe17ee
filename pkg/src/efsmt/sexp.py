"""Minimal s-expression reader with source positions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple, Union


class SexpError(ValueError):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {msg}")
        self.msg = msg
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Atom:
    text: str
    line: int
    col: int


@dataclass(frozen=True)
class SList:
    items: Tuple["Sexp", ...]
    line: int
    col: int


Sexp = Union[Atom, SList]


def _tokens(text: str):
    line, col, i = 1, 1, 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line, col, i = line + 1, 1, i + 1
        elif ch.isspace():
            col, i = col + 1, i + 1
        elif ch == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif ch in "()":
            yield ch, line, col
            col, i = col + 1, i + 1
        elif ch == "|":
            j = text.find("|", i + 1)
            if j < 0:
                raise SexpError("unterminated quoted symbol", line, col)
            yield text[i + 1:j], line, col
            col += j + 1 - i
            i = j + 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in "();":
                j += 1
            yield text[i:j], line, col
            col += j - i
            i = j


def parse_all(text: str) -> List[Sexp]:
    stack: List[Tuple[list, int, int]] = []
    out: List[Sexp] = []
    for tok, line, col in _tokens(text):
        if tok == "(":
            stack.append(([], line, col))
        elif tok == ")":
            if not stack:
                raise SexpError("unbalanced ')'", line, col)
            items, l0, c0 = stack.pop()
            node = SList(tuple(items), l0, c0)
            (stack[-1][0] if stack else out).append(node)
        else:
            node = Atom(tok, line, col)
            (stack[-1][0] if stack else out).append(node)
    if stack:
        _, l0, c0 = stack[-1]
        raise SexpError("unclosed '('", l0, c0)
    return out


def to_text(s: Sexp) -> str:
    if isinstance(s, Atom):
        return s.text
    return "(" + " ".join(to_text(x) for x in s.items) + ")"
