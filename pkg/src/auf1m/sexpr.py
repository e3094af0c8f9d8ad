"""Minimal s-expression reader shared by the formula, structure and forest formats."""

from __future__ import annotations

from dataclasses import dataclass


class ParseError(ValueError):
    """Malformed input, annotated with a 1-based line/column position."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.message = message
        self.line = line
        self.col = col
        where = f"{line}:{col}: " if line else ""
        super().__init__(f"{where}{message}")


@dataclass(frozen=True)
class Symbol:
    text: str
    line: int
    col: int

    def __str__(self) -> str:
        return self.text


class SList(list):
    """A parenthesised list remembering where it opened."""

    def __init__(self, items=(), line: int = 0, col: int = 0):
        super().__init__(items)
        self.line = line
        self.col = col


def tokenize(text: str):
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
        elif ch.isspace():
            col += 1
            i += 1
        elif ch == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif ch in "()":
            yield ch, line, col
            col += 1
            i += 1
        else:
            start, start_col = i, col
            while i < n and not text[i].isspace() and text[i] not in "();":
                i += 1
                col += 1
            yield text[start:i], line, start_col


def read_all(text: str) -> list:
    """Read every top-level s-expression in ``text``."""
    stack: list[SList] = []
    top: list = []
    for tok, line, col in tokenize(text):
        if tok == "(":
            stack.append(SList(line=line, col=col))
        elif tok == ")":
            if not stack:
                raise ParseError("unbalanced ')'", line, col)
            done = stack.pop()
            (stack[-1] if stack else top).append(done)
        else:
            (stack[-1] if stack else top).append(Symbol(tok, line, col))
    if stack:
        s = stack[-1]
        raise ParseError("unclosed '('", s.line, s.col)
    return top


def where(node) -> tuple[int, int]:
    return getattr(node, "line", 0), getattr(node, "col", 0)


def expect_list(node, what: str) -> SList:
    if not isinstance(node, SList):
        raise ParseError(f"expected {what}, got atom {node}", *where(node))
    return node


def expect_symbol(node, what: str) -> str:
    if not isinstance(node, Symbol):
        raise ParseError(f"expected {what}, got a list", *where(node))
    return node.text


def expect_int(node, what: str) -> int:
    text = expect_symbol(node, what)
    try:
        value = int(text)
    except ValueError:
        raise ParseError(f"expected {what}, got {text!r}", *where(node)) from None
    if value < 0:
        raise ParseError(f"{what} must be non-negative", *where(node))
    return value
