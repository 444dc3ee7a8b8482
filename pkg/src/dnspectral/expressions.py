"""Tiny expression language for spatial input functions.

Grammar (whitespace-insensitive):

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := base ('^' factor)?          # '^' is right-associative
    base   := number | 'x' | 'pi' | func '(' expr ')' | '(' expr ')'
    func   := 'sin' | 'cos' | 'exp'

Numbers are plain decimal literals.  The compiled callable accepts floats or
numpy arrays and evaluates elementwise.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["ExpressionError", "parse_expression"]

_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}


class ExpressionError(ValueError):
    """Lexical or syntax error, with the offending position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class _Lexer:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.tokens: list[tuple[str, object, int]] = []
        self._scan()
        self.idx = 0

    def _scan(self):
        text = self.text
        i = 0
        while i < len(text):
            ch = text[i]
            if ch.isspace():
                i += 1
                continue
            if ch.isdigit() or (ch == "." and i + 1 < len(text) and text[i + 1].isdigit()):
                j = i
                seen_dot = False
                while j < len(text) and (text[j].isdigit() or (text[j] == "." and not seen_dot)):
                    if text[j] == ".":
                        seen_dot = True
                    j += 1
                self.tokens.append(("number", float(text[i:j]), i))
                i = j
                continue
            if ch.isalpha():
                j = i
                while j < len(text) and text[j].isalpha():
                    j += 1
                self.tokens.append(("name", text[i:j], i))
                i = j
                continue
            if ch in "+-*/^()":
                self.tokens.append((ch, ch, i))
                i += 1
                continue
            raise ExpressionError(f"unexpected character {ch!r}", i)
        self.tokens.append(("end", None, len(text)))

    def peek(self):
        return self.tokens[self.idx]

    def next(self):
        tok = self.tokens[self.idx]
        self.idx += 1
        return tok


def parse_expression(text: str):
    """Compile the expression to a callable of x on [0, 1]."""
    lex = _Lexer(text)

    def expr():
        node = term()
        while lex.peek()[0] in ("+", "-"):
            op = lex.next()[0]
            rhs = term()
            if op == "+":
                node = (lambda a, b: lambda x: a(x) + b(x))(node, rhs)
            else:
                node = (lambda a, b: lambda x: a(x) - b(x))(node, rhs)
        return node

    def term():
        node = factor()
        while lex.peek()[0] in ("*", "/"):
            op = lex.next()[0]
            rhs = factor()
            if op == "*":
                node = (lambda a, b: lambda x: a(x) * b(x))(node, rhs)
            else:
                node = (lambda a, b: lambda x: a(x) / b(x))(node, rhs)
        return node

    def factor():
        node = base()
        if lex.peek()[0] == "^":
            lex.next()
            rhs = factor()  # right-associative
            node = (lambda a, b: lambda x: a(x) ** b(x))(node, rhs)
        return node

    def base():
        kind, value, pos = lex.next()
        if kind == "number":
            return lambda x, v=value: v * np.ones_like(np.asarray(x, dtype=float))
        if kind == "name":
            if value == "x":
                return lambda x: np.asarray(x, dtype=float)
            if value == "pi":
                return lambda x: math.pi * np.ones_like(np.asarray(x, dtype=float))
            if value in _FUNCS:
                fn = _FUNCS[value]
                k2, _, p2 = lex.next()
                if k2 != "(":
                    raise ExpressionError(f"expected '(' after {value!r}", p2)
                inner = expr()
                k3, _, p3 = lex.next()
                if k3 != ")":
                    raise ExpressionError("expected ')'", p3)
                return (lambda f, a: lambda x: f(a(x)))(fn, inner)
            raise ExpressionError(f"unknown identifier {value!r}", pos)
        if kind == "(":
            inner = expr()
            k2, _, p2 = lex.next()
            if k2 != ")":
                raise ExpressionError("expected ')'", p2)
            return inner
        raise ExpressionError(f"unexpected token {kind!r}", pos)

    node = expr()
    kind, _, pos = lex.peek()
    if kind != "end":
        raise ExpressionError(f"trailing input starting with {kind!r}", pos)

    def evaluate(x):
        arr = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = node(arr)
        if np.isscalar(x) or arr.ndim == 0:
            return float(out)
        return out

    return evaluate
