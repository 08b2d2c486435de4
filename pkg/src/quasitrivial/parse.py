"""Recursive-descent parser for the expression grammar.

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := '-' factor | atom ('^' ['-'] integer)?
    atom   := integer | 'u' digits? | 'phi' "'"* '(u)' | 'eps'
            | 'log' '(' expr ')' | 'dx' '(' expr ')' | 'int' '(' expr ')'
            | '(' expr ')'

``p/q`` rationals fall out of the division rule.  ``int(e)`` is the formal
u-antiderivative printed for quadratures that have no closed form.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from gmpy2 import mpq

from .jetring import (
    EPS,
    JetError,
    JetExpr,
    formal_antiderivative,
    log,
    phi,
    total_derivative,
    u,
)

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+)|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()']))"
)


class ParseError(ValueError):
    """Syntax error with a 1-based position and the set of acceptable tokens."""

    def __init__(self, message: str, line: int, col: int, expected: tuple[str, ...] = ()):
        self.line = line
        self.col = col
        self.expected = expected
        exp = f"; expected one of: {', '.join(expected)}" if expected else ""
        super().__init__(f"line {line}, column {col}: {message}{exp}")


@dataclass
class _Tok:
    kind: str
    text: str
    pos: int


def _tokenize(text: str, line: int) -> list[_Tok]:
    toks = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            bad = len(text[pos:]) - len(text[pos:].lstrip()) + pos
            raise ParseError(f"unexpected character {text[bad]!r}", line, bad + 1)
        kind = m.lastgroup
        start = m.start(kind)
        toks.append(_Tok(kind, m.group(kind), start))
        pos = m.end()
    toks.append(_Tok("end", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str, line: int):
        self.text = text
        self.line = line
        self.toks = _tokenize(text, line)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def error(self, msg: str, expected: tuple[str, ...] = ()):
        raise ParseError(msg, self.line, self.tok.pos + 1, expected)

    def accept(self, text: str) -> bool:
        if self.tok.text == text and self.tok.kind in ("op", "ident"):
            self.i += 1
            return True
        return False

    def expect(self, text: str):
        if not self.accept(text):
            found = self.tok.text or "end of input"
            self.error(f"found {found!r}", (repr(text),))

    def parse(self) -> JetExpr:
        e = self.expr()
        if self.tok.kind != "end":
            self.error(f"unexpected {self.tok.text!r}", ("'+'", "'-'", "'*'", "'/'", "end of input"))
        return e

    def expr(self) -> JetExpr:
        e = self.term()
        while True:
            if self.accept("+"):
                e = e + self.term()
            elif self.accept("-"):
                e = e - self.term()
            else:
                return e

    def term(self) -> JetExpr:
        e = self.factor()
        while True:
            if self.accept("*"):
                e = e * self.factor()
            elif self.tok.text == "/" and self.tok.kind == "op":
                pos = self.tok
                self.i += 1
                d = self.factor()
                try:
                    e = e / d
                except (JetError, ZeroDivisionError) as exc:
                    raise ParseError(str(exc), self.line, pos.pos + 1) from None
            else:
                return e

    def factor(self) -> JetExpr:
        if self.accept("-"):
            return -self.factor()
        start = self.tok
        e = self.atom()
        if self.accept("^"):
            neg = self.accept("-")
            if self.tok.kind != "num":
                self.error("exponent must be an integer", ("integer",))
            n = int(self.tok.text)
            self.i += 1
            try:
                e = e ** (-n if neg else n)
            except JetError as exc:
                raise ParseError(str(exc), self.line, start.pos + 1) from None
        return e

    def atom(self) -> JetExpr:
        t = self.tok
        expected = ("integer", "u<k>", "phi(u)", "eps", "log(", "dx(", "int(", "'('")
        if t.kind == "num":
            self.i += 1
            return JetExpr.const(mpq(int(t.text)))
        if t.kind == "ident":
            name = t.text
            m = re.fullmatch(r"u(\d*)", name)
            if m:
                self.i += 1
                return u(int(m.group(1)) if m.group(1) else 0)
            if name == "eps":
                self.i += 1
                return EPS
            if name == "phi":
                self.i += 1
                j = 0
                while self.accept("'"):
                    j += 1
                self.expect("(")
                if not (self.tok.kind == "ident" and self.tok.text == "u"):
                    self.error("phi takes the argument u", ("u",))
                self.i += 1
                self.expect(")")
                return phi(j)
            if name in ("log", "dx", "int"):
                self.i += 1
                self.expect("(")
                inner = self.expr()
                self.expect(")")
                try:
                    if name == "log":
                        return log(inner)
                    if name == "dx":
                        return total_derivative(inner)
                    return formal_antiderivative(inner)
                except JetError as exc:
                    raise ParseError(str(exc), self.line, t.pos + 1) from None
            self.error(f"unknown identifier {name!r}", expected)
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        self.error(f"found {t.text or 'end of input'!r}", expected)


def parse_expr(text: str, line: int = 1, allow_eps: bool = False) -> JetExpr:
    """Parse ``text`` into a canonical :class:`JetExpr`."""
    e = _Parser(text, line).parse()
    if not allow_eps and any(a[0] == 4 for a in e.atoms()):
        raise ParseError("eps is only allowed in bracket files", line, 1)
    return e
