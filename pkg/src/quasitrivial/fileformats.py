"""Text formats for brackets, pencils and transforms.

Bracket/pencil files::

    phi = 1              # or: phi = symbolic
    eps_order = 4
    bracket omega1
    A1 = 1
    bracket omega2
    A0 = 1/2*u1
    A1 = u
    A3 = 1/8*eps^2

Transform files::

    order = 4
    G2 = 1/24*dx(dx(log(u1)))

Blank lines and ``#`` comments are ignored.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .jetring import JetExpr, format_expr, integrate_total, phi, total_derivative
from .multivec import KernelBivector
from .parse import ParseError, parse_expr
from .transform import MiuraTransform, Pencil, kernel_series, series_kernel

_ASSIGN = re.compile(r"^\s*([A-Za-z_][A-Za-z_0-9]*)\s*=\s*(.*)$")
_HEADER = re.compile(r"^\s*bracket\s+(\S+)\s*$")


@dataclass
class BracketFile:
    phi: JetExpr | None = None
    eps_order: int | None = None
    brackets: list[tuple[str, KernelBivector]] = field(default_factory=list)

    def pencil(self, E: int) -> Pencil:
        if len(self.brackets) != 2:
            raise ValueError(f"a pencil needs two brackets, found {len(self.brackets)}")
        return kernel_series(self.brackets[0][1], E), kernel_series(self.brackets[1][1], E)


def _lines(text: str):
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if line.strip():
            yield n, line


def _int_value(value: str, n: int, key: str) -> int:
    v = value.strip()
    if not re.fullmatch(r"\d+", v):
        raise ParseError(f"{key} must be a non-negative integer", n, 1, ("integer",))
    return int(v)


def _rhs(line: str, value: str, n: int, allow_eps: bool) -> JetExpr:
    offset = len(line) - len(value)
    try:
        return parse_expr(value, line=n, allow_eps=allow_eps)
    except ParseError as exc:
        raise ParseError(str(exc).split(": ", 1)[1].split("; expected")[0], n,
                         exc.col + offset, exc.expected) from None


def parse_bracket_file(text: str) -> BracketFile:
    out = BracketFile()
    current: dict[int, JetExpr] | None = None
    name = None

    def close():
        if current is not None:
            n = max(current) + 1 if current else 0
            out.brackets.append((name, KernelBivector(current.get(k, JetExpr()) for k in range(n))))

    for n, line in _lines(text):
        h = _HEADER.match(line)
        if h:
            close()
            name, current = h.group(1), {}
            continue
        a = _ASSIGN.match(line)
        if not a:
            raise ParseError("expected 'bracket <name>' or '<key> = <expr>'", n, 1,
                             ("bracket", "phi", "eps_order", "A<k>"))
        key, value = a.group(1), a.group(2)
        if key == "phi":
            if value.strip() == "symbolic":
                out.phi = phi(0)
            else:
                out.phi = _rhs(line, value, n, allow_eps=False)
        elif key == "eps_order":
            out.eps_order = _int_value(value, n, key)
        elif re.fullmatch(r"A\d+", key):
            if current is None:
                raise ParseError("coefficient outside a bracket block", n, 1, ("bracket",))
            k = int(key[1:])
            if k in current:
                raise ParseError(f"duplicate coefficient {key}", n, 1)
            current[k] = _rhs(line, value, n, allow_eps=True)
        else:
            raise ParseError(f"unknown key {key!r}", n, 1, ("phi", "eps_order", "A<k>"))
    close()
    if not out.brackets:
        raise ParseError("no bracket block found", 1, 1, ("bracket",))
    return out


def format_bracket(name: str, B: KernelBivector) -> str:
    lines = [f"bracket {name}"]
    lines += [f"A{k} = {format_expr(c)}" for k, c in enumerate(B.coeffs) if c]
    return "\n".join(lines)


def format_pencil(pencil: Pencil, phi_expr: JetExpr | None, E: int,
                  names: tuple[str, str] = ("omega1", "omega2")) -> str:
    head = []
    if phi_expr is not None:
        head.append(f"phi = {'symbolic' if phi_expr == phi(0) else format_expr(phi_expr)}")
    head.append(f"eps_order = {E}")
    blocks = [format_bracket(nm, series_kernel(S)) for nm, S in zip(names, pencil)]
    return "\n".join(head + blocks) + "\n"


def parse_transform_file(text: str) -> MiuraTransform:
    E = None
    terms: dict[int, JetExpr] = {}
    for n, line in _lines(text):
        a = _ASSIGN.match(line)
        if not a:
            raise ParseError("expected '<key> = <value>'", n, 1, ("order", "G<k>"))
        key, value = a.group(1), a.group(2)
        if key == "order":
            E = _int_value(value, n, key)
        elif re.fullmatch(r"G\d+", key):
            k = int(key[1:])
            if k == 0:
                raise ParseError("G0 is fixed to the identity", n, 1, ("G<k> with k >= 1",))
            if k in terms:
                raise ParseError(f"duplicate term {key}", n, 1)
            terms[k] = _rhs(line, value, n, allow_eps=False)
        else:
            raise ParseError(f"unknown key {key!r}", n, 1, ("order", "G<k>"))
    if E is None:
        E = max(terms, default=0)
    if any(k > E for k in terms):
        raise ParseError(f"terms beyond order = {E}", 1, 1)
    try:
        return MiuraTransform(terms, E)
    except ValueError as exc:
        raise ParseError(str(exc), 1, 1) from None


def format_dx2(g: JetExpr) -> str:
    """Print ``g`` as ``c*dx(dx(h))`` when a double x-antiderivative exists."""
    h1 = integrate_total(g)
    h = integrate_total(h1) if h1 is not None else None
    if h is None or not h or total_derivative(total_derivative(h)) != g:
        return format_expr(g)
    if len(h.terms) == 1:
        ((mono, c),) = h.terms.items()
        if c != 1:
            inner = h.scale(1 / c)
            return f"{format_expr(JetExpr.const(c))}*dx(dx({format_expr(inner)}))"
    return f"dx(dx({format_expr(h)}))"


def format_transform(T: MiuraTransform) -> str:
    lines = [f"order = {T.order}"]
    for k in sorted(T.terms.coeffs):
        lines.append(f"G{k} = {format_dx2(T.terms[k])}")
    return "\n".join(lines) + "\n"
