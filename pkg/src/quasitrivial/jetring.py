"""Exact expressions in the jet variables of one dependent variable u(x).

A :class:`JetExpr` is a finite sum of rational multiples of monomials.  A
monomial is a product of integer powers of *atoms*:

* ``u_k``         jet variables (negative powers allowed),
* ``phi^(j)(u)``  formal u-derivatives of an uninterpreted function,
* ``log(a)``      logarithm of a single jet variable or function atom
                  (non-negative powers only),
* ``int(e)``      a fixed formal u-antiderivative of an expression ``e``
                  that depends on u alone,
* ``eps``         the deformation parameter, a constant for every derivation.

Monomials are stored as sorted tuples of ``(atom, exponent)`` pairs, so two
equal expressions always have identical term dictionaries.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from math import comb, factorial
from typing import Iterable, Iterator, Union

from gmpy2 import mpq

JET, FUNC, LOG, INT, PARAM = 0, 1, 2, 3, 4

Atom = tuple
Monomial = tuple
Scalar = Union[int, mpq]
MPQ = type(mpq(0))


class NonHomogeneous:
    """Marker returned by :func:`degree` for mixed-degree expressions."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "NonHomogeneous"


NON_HOMOGENEOUS = NonHomogeneous()


class JetError(ValueError):
    """Raised for operations that leave the supported expression field."""


def jet_atom(k: int) -> Atom:
    return (JET, k)


def func_atom(j: int = 0, name: str = "phi") -> Atom:
    return (FUNC, name, j)


EPS_ATOM: Atom = (PARAM, "eps")


def _mono_mul(m1: Monomial, m2: Monomial) -> Monomial:
    if not m1:
        return m2
    if not m2:
        return m1
    d = dict(m1)
    for a, e in m2:
        n = d.get(a, 0) + e
        if n:
            d[a] = n
        else:
            del d[a]
    return tuple(sorted(d.items()))


def _mono_pow(m: Monomial, n: int) -> Monomial:
    return tuple((a, e * n) for a, e in m) if n else ()


def _mono_without(m: Monomial, atom: Atom, times: int = 1) -> Monomial:
    """Lower the exponent of ``atom`` by ``times``."""
    out = []
    for a, e in m:
        if a == atom:
            if e != times:
                out.append((a, e - times))
        else:
            out.append((a, e))
    return tuple(out)


def _mono_exp(m: Monomial, atom: Atom) -> int:
    for a, e in m:
        if a == atom:
            return e
    return 0


class JetExpr:
    """Immutable canonical sum of rational multiples of monomials."""

    __slots__ = ("_terms", "_hash", "_str")

    def __init__(self, terms: dict | None = None):
        self._terms = terms if terms is not None else {}
        self._hash = None
        self._str = None

    # construction -------------------------------------------------------
    @staticmethod
    def const(c: Scalar) -> "JetExpr":
        c = mpq(c)
        return JetExpr({(): c}) if c else ZERO

    @staticmethod
    def from_atom(atom: Atom, exp: int = 1) -> "JetExpr":
        return JetExpr({((atom, exp),): mpq(1)})

    @staticmethod
    def from_terms(pairs: Iterable[tuple[Monomial, Scalar]]) -> "JetExpr":
        d: dict = {}
        for m, c in pairs:
            n = d.get(m, 0) + c
            if n:
                d[m] = mpq(n)
            else:
                d.pop(m, None)
        return JetExpr(d)

    # inspection ---------------------------------------------------------
    @property
    def terms(self) -> dict:
        return self._terms

    def items(self) -> Iterator[tuple[Monomial, mpq]]:
        return iter(self._terms.items())

    def sorted_items(self) -> list[tuple[Monomial, mpq]]:
        return sorted(self._terms.items(), key=lambda mc: _term_key(mc[0]))

    def is_zero(self) -> bool:
        return not self._terms

    def __bool__(self) -> bool:
        return bool(self._terms)

    def __len__(self) -> int:
        return len(self._terms)

    def is_constant(self) -> bool:
        return not self._terms or (len(self._terms) == 1 and () in self._terms)

    def constant_value(self) -> mpq:
        return self._terms.get((), mpq(0))

    def atoms(self) -> set:
        out = set()
        for m in self._terms:
            for a, _ in m:
                out.add(a)
        return out

    def split_eps(self) -> dict[int, "JetExpr"]:
        """Split by powers of ``eps``."""
        parts: dict[int, dict] = {}
        for m, c in self._terms.items():
            k = _mono_exp(m, EPS_ATOM)
            if k < 0:
                raise JetError("negative power of eps")
            mm = _mono_without(m, EPS_ATOM, k) if k else m
            parts.setdefault(k, {})[mm] = c
        return {k: JetExpr(d) for k, d in parts.items()}

    # arithmetic ---------------------------------------------------------
    def __add__(self, other) -> "JetExpr":
        other = _coerce(other)
        if other is NotImplemented:
            return other
        if not other._terms:
            return self
        if not self._terms:
            return other
        a, b = (self, other) if len(self._terms) >= len(other._terms) else (other, self)
        d = dict(a._terms)
        for m, c in b._terms.items():
            n = d.get(m)
            if n is None:
                d[m] = c
            else:
                n = n + c
                if n:
                    d[m] = n
                else:
                    del d[m]
        return JetExpr(d)

    __radd__ = __add__

    def __neg__(self) -> "JetExpr":
        return JetExpr({m: -c for m, c in self._terms.items()})

    def __sub__(self, other) -> "JetExpr":
        other = _coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other) -> "JetExpr":
        return _coerce(other) - self

    def scale(self, c: Scalar) -> "JetExpr":
        if not c:
            return ZERO
        if c == 1:
            return self
        c = mpq(c)
        return JetExpr({m: v * c for m, v in self._terms.items()})

    def __mul__(self, other) -> "JetExpr":
        if isinstance(other, (int, MPQ)):
            return self.scale(other)
        other = _coerce(other)
        if other is NotImplemented:
            return other
        if not self._terms or not other._terms:
            return ZERO
        if len(other._terms) == 1 and () in other._terms:
            return self.scale(other._terms[()])
        if len(self._terms) == 1 and () in self._terms:
            return other.scale(self._terms[()])
        d: dict = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                m = _mono_mul(m1, m2)
                n = d.get(m)
                if n is None:
                    d[m] = c1 * c2
                else:
                    n = n + c1 * c2
                    if n:
                        d[m] = n
                    else:
                        del d[m]
        return JetExpr(d)

    __rmul__ = __mul__

    def mul_monomial(self, mono: Monomial, c: Scalar = 1) -> "JetExpr":
        c = mpq(c)
        return JetExpr({_mono_mul(m, mono): v * c for m, v in self._terms.items()})

    def inverse(self) -> "JetExpr":
        """Inverse of a single term; logarithms cannot be inverted."""
        if len(self._terms) != 1:
            raise JetError(f"cannot divide by the multi-term expression {self}")
        (m, c), = self._terms.items()
        for a, _ in m:
            if a[0] == LOG or a[0] == INT:
                raise JetError(f"cannot divide by {self}: contains {_atom_str(a)}")
        return JetExpr({_mono_pow(m, -1): 1 / c})

    def __truediv__(self, other) -> "JetExpr":
        if isinstance(other, (int, MPQ)):
            if not other:
                raise ZeroDivisionError("division of a JetExpr by zero")
            return self.scale(1 / mpq(other))
        other = _coerce(other)
        if other is NotImplemented:
            return other
        return self * other.inverse()

    def __rtruediv__(self, other) -> "JetExpr":
        return _coerce(other) * self.inverse()

    def __pow__(self, n: int) -> "JetExpr":
        if n < 0:
            return self.inverse() ** (-n)
        out = ONE
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    # comparison ---------------------------------------------------------
    def __eq__(self, other) -> bool:
        if isinstance(other, JetExpr):
            return self._terms == other._terms
        if isinstance(other, (int, MPQ)):
            return self._terms == ({(): mpq(other)} if other else {})
        return NotImplemented

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    def __lt__(self, other: "JetExpr") -> bool:
        return str(self) < str(other)

    def __str__(self) -> str:
        if self._str is None:
            self._str = format_expr(self)
        return self._str

    def __repr__(self) -> str:
        return f"JetExpr({str(self)!r})"


ZERO = JetExpr({})
ONE = JetExpr({(): mpq(1)})


def _coerce(x) -> JetExpr:
    if isinstance(x, JetExpr):
        return x
    if isinstance(x, (int, MPQ)):
        return JetExpr.const(x)
    if isinstance(x, Fraction):
        return JetExpr.const(mpq(x.numerator, x.denominator))
    return NotImplemented


def as_expr(x) -> JetExpr:
    e = _coerce(x)
    if e is NotImplemented:
        raise TypeError(f"cannot convert {x!r} to JetExpr")
    return e


# ---------------------------------------------------------------------------
# public constructors

@lru_cache(maxsize=None)
def u(k: int = 0) -> JetExpr:
    """The jet variable ``u_k``."""
    if k < 0:
        raise ValueError("jet index must be non-negative")
    return JetExpr.from_atom(jet_atom(k))


@lru_cache(maxsize=None)
def phi(j: int = 0, name: str = "phi") -> JetExpr:
    """``phi^(j)(u)``, the j-th formal u-derivative of the coefficient function."""
    return JetExpr.from_atom(func_atom(j, name))


EPS = JetExpr.from_atom(EPS_ATOM)


def log(e: JetExpr) -> JetExpr:
    """Logarithm of a single monomial with unit coefficient, expanded into log atoms."""
    e = as_expr(e)
    if len(e.terms) != 1:
        raise JetError(f"log of a sum is not supported: log({e})")
    (m, c), = e.terms.items()
    if c != 1:
        raise JetError(f"log of a non-unit coefficient is not supported: log({e})")
    if not m:
        return ZERO
    out = ZERO
    for a, k in m:
        if a[0] not in (JET, FUNC):
            raise JetError(f"log of {_atom_str(a)} is not supported")
        out = out + JetExpr.from_atom((LOG, a)).scale(k)
    return out


def formal_antiderivative(e: JetExpr) -> JetExpr:
    """A fixed u-antiderivative symbol of a single-variable expression ``e``."""
    e = as_expr(e)
    if order(e) > 0:
        raise JetError(f"formal antiderivatives need an integrand in u alone, got {e}")
    out = ZERO
    for m, c in e.terms.items():
        mono = JetExpr({m: mpq(1)})
        out = out + JetExpr.from_atom((INT, str(mono), mono)).scale(c)
    return out


# ---------------------------------------------------------------------------
# atom calculus

def _atom_depends(atom: Atom, k: int) -> bool:
    kind = atom[0]
    if kind == JET:
        return atom[1] == k
    if kind == FUNC or kind == INT:
        return k == 0
    if kind == LOG:
        return _atom_depends(atom[1], k)
    return False


def _atom_partial(atom: Atom, k: int) -> JetExpr:
    """Partial derivative of an atom with respect to ``u_k``."""
    kind = atom[0]
    if kind == JET:
        return ONE if atom[1] == k else ZERO
    if kind == FUNC:
        return JetExpr.from_atom((FUNC, atom[1], atom[2] + 1)) if k == 0 else ZERO
    if kind == INT:
        return atom[2] if k == 0 else ZERO
    if kind == LOG:
        inner = atom[1]
        d = _atom_partial(inner, k)
        if not d:
            return ZERO
        return d.mul_monomial(((inner, -1),))
    return ZERO


@lru_cache(maxsize=4096)
def _atom_dx(atom: Atom) -> JetExpr:
    kind = atom[0]
    if kind == JET:
        return u(atom[1] + 1)
    if kind == FUNC:
        return JetExpr({(((JET, 1), 1), ((FUNC, atom[1], atom[2] + 1), 1)): mpq(1)})
    if kind == INT:
        return atom[2] * u(1)
    if kind == LOG:
        inner = atom[1]
        return _atom_dx(inner).mul_monomial(((inner, -1),))
    return ZERO


def _term_key(m: Monomial):
    return (_mono_degree(m), m)


def _mono_degree(m: Monomial) -> int:
    return sum(a[1] * e for a, e in m if a[0] == JET)


# ---------------------------------------------------------------------------
# derivations

def total_derivative(e: JetExpr) -> JetExpr:
    """The total x-derivative ``d/dx``."""
    return _dx(as_expr(e))


@lru_cache(maxsize=65536)
def _dx(e: JetExpr) -> JetExpr:
    d: dict = {}
    for m, c in e.terms.items():
        for a, k in m:
            if a[0] == PARAM:
                continue
            if a[0] == JET:
                nxt = (JET, a[1] + 1)
                mm = _mono_mul(_mono_without(m, a), ((nxt, 1),))
                v = c * k
                n = d.get(mm, 0) + v
                if n:
                    d[mm] = n
                else:
                    d.pop(mm, None)
                continue
            base = _mono_without(m, a)
            for m2, c2 in _atom_dx(a).terms.items():
                mm = _mono_mul(base, m2)
                n = d.get(mm, 0) + c * k * c2
                if n:
                    d[mm] = n
                else:
                    d.pop(mm, None)
    return JetExpr(d)


def dx_n(e: JetExpr, n: int) -> JetExpr:
    for _ in range(n):
        e = _dx(e)
    return e


def partial_jet(e: JetExpr, k: int) -> JetExpr:
    """Partial derivative with respect to ``u_k`` (for k = 0 the chain rule
    through ``phi(u)`` and formal antiderivatives applies)."""
    if k < 0:
        raise ValueError("jet index must be non-negative")
    return _partial(as_expr(e), k)


@lru_cache(maxsize=65536)
def _partial(e: JetExpr, k: int) -> JetExpr:
    d: dict = {}
    target = (JET, k)
    for m, c in e.terms.items():
        for a, p in m:
            if a == target:
                mm = _mono_without(m, a)
                n = d.get(mm, 0) + c * p
                if n:
                    d[mm] = n
                else:
                    d.pop(mm, None)
            elif a[0] != JET and a[0] != PARAM and _atom_depends(a, k):
                base = _mono_without(m, a)
                for m2, c2 in _atom_partial(a, k).terms.items():
                    mm = _mono_mul(base, m2)
                    n = d.get(mm, 0) + c * p * c2
                    if n:
                        d[mm] = n
                    else:
                        d.pop(mm, None)
    return JetExpr(d)


def order(e: JetExpr) -> int:
    """Highest jet index the expression depends on; -1 for u-independent ones."""
    best = -1
    for m in as_expr(e).terms:
        for a, _ in m:
            best = max(best, _atom_order(a))
    return best


def _atom_order(a: Atom) -> int:
    kind = a[0]
    if kind == JET:
        return a[1]
    if kind == FUNC or kind == INT:
        return 0
    if kind == LOG:
        return _atom_order(a[1])
    return -1


def degree(e: JetExpr):
    """Common standard degree of all terms (``u_k`` has degree k), or
    :data:`NON_HOMOGENEOUS`.  The zero expression has no degree (``None``)."""
    degs = {_mono_degree(m) for m in as_expr(e).terms}
    if not degs:
        return None
    if len(degs) > 1:
        return NON_HOMOGENEOUS
    return degs.pop()


def homogeneous_parts(e: JetExpr) -> dict[int, JetExpr]:
    parts: dict[int, dict] = {}
    for m, c in e.terms.items():
        parts.setdefault(_mono_degree(m), {})[m] = c
    return {k: JetExpr(v) for k, v in parts.items()}


def variational_derivative(f: JetExpr) -> JetExpr:
    """Euler operator ``sum_s (-d/dx)^s d f / d u_s``."""
    f = as_expr(f)
    out = ZERO
    for s in range(order(f), -1, -1):
        out = _partial(f, s) - _dx(out)
    return out


def is_total_derivative(e: JetExpr) -> bool:
    return variational_derivative(e).is_zero()


def evolutionary_derivative(X: JetExpr, e: JetExpr) -> JetExpr:
    """``sum_s (d^s X / dx^s) d e / d u_s``: the derivative of ``e`` along the flow ``u_t = X``."""
    out = ZERO
    dX = as_expr(X)
    for s in range(order(e) + 1):
        p = _partial(e, s)
        if p:
            out = out + dX * p
        dX = _dx(dX)
    return out


# ---------------------------------------------------------------------------
# integration

def _integrate_power_log(a: int, b: int) -> list[tuple[int, int, mpq]]:
    """Antiderivative of ``t^a log(t)^b`` as (power, logpower, coefficient) triples."""
    out: list[tuple[int, int, mpq]] = []
    coef = mpq(1)
    while True:
        if a == -1:
            out.append((0, b + 1, coef / (b + 1)))
            return out
        out.append((a + 1, b, coef / (a + 1)))
        if b == 0:
            return out
        coef = -coef * b / (a + 1)
        b -= 1


def _integrate_wrt_atom(e: JetExpr, t: Atom) -> JetExpr:
    """Antiderivative in the atom ``t``, every other atom held fixed."""
    logt = (LOG, t)
    d: dict = {}
    for m, c in e.terms.items():
        a = b = 0
        rest = []
        for at, k in m:
            if at == t:
                a = k
            elif at == logt:
                b = k
            else:
                rest.append((at, k))
        rest = tuple(rest)
        for p, q, cc in _integrate_power_log(a, b):
            extra = []
            if p:
                extra.append((t, p))
            if q:
                extra.append((logt, q))
            mm = _mono_mul(rest, tuple(sorted(extra)))
            n = d.get(mm, 0) + c * cc
            if n:
                d[mm] = n
            else:
                d.pop(mm, None)
    return JetExpr(d)


def _is_function_atom(a: Atom) -> bool:
    return a[0] in (FUNC, INT) or (a[0] == LOG and a[1][0] == FUNC)


def _integrate_u(h: JetExpr) -> JetExpr:
    """Antiderivative in u of an expression in u, phi^(j)(u) and formal antiderivatives.

    Terms in u alone are integrated by the power/log rules.  Function-bearing
    parts linear in the highest derivative phi^(n), n >= 1, are integrated by
    parts; whatever is left becomes a formal antiderivative symbol.
    """
    if order(h) > 0:
        raise JetError(f"u-quadrature needs an integrand in u alone, got {h}")
    g = ZERO
    u0 = (JET, 0)
    while h:
        plain: dict = {}
        func: dict = {}
        for m, c in h.terms.items():
            (func if any(_is_function_atom(a) for a, _ in m) else plain)[m] = c
        if plain:
            g = g + _integrate_wrt_atom(JetExpr(plain), u0)
        if not func:
            break
        fpart = JetExpr(func)
        n = max((a[2] for m in func for a, _ in m if a[0] == FUNC), default=-1)
        if n < 1:
            g = g + formal_antiderivative(fpart)
            break
        names = {a[1] for m in func for a, _ in m if a[0] == FUNC}
        if len(names) > 1:
            g = g + formal_antiderivative(fpart)
            break
        top = (FUNC, names.pop(), n)
        linear: dict = {}
        stuck: dict = {}
        lower: dict = {}
        for m, c in func.items():
            k = _mono_exp(m, top)
            if _mono_exp(m, (LOG, top)):
                stuck[m] = c
            elif k == 1:
                linear[_mono_without(m, top)] = c
            elif k == 0:
                lower[m] = c
            else:
                stuck[m] = c
        if stuck:
            g = g + formal_antiderivative(JetExpr(stuck))
        if not linear:
            h = JetExpr(lower)
            if not lower:
                break
            # only lower-order function terms remain; loop reduces n
            continue
        g0 = _integrate_wrt_atom(JetExpr(linear), (FUNC, top[1], n - 1))
        g = g + g0
        h = JetExpr(lower) + JetExpr(linear).mul_monomial(((top, 1),)) - _partial(g0, 0)
    return g


def antideriv_top(e: JetExpr, M: int) -> JetExpr:
    """Antiderivative with respect to ``u_M``, all other generators held fixed.

    For ``M = 0`` the integration is a genuine u-quadrature, since phi(u)
    depends on u.
    """
    e = as_expr(e)
    if M == 0:
        return _integrate_u(e)
    for m in e.terms:
        for a, _ in m:
            if a[0] == LOG and a[1] != (JET, M) and _atom_depends(a, M):
                raise JetError(f"cannot integrate {e} in u{M}")
    return _integrate_wrt_atom(e, (JET, M))


def antideriv2_top(e: JetExpr, M: int) -> JetExpr:
    """Double antiderivative ``d^{-2}/du_M^2``; differentiating twice returns ``e``."""
    return antideriv_top(antideriv_top(e, M), M)


def integrate_total(h: JetExpr) -> JetExpr | None:
    """Find ``g`` with ``d/dx g = h`` inside the field, or ``None``.

    Peels off the highest jet variable, which must occur linearly.
    """
    h = as_expr(h)
    g = ZERO
    while h:
        n = order(h)
        if n <= 0:
            return None
        top = (JET, n)
        lin: dict = {}
        rest: dict = {}
        for m, c in h.terms.items():
            if _mono_exp(m, (LOG, top)):
                return None
            k = _mono_exp(m, top)
            if k == 1:
                lin[_mono_without(m, top)] = c
            elif k == 0:
                rest[m] = c
            else:
                return None
        if not lin:
            return None
        g0 = antideriv_top(JetExpr(lin), n - 1)
        g = g + g0
        h = h - _dx(g0)
        if order(h) >= n:
            return None
    return g


# ---------------------------------------------------------------------------
# printing

def _atom_str(a: Atom) -> str:
    kind = a[0]
    if kind == JET:
        return "u" if a[1] == 0 else f"u{a[1]}"
    if kind == FUNC:
        return f"{a[1]}{chr(39) * a[2]}(u)"
    if kind == LOG:
        return f"log({_atom_str(a[1])})"
    if kind == INT:
        return f"int({a[1]})"
    if kind == PARAM:
        return a[1]
    raise JetError(f"unknown atom {a!r}")


def format_monomial(m: Monomial) -> str:
    parts = []
    for a, k in sorted(m, key=_print_key):
        s = _atom_str(a)
        parts.append(s if k == 1 else f"{s}^{k}")
    return "*".join(parts)


def _print_key(ak):
    a, _ = ak
    kind = a[0]
    order_of_kind = {PARAM: 0, FUNC: 1, INT: 2, JET: 3, LOG: 4}[kind]
    return (order_of_kind, str(a))


def format_expr(e: JetExpr) -> str:
    if not e.terms:
        return "0"
    out = []
    for i, (m, c) in enumerate(e.sorted_items()):
        neg = c < 0
        c = -c if neg else c
        ms = format_monomial(m)
        if not ms:
            body = str(c)
        elif c == 1:
            body = ms
        else:
            body = f"{c}*{ms}"
        if i == 0:
            out.append(f"-{body}" if neg else body)
        else:
            out.append(f" - {body}" if neg else f" + {body}")
    return "".join(out)


def binomial(n: int, k: int) -> int:
    """Binomial coefficient, zero outside ``0 <= k <= n``."""
    if k < 0 or n < 0 or k > n:
        return 0
    return comb(n, k)


def binomial_poly(n: int, k: int) -> int:
    """``n(n-1)...(n-k+1)/k!`` for any integer ``n``; zero when ``k < 0``."""
    if k < 0:
        return 0
    num = 1
    for i in range(k):
        num *= n - i
    return num // factorial(k)
