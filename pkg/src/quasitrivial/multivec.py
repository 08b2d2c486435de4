"""Local multivectors, the Schouten-Nijenhuis bracket and the differentials d_1, d_2.

Two encodings are used side by side:

* kernels: a bivector is the operator ``sum_k A_k d^k``, i.e. the
  distribution ``sum_k A_k(x) delta^(k)(x-y)`` (:class:`KernelBivector`);
* super densities: polynomials in odd variables ``theta_0, theta_1, ...``
  with :class:`JetExpr` coefficients, taken modulo total derivatives
  (:class:`ThetaDensity`).

Sign conventions.  With left theta-derivatives the bracket is

    [P, Q] = int( dP/dtheta * dQ/du + (-1)^p dP/du * dQ/dtheta )

(variational derivatives), a vector field with component X is the density
``X theta_0`` and the bivector with kernel A is ``1/2 sum_k A_k theta_k theta_0``.
These choices make ``[omega, f]`` have component ``sum_k A_k d^k (delta f/delta u)``
and make ``[omega, xi]`` equal ``X(A) - D_X A - A D_X^+``, the two component
formulas the kernel calculus is checked against.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Sequence

from gmpy2 import mpq

from .jetring import (
    ONE,
    ZERO,
    JetExpr,
    as_expr,
    binomial,
    dx_n,
    evolutionary_derivative,
    integrate_total,
    order,
    partial_jet,
    total_derivative,
    u,
    variational_derivative,
    LOG,
    EPS_ATOM,
)

HALF = mpq(1, 2)


# ---------------------------------------------------------------------------
# differential operators

class DiffOp:
    """Scalar differential operator ``sum_k c_k d^k`` with JetExpr coefficients."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Iterable = ()):
        cs = [as_expr(c) for c in coeffs]
        while cs and not cs[-1]:
            cs.pop()
        self.coeffs: tuple[JetExpr, ...] = tuple(cs)

    @classmethod
    def identity(cls):
        return cls((ONE,))

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    def __getitem__(self, k: int) -> JetExpr:
        return self.coeffs[k] if 0 <= k < len(self.coeffs) else ZERO

    def __len__(self) -> int:
        return len(self.coeffs)

    def __iter__(self):
        return iter(self.coeffs)

    def is_zero(self) -> bool:
        return not self.coeffs

    def __bool__(self) -> bool:
        return bool(self.coeffs)

    def _new(self, coeffs):
        return type(self)(coeffs)

    def __add__(self, other: "DiffOp"):
        n = max(len(self), len(other))
        return self._new(self[k] + other[k] for k in range(n))

    def __sub__(self, other: "DiffOp"):
        n = max(len(self), len(other))
        return self._new(self[k] - other[k] for k in range(n))

    def __neg__(self):
        return self._new(-c for c in self.coeffs)

    def scale(self, c):
        if isinstance(c, JetExpr):
            return self._new(c * a for a in self.coeffs)
        return self._new(a.scale(c) for a in self.coeffs)

    def compose(self, other: "DiffOp") -> "DiffOp":
        """Operator product ``self o other``."""
        out: dict[int, JetExpr] = {}
        for i, a in enumerate(self.coeffs):
            if not a:
                continue
            for j, b in enumerate(other.coeffs):
                if not b:
                    continue
                db = b
                for l in range(i + 1):
                    if l:
                        db = total_derivative(db)
                        if not db:
                            break
                    k = i - l + j
                    out[k] = out.get(k, ZERO) + (a * db).scale(binomial(i, l))
        n = max(out) + 1 if out else 0
        return DiffOp(out.get(k, ZERO) for k in range(n))

    def adjoint(self) -> "DiffOp":
        """Formal adjoint ``sum_k (-d)^k o c_k``."""
        out: dict[int, JetExpr] = {}
        for k, c in enumerate(self.coeffs):
            if not c:
                continue
            dc = c
            sign = -1 if k % 2 else 1
            for l in range(k + 1):
                if l:
                    dc = total_derivative(dc)
                    if not dc:
                        break
                out[k - l] = out.get(k - l, ZERO) + dc.scale(sign * binomial(k, l))
        n = max(out) + 1 if out else 0
        return DiffOp(out.get(k, ZERO) for k in range(n))

    def apply(self, f: JetExpr) -> JetExpr:
        out = ZERO
        df = as_expr(f)
        for k, c in enumerate(self.coeffs):
            if k:
                df = total_derivative(df)
            if c and df:
                out = out + c * df
        return out

    def map_coeffs(self, fn):
        return self._new(fn(c) for c in self.coeffs)

    def __eq__(self, other) -> bool:
        if not isinstance(other, DiffOp):
            return NotImplemented
        return self.coeffs == other.coeffs

    def __hash__(self) -> int:
        return hash(self.coeffs)

    def __repr__(self) -> str:
        body = ", ".join(f"A{k}={c}" for k, c in enumerate(self.coeffs) if c)
        return f"{type(self).__name__}({body})"


def frechet_operator(V: JetExpr) -> DiffOp:
    """Linearization ``D_V = sum_s (dV/du_s) d^s``."""
    return DiffOp(partial_jet(V, s) for s in range(order(V) + 1))


class KernelBivector(DiffOp):
    """Local bivector ``sum_k A_k(x) delta^(k)(x-y)``, stored as its operator."""

    __slots__ = ()

    def _new(self, coeffs):
        return KernelBivector(coeffs)

    @classmethod
    def from_op(cls, op: DiffOp) -> "KernelBivector":
        return cls(op.coeffs)

    def antisymmetry_defect(self) -> DiffOp:
        """``A + A^+``; zero exactly for antisymmetric kernels."""
        return DiffOp(self.coeffs) + self.adjoint()

    def truncate_eps(self, E: int) -> "KernelBivector":
        return self.map_coeffs(lambda c: truncate_eps(c, E))


def truncate_eps(e: JetExpr, E: int) -> JetExpr:
    """Drop terms with ``eps`` to a power above ``E``."""
    keep = {}
    for m, c in e.terms.items():
        k = 0
        for a, p in m:
            if a == EPS_ATOM:
                k = p
        if k <= E:
            keep[m] = c
    return JetExpr(keep) if len(keep) != len(e.terms) else e


def kernel_normalize(raw: Iterable[tuple]) -> KernelBivector:
    """Normalize ``sum f(x) g(y) delta^(k)(x-y)`` to the form ``sum A_k(x) delta^(k)``.

    Uses ``g(y) delta^(k)(x-y) = sum_j C(k,j) (d^j g)(x) delta^(k-j)(x-y)``.
    """
    out: dict[int, JetExpr] = {}
    for fx, gy, k in raw:
        fx, gy = as_expr(fx), as_expr(gy)
        dg = gy
        for j in range(k + 1):
            if j:
                dg = total_derivative(dg)
            out[k - j] = out.get(k - j, ZERO) + (fx * dg).scale(binomial(k, j))
    n = max(out) + 1 if out else 0
    return KernelBivector(out.get(k, ZERO) for k in range(n))


def is_antisymmetric(B: KernelBivector) -> tuple[bool, int | None]:
    """``(True, None)`` or ``(False, k)`` with k the first index where ``A + A^+`` is nonzero."""
    defect = B.antisymmetry_defect()
    for k, c in enumerate(defect.coeffs):
        if c:
            return False, k
    return True, None


def hydrodynamic_pencil(phi_expr: JetExpr) -> tuple[KernelBivector, KernelBivector]:
    """The pair ``phi d + 1/2 (phi)_x`` and ``u phi d + 1/2 (u phi)_x``."""
    phi_expr = as_expr(phi_expr)
    up = u(0) * phi_expr
    w1 = KernelBivector((total_derivative(phi_expr).scale(HALF), phi_expr))
    w2 = KernelBivector((total_derivative(up).scale(HALF), up))
    return w1, w2


# ---------------------------------------------------------------------------
# functionals and vector fields

@dataclass(frozen=True)
class LocalFunctional:
    """``int f dx`` with density ``f``; equality is modulo total derivatives."""

    density: JetExpr

    def variational(self) -> JetExpr:
        return variational_derivative(self.density)

    def __add__(self, other: "LocalFunctional") -> "LocalFunctional":
        return LocalFunctional(self.density + other.density)

    def __sub__(self, other: "LocalFunctional") -> "LocalFunctional":
        return LocalFunctional(self.density - other.density)

    def equivalent(self, other: "LocalFunctional") -> bool:
        diff = self.density - other.density
        return is_exact_density(diff) is Exactness.EXACT or (
            not variational_derivative(diff) and not diff.constant_value()
        )


@dataclass(frozen=True)
class EvoVectorField:
    """Evolutionary vector field ``sum_s (d^s X) d/du_s`` given by its component X."""

    component: JetExpr

    def __add__(self, other: "EvoVectorField") -> "EvoVectorField":
        return EvoVectorField(self.component + other.component)

    def __sub__(self, other: "EvoVectorField") -> "EvoVectorField":
        return EvoVectorField(self.component - other.component)

    def __neg__(self) -> "EvoVectorField":
        return EvoVectorField(-self.component)


def hamiltonian_flow(B: KernelBivector, H: LocalFunctional | JetExpr) -> EvoVectorField:
    """``[B, H]``: the vector field with component ``sum_k A_k d^k (delta H / delta u)``."""
    dens = H.density if isinstance(H, LocalFunctional) else as_expr(H)
    return EvoVectorField(B.apply(variational_derivative(dens)))


def lie_derivative_bivector(xi: EvoVectorField | JetExpr, B: KernelBivector) -> KernelBivector:
    """``[B, xi]`` in kernel form: ``X(A) - D_X o A - A o D_X^+``."""
    X = xi.component if isinstance(xi, EvoVectorField) else as_expr(xi)
    DX = frechet_operator(X)
    XA = DiffOp(evolutionary_derivative(X, c) for c in B.coeffs)
    res = XA - DX.compose(B) - DiffOp(B.coeffs).compose(DX.adjoint())
    return KernelBivector(res.coeffs)


# ---------------------------------------------------------------------------
# super densities

def _merge_sign(ta: tuple, tb: tuple):
    """Sorted union of two theta monomials with the sign of the reordering, or None."""
    if not ta:
        return tb, 1
    if not tb:
        return ta, 1
    sa = set(ta)
    for j in tb:
        if j in sa:
            return None
    inversions = 0
    for i in ta:
        for j in tb:
            if i > j:
                inversions += 1
    return tuple(sorted(ta + tb)), (-1 if inversions % 2 else 1)


class ThetaDensity:
    """Polynomial in odd ``theta_k`` with JetExpr coefficients, homogeneous of theta-degree ``degree``."""

    __slots__ = ("terms", "degree")

    def __init__(self, terms: dict | None = None, degree: int = 0):
        self.terms: dict[tuple, JetExpr] = {t: c for t, c in (terms or {}).items() if c}
        for t in self.terms:
            if len(t) != degree:
                raise ValueError(f"theta monomial {t} does not have degree {degree}")
        self.degree = degree

    @classmethod
    def scalar(cls, f: JetExpr) -> "ThetaDensity":
        return cls({(): as_expr(f)}, 0)

    @classmethod
    def functional(cls, f: LocalFunctional | JetExpr) -> "ThetaDensity":
        return cls.scalar(f.density if isinstance(f, LocalFunctional) else f)

    @classmethod
    def vector_field(cls, X: EvoVectorField | JetExpr) -> "ThetaDensity":
        X = X.component if isinstance(X, EvoVectorField) else as_expr(X)
        return cls({(0,): X}, 1)

    @classmethod
    def bivector(cls, B: KernelBivector) -> "ThetaDensity":
        """``1/2 sum_k A_k theta_k theta_0``; ``A_0`` drops out and is recovered from antisymmetry."""
        return cls({(0, k): c.scale(-HALF) for k, c in enumerate(B.coeffs) if k and c}, 2)

    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ThetaDensity):
            return NotImplemented
        return self.degree == other.degree and self.terms == other.terms

    def __add__(self, other: "ThetaDensity") -> "ThetaDensity":
        if self.degree != other.degree and self.terms and other.terms:
            raise ValueError("cannot add densities of different theta-degree")
        d = dict(self.terms)
        for t, c in other.terms.items():
            d[t] = d.get(t, ZERO) + c
        return ThetaDensity(d, self.degree if self.terms else other.degree)

    def __neg__(self) -> "ThetaDensity":
        return ThetaDensity({t: -c for t, c in self.terms.items()}, self.degree)

    def __sub__(self, other: "ThetaDensity") -> "ThetaDensity":
        return self + (-other)

    def scale(self, c) -> "ThetaDensity":
        if isinstance(c, JetExpr):
            return ThetaDensity({t: v * c for t, v in self.terms.items()}, self.degree)
        return ThetaDensity({t: v.scale(c) for t, v in self.terms.items()}, self.degree)

    def __mul__(self, other: "ThetaDensity") -> "ThetaDensity":
        d: dict = {}
        for ta, ca in self.terms.items():
            for tb, cb in other.terms.items():
                r = _merge_sign(ta, tb)
                if r is None:
                    continue
                t, s = r
                prod = ca * cb
                d[t] = d.get(t, ZERO) + (prod if s > 0 else -prod)
        return ThetaDensity(d, self.degree + other.degree)

    def map_coeffs(self, fn) -> "ThetaDensity":
        return ThetaDensity({t: fn(c) for t, c in self.terms.items()}, self.degree)

    def dx(self) -> "ThetaDensity":
        d: dict = {}
        for t, c in self.terms.items():
            dc = total_derivative(c)
            if dc:
                d[t] = d.get(t, ZERO) + dc
            for p, i in enumerate(t):
                if i + 1 in t:
                    continue
                nt = t[:p] + (i + 1,) + t[p + 1:]
                d[nt] = d.get(nt, ZERO) + c
        return ThetaDensity(d, self.degree)

    def partial_u(self, s: int) -> "ThetaDensity":
        return self.map_coeffs(lambda c: partial_jet(c, s))

    def partial_theta(self, s: int) -> "ThetaDensity":
        """Left derivative with respect to ``theta_s``."""
        d: dict = {}
        for t, c in self.terms.items():
            if s in t:
                p = t.index(s)
                nt = t[:p] + t[p + 1:]
                d[nt] = d.get(nt, ZERO) + (-c if p % 2 else c)
        return ThetaDensity(d, max(self.degree - 1, 0))

    def max_theta(self) -> int:
        return max((max(t) for t in self.terms if t), default=-1)

    def max_jet(self) -> int:
        return max((order(c) for c in self.terms.values()), default=-1)

    def var_u(self) -> "ThetaDensity":
        out = ThetaDensity({}, self.degree)
        for s in range(self.max_jet(), -1, -1):
            out = self.partial_u(s) - out.dx()
        return out

    def var_theta(self) -> "ThetaDensity":
        out = ThetaDensity({}, max(self.degree - 1, 0))
        for s in range(self.max_theta(), -1, -1):
            out = self.partial_theta(s) - out.dx()
        return out

    def truncate_eps(self, E: int) -> "ThetaDensity":
        return self.map_coeffs(lambda c: truncate_eps(c, E))

    def __repr__(self) -> str:
        parts = []
        for t, c in sorted(self.terms.items()):
            th = "*".join(f"theta{i}" for i in t)
            parts.append(f"({c})*{th}" if th else f"({c})")
        return " + ".join(parts) if parts else "0"


def schouten(P: ThetaDensity, Q: ThetaDensity) -> ThetaDensity:
    """Schouten-Nijenhuis bracket; the result is one representative modulo total derivatives."""
    deg = P.degree + Q.degree - 1
    out = ThetaDensity({}, max(deg, 0))
    if deg < 0:
        return out
    if P.degree:
        out = out + P.var_theta() * Q.var_u()
    if Q.degree:
        second = P.var_u() * Q.var_theta()
        out = out + (-second if P.degree % 2 else second)
    return out


def normal_form(h: ThetaDensity):
    """Canonical invariant of ``h`` modulo total derivatives.

    For theta-degree p >= 1 this is ``delta h / delta theta`` (since
    ``int h = (1/p) int theta_0 delta h/delta theta``); for p = 0 it is the
    variational derivative.
    """
    if h.degree == 0:
        return variational_derivative(h.terms.get((), ZERO))
    return h.var_theta()


def density_to_vector_field(h: ThetaDensity) -> EvoVectorField:
    if h.degree != 1:
        raise ValueError("a vector field density has theta-degree 1")
    return EvoVectorField(h.var_theta().terms.get((), ZERO))


def density_to_bivector(h: ThetaDensity) -> KernelBivector:
    if h.degree != 2:
        raise ValueError("a bivector density has theta-degree 2")
    v = h.var_theta()
    n = v.max_theta() + 1
    return KernelBivector(-v.terms.get((k,), ZERO) for k in range(n))


class Exactness(enum.Enum):
    EXACT = "exact"
    NOT_EXACT = "not exact"
    UNDECIDED = "undecided"

    def __bool__(self) -> bool:
        if self is Exactness.UNDECIDED:
            raise ValueError("exactness is undecided")
        return self is Exactness.EXACT


def _has_logs(e: JetExpr) -> bool:
    return any(a[0] == LOG for a in e.atoms())


def is_exact_density(h: ThetaDensity | JetExpr) -> Exactness:
    """Decide whether ``h`` is a total x-derivative.

    For positive theta-degree the theta-variational derivative decides.  For
    scalar densities a nonzero Euler operator refutes exactness; otherwise an
    explicit antiderivative is sought, and a log-bearing density without one
    is reported as undecided.
    """
    if isinstance(h, ThetaDensity) and h.degree > 0:
        return Exactness.NOT_EXACT if h.var_theta() else Exactness.EXACT
    e = h.terms.get((), ZERO) if isinstance(h, ThetaDensity) else as_expr(h)
    if e.constant_value():
        return Exactness.NOT_EXACT
    if variational_derivative(e):
        return Exactness.NOT_EXACT
    if integrate_total(e) is not None:
        return Exactness.EXACT
    return Exactness.UNDECIDED if _has_logs(e) else Exactness.EXACT


class NotAntisymmetricError(ValueError):
    pass


def is_poisson(B: KernelBivector, eps_order: int | None = None) -> tuple[bool, ThetaDensity]:
    """Check ``[B, B] = 0`` modulo total derivatives (and modulo ``eps^(E+1)``).

    Returns the verdict and the residual (the normal form of the trivector).
    """
    ok, k = is_antisymmetric(B)
    if not ok:
        raise NotAntisymmetricError(f"kernel is not antisymmetric (coefficient {k})")
    P = ThetaDensity.bivector(B)
    res = normal_form(schouten(P, P))
    if eps_order is not None:
        res = res.truncate_eps(eps_order)
    return res.is_zero(), res


def are_compatible(B1: KernelBivector, B2: KernelBivector, eps_order: int | None = None) -> tuple[bool, ThetaDensity]:
    """Check ``[B1, B2] = 0`` modulo total derivatives."""
    res = normal_form(schouten(ThetaDensity.bivector(B1), ThetaDensity.bivector(B2)))
    if eps_order is not None:
        res = res.truncate_eps(eps_order)
    return res.is_zero(), res


def d(i: int, alpha: ThetaDensity, pencil: Sequence[KernelBivector]) -> ThetaDensity:
    """``d_i alpha = [omega_i, alpha]`` on super densities."""
    if i not in (1, 2):
        raise ValueError("i must be 1 or 2")
    return schouten(ThetaDensity.bivector(pencil[i - 1]), alpha)
