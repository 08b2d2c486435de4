"""Constructive quasitriviality for one-component bihamiltonian pencils.

The pencil is ``omega_1 = phi d + 1/2 phi_x``, ``omega_2 = u phi d + 1/2 (u phi)_x``
and ``d_i = [omega_i, .]``.  The pieces are:

* the shape reductions on pairs of vector fields (xi, eta) with
  ``d_1 xi = d_2 eta``, which produce functionals I, J with
  ``xi = d_1 I - d_2 J`` (:func:`proposition1_solve`);
* an undetermined-coefficient solver for ``d_i xi = Q`` (:func:`d_invert`);
* the order-by-order driver :func:`trivialize`, which builds a quasi-Miura
  transform carrying the undeformed pencil to a given deformation.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

from gmpy2 import mpq
from sympy import QQ
from sympy.polys.matrices.sdm import SDM

from .jetring import (
    FUNC,
    INT,
    JET,
    LOG,
    NON_HOMOGENEOUS,
    ONE,
    ZERO,
    JetExpr,
    antideriv2_top,
    as_expr,
    binomial,
    degree,
    jet_atom,
    log,
    order,
    partial_jet,
    total_derivative,
    u,
)
from .multivec import (
    EvoVectorField,
    KernelBivector,
    LocalFunctional,
    hamiltonian_flow,
    hydrodynamic_pencil,
    is_antisymmetric,
    lie_derivative_bivector,
)
from .series import EpsSeries
from .transform import (
    MiuraTransform,
    Pencil,
    compose,
    pushforward,
    series_kernel,
    undeformed_pencil,
)

HALF = mpq(1, 2)


class ShapeError(ValueError):
    """A pair (X, Y) does not have the shape a reduction step requires."""


class PreconditionError(ValueError):
    pass


class InvariantViolation(AssertionError):
    """An internal consistency check failed; carries a state dump."""


class NotExact(ArithmeticError):
    """No preimage under ``d_i`` was found in the supported function field."""


# ---------------------------------------------------------------------------
# pencil context

class HydroPencil:
    """The undeformed pair for a given ``phi`` together with ``d_1``, ``d_2``."""

    def __init__(self, phi_expr: JetExpr | int = None):
        from .jetring import phi as phi_fn

        self.phi = phi_fn(0) if phi_expr is None else as_expr(phi_expr)
        if order(self.phi) > 0:
            raise ValueError("phi must depend on u only")
        self.omega1, self.omega2 = hydrodynamic_pencil(self.phi)

    def omega(self, i: int) -> KernelBivector:
        if i == 1:
            return self.omega1
        if i == 2:
            return self.omega2
        raise ValueError("i must be 1 or 2")

    def d_functional(self, i: int, density: JetExpr | LocalFunctional) -> JetExpr:
        """Component of the vector field ``d_i int(density)``."""
        return hamiltonian_flow(self.omega(i), density).component

    def d_vector(self, i: int, X: JetExpr | EvoVectorField) -> KernelBivector:
        """Kernel of the bivector ``d_i xi``."""
        return lie_derivative_bivector(X, self.omega(i))

    def Z(self, X: JetExpr, Y: JetExpr) -> KernelBivector:
        """Kernel of ``d_1 xi - d_2 eta``."""
        return self.d_vector(1, X) - self.d_vector(2, Y)

    def __repr__(self) -> str:
        return f"HydroPencil(phi={self.phi})"


def _ctx(pencil) -> HydroPencil:
    if isinstance(pencil, HydroPencil):
        return pencil
    if pencil is None:
        return HydroPencil()
    return HydroPencil(pencil)


def _top(X: JetExpr, Y: JetExpr) -> int:
    return max(order(X), order(Y))


# ---------------------------------------------------------------------------
# shape data and functional bookkeeping

@dataclass(frozen=True)
class ShapedPair:
    """``X = (u G + F) u_N + Q`` and ``Y = G u_N + R`` with F, G, Q, R free of ``u_N``."""

    X: JetExpr
    Y: JetExpr
    N: int
    F: JetExpr
    G: JetExpr
    Q: JetExpr
    R: JetExpr

    def reassemble(self) -> tuple[JetExpr, JetExpr]:
        uN = u(self.N)
        return (u(0) * self.G + self.F) * uN + self.Q, self.G * uN + self.R


@dataclass
class FunctionalLedger:
    """Running sums of the corrections applied to xi: ``xi_0 = xi + d_1 I - d_2 J``."""

    I: JetExpr = ZERO
    J: JetExpr = ZERO
    steps: list = field(default_factory=list)

    def add(self, label: str, dI: JetExpr = ZERO, dJ: JetExpr = ZERO):
        self.I = self.I + dI
        self.J = self.J + dJ
        self.steps.append((label, dI, dJ))

    def functionals(self) -> tuple[LocalFunctional, LocalFunctional]:
        return LocalFunctional(self.I), LocalFunctional(self.J)


# ---------------------------------------------------------------------------
# reductions

def _base_case_densities(F: JetExpr, ctx: HydroPencil) -> tuple[JetExpr, JetExpr]:
    """Densities with ``d_1 I - d_2 J = F(u) u_1``.

    With ``h'' = -2F/phi`` the choice ``I = h - u h'``, ``J = -h'`` works for
    any phi, which avoids the square roots of phi a single functional needs.
    """
    h = antideriv2_top((F / ctx.phi).scale(-2), 0)
    hp = partial_jet(h, 0)
    return h - u(0) * hp, -hp


def lemma1_reduce(X: JetExpr, N: int, pencil=None) -> tuple[LocalFunctional, LocalFunctional]:
    """Functionals I, J removing the ``F u_N`` part of ``X = F u_N + Q``.

    ``F`` may depend on ``u, ..., u_[N/2]`` only.  The component of
    ``xi - (d_1 I - d_2 J)`` is checked to have jet order below N.
    """
    ctx = _ctx(pencil)
    X = as_expr(X)
    if N < 1:
        raise ShapeError("the top jet order must be at least 1")
    if order(X) > N:
        raise ShapeError(f"X depends on jets above u{N}")
    F = partial_jet(X, N)
    if partial_jet(F, N):
        raise ShapeError(f"X is not linear in u{N}")
    if not F:
        return LocalFunctional(ZERO), LocalFunctional(ZERO)
    M = N // 2
    if order(F) > M:
        raise ShapeError(f"F depends on u{order(F)}, above u{M}")
    sign = -1 if M % 2 else 1
    if N == 1:
        I, J = _base_case_densities(F, ctx)
    elif N % 2:
        I = antideriv2_top((F / ctx.phi).scale(sign), M)
        J = ZERO
    else:
        H = antideriv2_top((F / (ctx.phi * u(1))).scale(mpq(sign * 2, 2 * M + 1)), M)
        I, J = u(0) * H, H
    rest = X - ctx.d_functional(1, I) + ctx.d_functional(2, J)
    if order(rest) >= N:
        raise InvariantViolation(
            f"reduction left jet order {order(rest)} >= {N}; F={F}, I={I}, J={J}, residual={rest}")
    return LocalFunctional(I), LocalFunctional(J)


def lemma2_extract(X: JetExpr, Y: JetExpr, N: int, pencil=None, check: bool = False) -> ShapedPair:
    """Read off F, G, Q, R from a pair of top order N."""
    X, Y = as_expr(X), as_expr(Y)
    if check and _ctx(pencil).Z(X, Y):
        raise PreconditionError("d_1 xi != d_2 eta")
    if _top(X, Y) > N:
        raise ShapeError(f"components depend on jets above u{N}")
    XN, YN = partial_jet(X, N), partial_jet(Y, N)
    if partial_jet(YN, N):
        raise ShapeError(f"Y is not linear in u{N}")
    if partial_jet(XN, N):
        raise ShapeError(f"X is not linear in u{N}")
    G = YN
    F = XN - u(0) * G
    uN = u(N)
    Q = X - XN * uN
    R = Y - G * uN
    return ShapedPair(X, Y, N, F, G, Q, R)


def _z_sum(Z: KernelBivector, N: int, m: int, shift: int) -> JetExpr:
    out = ZERO
    for p in range(m + 1):
        term = partial_jet(Z[p], shift - m - p)
        if term:
            out = out + term.scale((-1) ** (m - p) * binomial(N - p, m - p))
    return out


def lemma3_lhs(X: JetExpr, Y: JetExpr, N: int, m: int, pencil=None) -> JetExpr:
    """``sum_p (-1)^(m-p) C(N-p, m-p) Z_{p, 2N+1-m-p}`` for an odd-N shaped pair.

    Equals ``phi dF/du_{N-m}``.
    """
    if N % 2 == 0:
        raise ShapeError("N must be odd")
    if not 1 <= m <= N // 2:
        raise ShapeError(f"m must lie in 1..{N // 2}")
    ctx = _ctx(pencil)
    lemma2_extract(X, Y, N)
    return _z_sum(ctx.Z(X, Y), N, m, 2 * N + 1)


def lemma4_lhs(X: JetExpr, Y: JetExpr, N: int, m: int, pencil=None) -> JetExpr:
    """``sum_p (-1)^(m-p) C(N-p, m-p) Z_{p, 2N-m-p}`` for a shaped pair with F = 0.

    Equals ``(-1)^(N+1) (N-m+1/2) phi u_1 dG/du_{N-m}`` when G depends on
    ``u, ..., u_{N-m}`` only.
    """
    if not 1 <= m <= (N - 1) // 2:
        raise ShapeError(f"m must lie in 1..{(N - 1) // 2}")
    ctx = _ctx(pencil)
    sp = lemma2_extract(X, Y, N)
    if sp.F:
        raise ShapeError("F must vanish")
    if order(sp.G) > N - m:
        raise ShapeError(f"G depends on jets above u{N - m}")
    return _z_sum(ctx.Z(X, Y), N, m, 2 * N)


# ---------------------------------------------------------------------------
# preimages xi = d_1 I - d_2 J

def _dump(**state) -> str:
    return "; ".join(f"{k}={v}" for k, v in state.items())


def proposition1_solve(xi: EvoVectorField | JetExpr, eta: EvoVectorField | JetExpr, pencil=None,
                       ledger: FunctionalLedger | None = None) -> tuple[LocalFunctional, LocalFunctional]:
    """Functionals I, J with ``xi = d_1 I - d_2 J`` given ``d_1 xi = d_2 eta``."""
    ctx = _ctx(pencil)
    X0 = xi.component if isinstance(xi, EvoVectorField) else as_expr(xi)
    Y = eta.component if isinstance(eta, EvoVectorField) else as_expr(eta)
    if ctx.Z(X0, Y):
        raise PreconditionError("d_1 xi != d_2 eta")
    led = FunctionalLedger() if ledger is None else ledger
    X = X0

    def apply(dI=ZERO, dJ=ZERO, dK=ZERO, label=""):
        # xi <- xi - (d1 dI - d2 dJ), eta <- eta - (d1 dJ - d2 dK)
        nonlocal X, Y
        X = X - ctx.d_functional(1, dI) + ctx.d_functional(2, dJ)
        Y = Y - ctx.d_functional(1, dJ) + ctx.d_functional(2, dK)
        led.add(label, dI, dJ)

    while X:
        N = _top(X, Y)
        if N <= 1:
            # base case: only xi matters from here on
            F = partial_jet(X, 1)
            if partial_jet(F, 1):
                raise InvariantViolation("X is not linear in u1: " + _dump(X=X, Y=Y))
            if F:
                I, J = _base_case_densities(F, ctx)
                X = X - ctx.d_functional(1, I) + ctx.d_functional(2, J)
                led.add("base", I, J)
            if X:
                raise InvariantViolation(
                    "jet order 0 remainder has no local preimage: " + _dump(X=X, Y=Y))
            break
        M = N // 2
        sign = -1 if M % 2 else 1
        sp = lemma2_extract(X, Y, N)
        if sp.F:
            if N % 2 == 0:
                raise InvariantViolation("F nonzero at even N: " + _dump(N=N, F=sp.F, X=X, Y=Y))
            if order(sp.F) > M:
                raise InvariantViolation(
                    "F depends on jets above u_M: " + _dump(N=N, F=sp.F, X=X, Y=Y))
            I, J = lemma1_reduce(sp.F * u(N), N, ctx)
            apply(I.density, J.density, label=f"N={N}: remove F")
            sp = lemma2_extract(X, Y, N)
            if sp.F:
                raise InvariantViolation("F survived its removal: " + _dump(N=N, F=sp.F))
        if sp.G:
            if order(sp.G) > M:
                raise InvariantViolation(
                    "G depends on jets above u_M: " + _dump(N=N, G=sp.G, X=X, Y=Y))
            if N % 2:
                # top coefficients uG, G must both go; I1 = 2uK, J1 = K does it
                K = antideriv2_top((sp.G / ctx.phi).scale(sign), M)
                apply(u(0) * K.scale(2), K, label=f"N={N}: remove G")
            else:
                P = antideriv2_top((sp.G / (ctx.phi * u(1))).scale(mpq(2 * sign, 2 * M + 1)), M)
                apply(u(0) ** 2 * P, u(0) * P, P, label=f"N={N}: remove G")
        if ctx.Z(X, Y):
            raise InvariantViolation("d_1 xi = d_2 eta broken: " + _dump(N=N, X=X, Y=Y))
        if X and _top(X, Y) >= N:
            raise InvariantViolation("jet order did not drop: " + _dump(N=N, X=X, Y=Y))
    if X:
        raise InvariantViolation("reduction did not terminate with xi = 0: " + _dump(X=X, Y=Y))
    I, J = led.functionals()
    if X0 - ctx.d_functional(1, I.density) + ctx.d_functional(2, J.density):
        raise InvariantViolation("xi != d_1 I - d_2 J: " + _dump(I=I.density, J=J.density))
    return I, J


# ---------------------------------------------------------------------------
# inverting d_i by undetermined coefficients

def kernel_degree(Q: KernelBivector) -> int | None:
    """The m with every ``A_l`` homogeneous of degree ``m + 1 - l`` (None for zero)."""
    m = None
    for l, c in enumerate(Q.coeffs):
        if not c:
            continue
        dg = degree(c)
        if dg is NON_HOMOGENEOUS:
            raise PreconditionError(f"coefficient A{l} = {c} is not homogeneous")
        k = dg + l - 1
        if m is None:
            m = k
        elif m != k:
            raise PreconditionError(f"coefficient A{l} has degree {dg}, expected {m + 1 - l}")
    return m


def _jet_monomials(m: int, pole: int) -> Iterator[JetExpr]:
    """Monomials of degree m in u_1, u_2, ... with u_1 exponent at least ``-pole``."""
    top = m + pole

    def parts(remaining: int, smallest: int):
        # exponent vectors for u_s, s >= smallest, with weighted sum <= remaining
        if smallest > remaining:
            yield {}
            return
        for e in range(remaining // smallest, -1, -1):
            for rest in parts(remaining - e * smallest, smallest + 1):
                out = dict(rest)
                if e:
                    out[smallest] = e
                yield out

    for ex in parts(top, 2):
        weight = sum(s * e for s, e in ex.items())
        e1 = m - weight
        if e1 < -pole:
            continue
        mono = u(1) ** e1 if e1 else ONE
        for s, e in ex.items():
            mono = mono * u(s) ** e
        yield mono


def _count(mono_expr: JetExpr) -> int:
    ((mono, _),) = mono_expr.terms.items()
    return sum(p for a, p in mono if a[0] == JET and a[1] >= 1)


class _Grading:
    """Gradings preserved by d_1 and d_2, used to cut the ansatz down.

    For ``phi = c u^k`` the u-scaling weight is exact.  For a symbolic phi the
    pair (number of phi factors, u-weight with ``phi^(j)`` of weight ``-j``)
    is used.  Otherwise a window of powers of u is tried.
    """

    def __init__(self, ctx: HydroPencil):
        self.ctx = ctx
        phi = ctx.phi
        atoms = phi.atoms()
        self.name = None
        if any(a[0] == FUNC for a in atoms) and len(phi.terms) == 1:
            self.kind = "symbolic"
            names = {a[1] for a in atoms if a[0] == FUNC}
            self.name = names.pop() if len(names) == 1 else None
        elif len(phi.terms) == 1:
            self.kind = "monomial"
        else:
            self.kind = "window"

    def key(self, mono) -> tuple | None:
        w = 0
        n = 0
        for a, p in mono:
            if a[0] == JET:
                w += p
            elif a[0] == FUNC:
                w -= a[2] * p
                n += p
            elif a[0] == INT:
                return None
        return (n, w) if self.kind == "symbolic" else (w,)

    def u_factors(self, key: tuple, count: int, m: int) -> Iterator[JetExpr]:
        from .jetring import phi as phi_fn

        if self.kind == "monomial":
            yield u(0) ** (key[0] - count)
            return
        n, w = key
        jmax = m + 1
        # phi-factor multisets: phi^(n - c) * prod phi^(j_i), j_i >= 1, c <= 2
        for c in range(0, 3):
            for js in itertools.combinations_with_replacement(range(1, jmax + 1), c):
                fac = phi_fn(0, self.name) ** (n - c) if n - c else ONE
                for j in js:
                    fac = fac * phi_fn(j, self.name)
                a = w - count + sum(js)
                yield fac * (u(0) ** a if a else ONE)


def _flatten(K: KernelBivector) -> dict:
    out = {}
    for l, c in enumerate(K.coeffs):
        for mono, v in c.terms.items():
            out[(l, mono)] = v
    return out


def _solve_linear(columns: list[dict], rhs: dict) -> list | None:
    """Rational solution of ``sum_j x_j columns[j] = rhs`` (free unknowns set to 0)."""
    rows: dict = {}
    for key in itertools.chain(rhs, *columns):
        if key not in rows:
            rows[key] = len(rows)
    ncols = len(columns)
    data: dict[int, dict[int, object]] = {}
    for j, col in enumerate(columns):
        for key, v in col.items():
            data.setdefault(rows[key], {})[j] = QQ(int(v.numerator), int(v.denominator))
    for key, v in rhs.items():
        data.setdefault(rows[key], {})[ncols] = QQ(int(v.numerator), int(v.denominator))
    mat = SDM(data, (len(rows), ncols + 1), QQ)
    red, pivots = mat.rref()
    if pivots and pivots[-1] == ncols:
        return None
    sol = [mpq(0)] * ncols
    for r, c in enumerate(pivots):
        v = red.get(r, {}).get(ncols)
        if v:
            sol[c] = mpq(int(v.numerator), int(v.denominator))
    return sol


def _ladder(m: int, q_pole: int) -> list[tuple[int, tuple]]:
    """(u_1 pole bound, log factors) per rung.

    A preimage typically has one pole fewer than Q, so the bound reaches
    past the degree when Q itself has deep poles in u_1.
    """
    top = max(m, q_pole + 1)
    poles = sorted({0, *range(max(q_pole - 1, 1), top + 1)} | set(range(1, min(m, top) + 1)))
    rungs = [(p, ()) for p in poles]
    rungs.append((top, (log(u(1)),)))
    rungs.append((top, (log(u(1)), log(u(0)))))
    return rungs


def d_invert(i: int, Q: KernelBivector, degree_m: int | None = None, pencil=None) -> EvoVectorField:
    """A vector field xi with ``d_i xi = Q``, verified by recomputation.

    Undetermined coefficients over Q on an ansatz that is enlarged step by
    step: polynomial in ``u_1, u_2, ...``, then rational in ``u_1`` with pole
    order up to the degree, then with ``log u_1`` and ``log u`` factors.
    """
    ctx = _ctx(pencil)
    Q = KernelBivector(Q.coeffs)
    if not Q:
        return EvoVectorField(ZERO)
    ok, bad = is_antisymmetric(Q)
    if not ok:
        raise PreconditionError(f"Q is not antisymmetric (coefficient {bad})")
    m = kernel_degree(Q) if degree_m is None else degree_m
    if m is None or m < 1:
        raise NotExact(f"no vector field of positive degree maps to {Q}")
    grading = _Grading(ctx)
    target = _flatten(Q)

    keys: set = set()
    powers: set = set()
    for (l, mono) in target:
        k = grading.key(mono)
        if k is None:
            raise NotExact("formal antiderivatives in Q are not supported by the solver")
        keys.add(k)
        powers.add(sum(p for a, p in mono if a == jet_atom(0)))
    wi = grading.key(next(iter(ctx.omega(i)[1].terms)))
    if grading.kind == "symbolic":
        xkeys = {(k[0] - wi[0], k[1] - wi[1] + 1) for k in keys}
    else:
        xkeys = {(k[0] - wi[0] + 1,) for k in keys}

    seen: set = set()
    basis: list[JetExpr] = []
    columns: list[dict] = []
    q_pole = max((-p for (_, mono) in target for a, p in mono if a == jet_atom(1) and p < 0), default=0)
    for pole, logs in _ladder(m, q_pole):
        new = []
        for jm in _jet_monomials(m, pole):
            cnt = _count(jm)
            if grading.kind == "window":
                lo, hi = min(powers) - m - 2, max(powers) + 2
                facs = [u(0) ** a if a else ONE for a in range(lo, hi + 1)]
            else:
                facs = [f for k in sorted(xkeys) for f in grading.u_factors(k, cnt, m)]
            for f in facs:
                b = f * jm
                for extra in itertools.chain([()], *(itertools.combinations(logs, r) for r in range(1, len(logs) + 1))):
                    e = b
                    for lg in extra:
                        e = e * lg
                    if e not in seen:
                        seen.add(e)
                        new.append(e)
        for b in new:
            basis.append(b)
            columns.append(_flatten(ctx.d_vector(i, b)))
        sol = _solve_linear(columns, target)
        if sol is None:
            continue
        X = ZERO
        for c, b in zip(sol, basis):
            if c:
                X = X + b.scale(c)
        if ctx.d_vector(i, X) != Q:
            raise InvariantViolation(f"d_{i} inverse failed verification for Q={Q}")
        return EvoVectorField(X)
    raise NotExact(f"no d_{i}-preimage of degree {m} found for {Q} (ansatz exhausted)")


# ---------------------------------------------------------------------------
# the trivialization driver

@dataclass
class OrderReport:
    order: int
    elapsed: float
    transform_terms: int
    residual_terms: int
    notes: list = field(default_factory=list)


def _terms(B: KernelBivector) -> int:
    return sum(len(c.terms) for c in B.coeffs)


def pencil_phi(pencil: Pencil) -> JetExpr:
    """Recover phi from the eps^0 part of the first bracket."""
    return pencil[0][0][1]


def check_deformation(pencil: Pencil, E: int, check_poisson: bool = True) -> HydroPencil:
    """Validate the preconditions of :func:`trivialize` and return the undeformed context."""
    from .multivec import are_compatible, is_poisson

    phi_expr = pencil_phi(pencil)
    if not phi_expr or order(phi_expr) > 0:
        raise PreconditionError("eps^0 part of the first bracket is not phi(u) d + ...")
    ctx = HydroPencil(phi_expr)
    for b, (S, w) in enumerate(zip(pencil, (ctx.omega1, ctx.omega2)), start=1):
        if S[0] != w:
            raise PreconditionError(f"eps^0 part of bracket {b} is not of hydrodynamic form")
        for k in range(1, E + 1):
            for l, c in enumerate(S[k].coeffs):
                if c and degree(c) != k + 1 - l:
                    raise PreconditionError(
                        f"bracket {b}: eps^{k} coefficient A{l} = {c} is not homogeneous of degree {k + 1 - l}")
    if check_poisson:
        B1, B2 = series_kernel(pencil[0].truncate(E)), series_kernel(pencil[1].truncate(E))
        for name, (ok, res) in (("bracket 1", is_poisson(B1, E)), ("bracket 2", is_poisson(B2, E)),
                                ("pair", are_compatible(B1, B2, E))):
            if not ok:
                raise PreconditionError(f"{name} fails the Jacobi identity mod eps^{E + 1}: {res}")
    return ctx


def trivialize(pencil: Pencil, E: int, check: bool = True,
               report: list | None = None,
               progress: Callable[[OrderReport], None] | None = None) -> MiuraTransform:
    """A quasi-Miura transform T with ``pushforward(undeformed, T, E) = pencil``."""
    ctx = check_deformation(pencil, E, check_poisson=check)
    base = undeformed_pencil(ctx.phi, E)
    T = MiuraTransform.identity(E)
    for m in range(1, E + 1):
        t0 = time.perf_counter()
        notes = []
        cur = pushforward(tuple(S.truncate(m) for S in base), T.truncate(m), m)
        R1 = KernelBivector(pencil[0][m] - cur[0][m])
        R2 = KernelBivector(pencil[1][m] - cur[1][m])
        for k in range(m):
            if pencil[0][k] != cur[0][k] or pencil[1][k] != cur[1][k]:
                raise InvariantViolation(f"order {k} disturbed while treating order {m}")
        if R1:
            zeta = d_invert(1, R1, m, ctx).component
            T = compose(T, MiuraTransform.shift(m, -zeta, E))
            R2 = R2 - ctx.d_vector(2, zeta)
            notes.append(f"first bracket: zeta = {zeta}")
        if R2:
            xi = d_invert(1, R2, m, ctx)
            eta = d_invert(2, R2, m, ctx)
            I, J = proposition1_solve(xi, eta, ctx)
            Y = ctx.d_functional(1, J.density)
            if ctx.d_vector(1, Y) or ctx.d_vector(2, Y) != R2:
                raise InvariantViolation(f"order {m}: absorbing field does not reproduce the residual")
            T = compose(T, MiuraTransform.shift(m, -Y, E))
            notes.append(f"second bracket: Y = {Y}")
        after = pushforward(tuple(S.truncate(m) for S in base), T.truncate(m), m)
        left = sum(_terms(KernelBivector(pencil[b][k] - after[b][k])) for b in (0, 1) for k in range(m + 1))
        if left:
            raise InvariantViolation(f"order {m} not absorbed ({left} residual terms)")
        rep = OrderReport(m, time.perf_counter() - t0,
                          len(T.terms[m].terms), left, notes)
        if report is not None:
            report.append(rep)
        if progress is not None:
            progress(rep)
    final = pushforward(base, T, E)
    for b in (0, 1):
        if final[b] != pencil[b].truncate(E):
            raise InvariantViolation("final verification failed")
    return T


def residual(pencil: Pencil, T: MiuraTransform, E: int, phi_expr: JetExpr) -> tuple[EpsSeries, EpsSeries]:
    """``pushforward(undeformed, T) - pencil`` at orders ``0..E``."""
    if T.order < E:
        T = MiuraTransform(T.terms.coeffs, E, check=False)
    out = pushforward(undeformed_pencil(phi_expr, E), T, E)
    return out[0] - pencil[0].truncate(E), out[1] - pencil[1].truncate(E)
