"""Miura-type changes of variable ``v = u + sum_k eps^k G_k`` acting on brackets.

A bracket with kernel operator ``A`` (in the variable u) becomes
``D_V o A o D_V^+`` in the variable v, where ``D_V`` is the linearization
of ``V = u + sum eps^k G_k``; its coefficients, still functions of the
u-jets, are rewritten in v-jets by Taylor-expanding around the inverse
substitution ``u = v + H(v)``.
"""

from __future__ import annotations

from typing import Sequence

from gmpy2 import mpq

from .jetring import (
    EPS,
    NON_HOMOGENEOUS,
    ONE,
    ZERO,
    JetExpr,
    as_expr,
    degree,
    order,
    partial_jet,
    total_derivative,
    u,
)
from .multivec import (
    DiffOp,
    KernelBivector,
    frechet_operator,
    hydrodynamic_pencil,
    is_antisymmetric,
)
from .series import EpsSeries, TruncationError

__all__ = [
    "MiuraTransform",
    "Pencil",
    "frechet",
    "substitute",
    "invert_transform",
    "compose",
    "pushforward",
    "kernel_series",
    "series_kernel",
    "undeformed_pencil",
    "pencil_from_kernels",
    "pencil_difference",
]

ZERO_OP = KernelBivector(())

Pencil = tuple  # (EpsSeries[KernelBivector], EpsSeries[KernelBivector])


class MiuraTransform:
    """``u -> v = u + sum_{k=1}^{E} eps^k G_k`` with ``G_k`` homogeneous of degree k."""

    __slots__ = ("terms", "order")

    def __init__(self, terms: EpsSeries | dict[int, JetExpr], order: int | None = None,
                 check: bool = True):
        if isinstance(terms, EpsSeries):
            E = terms.order if order is None else order
            coeffs = {k: as_expr(c) for k, c in terms.coeffs.items()}
        else:
            if order is None:
                raise ValueError("truncation order required")
            E = order
            coeffs = {k: as_expr(c) for k, c in terms.items()}
        if coeffs.get(0):
            raise ValueError("the eps^0 part of a Miura transform must be the identity")
        coeffs.pop(0, None)
        if check:
            for k, g in coeffs.items():
                if k > E or not g:
                    continue
                dg = degree(g)
                if dg is NON_HOMOGENEOUS or dg != k:
                    raise ValueError(f"G{k} = {g} is not homogeneous of degree {k}")
        self.terms: EpsSeries = EpsSeries(coeffs, E, ZERO)
        self.order = E

    @classmethod
    def identity(cls, order: int) -> "MiuraTransform":
        return cls({}, order)

    @classmethod
    def shift(cls, m: int, Y: JetExpr, order: int, check: bool = True) -> "MiuraTransform":
        """``u -> u + eps^m Y``."""
        return cls({m: Y}, order, check=check)

    def G(self, k: int) -> JetExpr:
        return self.terms[k]

    def is_identity(self) -> bool:
        return self.terms.is_zero()

    def truncate(self, E: int) -> "MiuraTransform":
        return MiuraTransform(self.terms.truncate(E), check=False)

    def as_expr(self) -> JetExpr:
        """``V`` as a single expression in ``u`` and ``eps``."""
        out = u(0)
        for k, g in self.terms.coeffs.items():
            out = out + (EPS ** k) * g
        return out

    def __eq__(self, other) -> bool:
        if not isinstance(other, MiuraTransform):
            return NotImplemented
        return self.terms == other.terms

    def __repr__(self) -> str:
        body = ", ".join(f"G{k}={g}" for k, g in sorted(self.terms.coeffs.items()))
        return f"MiuraTransform({body}; order={self.order})"


def frechet(V: JetExpr) -> DiffOp:
    """``sum_s (dV/du_s) d^s``; ``V`` may contain ``eps``."""
    return frechet_operator(as_expr(V))


# ---------------------------------------------------------------------------
# substitution u -> u + Delta

class _Shift:
    """A displacement series with its x-derivatives cached."""

    def __init__(self, delta: EpsSeries):
        self.E = delta.order
        self._derivs = [delta]

    def d(self, s: int) -> EpsSeries:
        while len(self._derivs) <= s:
            self._derivs.append(self._derivs[-1].map(total_derivative))
        return self._derivs[s]

    def is_zero(self) -> bool:
        return self._derivs[0].is_zero()


def _substitute(f: JetExpr, shift: _Shift, E: int) -> EpsSeries:
    out: dict[int, JetExpr] = {0: f}
    if shift.is_zero() or E == 0:
        return EpsSeries(out, E, ZERO)
    unit = EpsSeries({0: ONE}, E, ZERO)

    # multivariate Taylor series over non-decreasing index sequences; the
    # running coefficient is 1/prod(multiplicity!)
    def rec(g: JetExpr, prev: int, mult: int, prod: EpsSeries, coef: mpq):
        for t in range(prev, order(g) + 1):
            dg = partial_jet(g, t)
            if not dg:
                continue
            m = mult + 1 if t == prev else 1
            c = coef / m
            p = prod.mul(shift.d(t).truncate(E))
            if p.is_zero():
                continue
            for k, pk in p.coeffs.items():
                out[k] = out.get(k, ZERO) + (dg * pk).scale(c)
            rec(dg, t, m, p, c)

    rec(f, 0, 0, unit, mpq(1))
    return EpsSeries(out, E, ZERO)


def substitute(f: JetExpr, delta: EpsSeries, E: int | None = None) -> EpsSeries:
    """``f(u + Delta)`` expanded as a series in eps, truncated at ``E``.

    ``Delta`` must have no eps^0 part.
    """
    if delta[0]:
        raise ValueError("displacement must start at eps^1")
    E = delta.order if E is None else E
    if E > delta.order:
        raise TruncationError("displacement known to lower order than requested")
    return _substitute(as_expr(f), _Shift(delta), E)


def _substitute_into(terms: EpsSeries, shift: _Shift, E: int) -> EpsSeries:
    """``sum_k eps^k G_k(u + Delta)`` truncated at ``E``."""
    out: dict[int, JetExpr] = {}
    for k, g in terms.coeffs.items():
        if k > E:
            continue
        for j, v in _substitute(g, shift, E - k).coeffs.items():
            out[j + k] = out.get(j + k, ZERO) + v
    return EpsSeries(out, E, ZERO)


def invert_transform(T: MiuraTransform, E: int | None = None) -> MiuraTransform:
    """The transform ``v -> u`` by fixed-point iteration ``H <- -G(v + H)``."""
    E = T.order if E is None else E
    if E > T.order:
        raise TruncationError(f"transform known to order {T.order}, inverse requested to {E}")
    G = T.terms.truncate(E)
    H = EpsSeries({}, E, ZERO)
    for _ in range(E + 1):
        new = -_substitute_into(G, _Shift(H), E)
        if new == H:
            break
        H = new
    return MiuraTransform(H, check=False)


def compose(T1: MiuraTransform, T2: MiuraTransform, E: int | None = None) -> MiuraTransform:
    """Apply ``T1`` then ``T2``: ``w = v + G2(v)`` with ``v = u + G1(u)``."""
    E = min(T1.order, T2.order) if E is None else E
    if E > T1.order or E > T2.order:
        raise TruncationError("compose: truncation order exceeds an operand's order")
    G1 = T1.terms.truncate(E)
    total = G1 + _substitute_into(T2.terms.truncate(E), _Shift(G1), E)
    return MiuraTransform(total, check=False)


# ---------------------------------------------------------------------------
# pencils as eps-series of kernels

def kernel_series(B: KernelBivector, E: int) -> EpsSeries:
    """Split an eps-bearing kernel into its eps-graded parts."""
    parts: dict[int, list] = {}
    for l, c in enumerate(B.coeffs):
        for k, ck in c.split_eps().items():
            parts.setdefault(k, [ZERO] * len(B.coeffs))[l] = ck
    return EpsSeries({k: KernelBivector(v) for k, v in parts.items()}, E, ZERO_OP)


def series_kernel(S: EpsSeries) -> KernelBivector:
    """Recombine an eps-series of kernels into one eps-bearing kernel."""
    out = ZERO_OP
    for k, B in S.coeffs.items():
        out = out + B.scale(EPS ** k) if k else out + B
    return KernelBivector(out.coeffs)


def pencil_from_kernels(B1: KernelBivector, B2: KernelBivector, E: int) -> Pencil:
    return kernel_series(B1, E), kernel_series(B2, E)


def undeformed_pencil(phi_expr: JetExpr, E: int) -> Pencil:
    w1, w2 = hydrodynamic_pencil(phi_expr)
    return EpsSeries({0: w1}, E, ZERO_OP), EpsSeries({0: w2}, E, ZERO_OP)


def pencil_difference(P: Pencil, Q: Pencil) -> Pencil:
    return P[0] - Q[0], P[1] - Q[1]


def _compose_ops(a: DiffOp, b: DiffOp) -> DiffOp:
    return a.compose(b)


def pushforward(pencil: Sequence[EpsSeries], T: MiuraTransform, E: int | None = None,
                check: bool = True) -> Pencil:
    """Brackets of ``v = u + sum eps^k G_k`` expressed in the v-jets, truncated at ``E``.

    Accepts any sequence of eps-series of kernels (a pencil is a pair).
    """
    E = T.order if E is None else E
    if E > T.order:
        raise TruncationError(f"transform truncated at {T.order} < {E}")
    for S in pencil:
        if S.order < E:
            raise TruncationError(f"bracket truncated at {S.order} < {E}")
    if T.truncate(E).is_identity():
        return tuple(S.truncate(E) for S in pencil)

    DV = EpsSeries({0: DiffOp.identity()}, E, DiffOp(()))
    for k, g in T.terms.coeffs.items():
        if k <= E:
            DV = DV + EpsSeries({k: frechet_operator(g)}, E, DiffOp(()))
    DVt = DV.map(lambda op: op.adjoint())
    shift = _Shift(invert_transform(T, E).terms)

    out = []
    for S in pencil:
        K = DV.mul(S.truncate(E), _compose_ops).mul(DVt, _compose_ops)
        coeffs: dict[int, dict[int, JetExpr]] = {}
        for k, op in K.coeffs.items():
            for l, c in enumerate(op.coeffs):
                if not c:
                    continue
                for j, v in _substitute(c, shift, E - k).coeffs.items():
                    row = coeffs.setdefault(j + k, {})
                    row[l] = row.get(l, ZERO) + v
        series = EpsSeries(
            {k: KernelBivector(row.get(l, ZERO) for l in range(max(row) + 1))
             for k, row in coeffs.items()}, E, ZERO_OP)
        if check:
            for k, B in series.coeffs.items():
                ok, bad = is_antisymmetric(B)
                if not ok:
                    raise ArithmeticError(
                        f"pushforward produced a non-antisymmetric eps^{k} kernel (index {bad})")
        out.append(series)
    return tuple(out)
