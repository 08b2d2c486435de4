from gmpy2 import mpq
import pytest
from hypothesis import given, strategies as st

from quasitrivial.jetring import ONE, ZERO, JetExpr, log, order, partial_jet, phi, u
from quasitrivial.multivec import DiffOp, KernelBivector
from quasitrivial.quasitriv import (
    HydroPencil,
    InvariantViolation,
    NotExact,
    PreconditionError,
    ShapeError,
    d_invert,
    kernel_degree,
    lemma1_reduce,
    lemma2_extract,
    lemma3_lhs,
    lemma4_lhs,
    proposition1_solve,
    residual,
    trivialize,
)
from quasitrivial.series import EpsSeries
from quasitrivial.transform import MiuraTransform, pushforward, undeformed_pencil

from strategies import coefs, homogeneous

SYM = HydroPencil()
FLAT = HydroPencil(ONE)


@st.composite
def jet_polys(draw, maxjet, max_terms=3):
    """Random polynomials in u..u_maxjet, optionally times phi^(j)."""
    e = ZERO
    for _ in range(draw(st.integers(1, max_terms))):
        t = JetExpr.const(draw(coefs))
        for k in range(maxjet + 1):
            t = t * u(k) ** draw(st.integers(0, 2))
        if draw(st.booleans()):
            t = t * phi(draw(st.integers(0, 2)))
        e = e + t
    return e


# --- removing the F u_N part ---------------------------------------------

def test_top_reduction_odd_example():
    I, J = lemma1_reduce(u(1) * u(3), 3, FLAT)
    assert I.density == (u(1) ** 3).scale(mpq(-1, 6))
    assert J.density == ZERO
    rest = u(1) * u(3) - FLAT.d_functional(1, I)
    assert rest == -u(2) ** 2
    assert order(rest) == 2


def test_top_reduction_even_example():
    I, J = lemma1_reduce(u(2), 2, FLAT)
    H = (u(1) * log(u(1)) - u(1)).scale(mpq(-2, 3))
    assert J.density == H
    assert I.density == u(0) * H


def test_top_reduction_zero():
    I, J = lemma1_reduce(u(0) * u(1) ** 2, 3, SYM)
    assert I.density == ZERO and J.density == ZERO


def test_top_reduction_rejects_high_F():
    with pytest.raises(ShapeError):
        lemma1_reduce(u(2) * u(3), 3, SYM)


@given(st.sampled_from([1, 2, 3, 4, 5]).flatmap(lambda N: st.tuples(st.just(N), jet_polys(N // 2, 2))))
def test_top_reduction_lowers_order(case):
    N, F = case
    I, J = lemma1_reduce(F * u(N), N, SYM)
    rest = F * u(N) - SYM.d_functional(1, I) + SYM.d_functional(2, J)
    assert order(rest) < N


# --- shape extraction ------------------------------------------------------

def test_shape_example():
    sp = lemma2_extract(u(0) * u(2) + u(1) ** 2, u(2), 2)
    assert (sp.G, sp.F, sp.Q, sp.R) == (ONE, ZERO, u(1) ** 2, ZERO)
    assert sp.reassemble() == (sp.X, sp.Y)


def test_shape_rejects_quadratic_top():
    with pytest.raises(ShapeError):
        lemma2_extract(u(2) ** 2, u(2), 2)


# --- top-coefficient identities -------------------------------------------

nm = st.sampled_from([(3, 1), (5, 1), (5, 2)])


@given(nm.flatmap(lambda c: st.tuples(st.just(c), *(jet_polys(c[0] - 1, 2) for _ in range(4)))))
def test_odd_order_identity(case):
    (N, m), F, G, Q, R = case
    X, Y = (u(0) * G + F) * u(N) + Q, G * u(N) + R
    assert lemma3_lhs(X, Y, N, m, SYM) == phi(0) * partial_jet(F, N - m)


def test_odd_order_identity_vanishes():
    N, m = 3, 1
    F, G = u(0) * u(1), u(2) * u(1)
    X, Y = (u(0) * G + F) * u(N), G * u(N)
    assert lemma3_lhs(X, Y, N, m, SYM) == ZERO


@given(nm.flatmap(lambda c: st.tuples(st.just(c), jet_polys(c[0] - c[1], 2),
                                     jet_polys(c[0] - 1, 2), jet_polys(c[0] - 1, 2))))
def test_g_identity(case):
    (N, m), G, Q, R = case
    X, Y = u(0) * G * u(N) + Q, G * u(N) + R
    rhs = (phi(0) * u(1) * partial_jet(G, N - m)).scale((-1) ** (N + 1) * mpq(2 * (N - m) + 1, 2))
    assert lemma4_lhs(X, Y, N, m, SYM) == rhs


def test_g_identity_vanishes():
    G = u(0) * u(1)
    assert lemma4_lhs(u(0) * G * u(3), G * u(3), 3, 1, SYM) == ZERO


@given(st.sampled_from([2, 4]).flatmap(lambda N: st.tuples(st.just(N), *(jet_polys(N - 1, 2) for _ in range(4)))))
def test_even_top_coefficient(case):
    N, F, G, Q, R = case
    X, Y = (u(0) * G + F) * u(N) + Q, G * u(N) + R
    assert SYM.Z(X, Y)[N + 1] == (phi(0) * F).scale(-2)


def test_identity_argument_checks():
    with pytest.raises(ShapeError):
        lemma3_lhs(u(4), u(4), 4, 1, SYM)
    with pytest.raises(ShapeError):
        lemma4_lhs(u(1) * u(3), ZERO, 3, 1, SYM)


# --- preimages xi = d_1 I - d_2 J -----------------------------------------

def _round_trip(I0, J0, ctx=SYM):
    X = ctx.d_functional(1, I0) - ctx.d_functional(2, J0)
    Y = ctx.d_functional(1, J0)
    I, J = proposition1_solve(X, Y, ctx)
    return X == ctx.d_functional(1, I.density) - ctx.d_functional(2, J.density)


def test_preimage_example():
    assert _round_trip((u(1) ** 2).scale(mpq(1, 2)), ZERO)
    assert _round_trip((u(1) ** 2).scale(mpq(1, 2)), ZERO, FLAT)


def test_preimage_zero():
    I, J = proposition1_solve(ZERO, ZERO, SYM)
    assert I.density == ZERO and J.density == ZERO


def test_preimage_precondition():
    with pytest.raises(PreconditionError):
        proposition1_solve(u(0) * u(2), ZERO, SYM)


def test_preimage_base_case_remainder():
    # xi = 1 is d_1-closed for phi = 1 but has no local preimage
    assert not FLAT.Z(ONE, ZERO)
    with pytest.raises(InvariantViolation):
        proposition1_solve(ONE, ZERO, FLAT)


@given(st.integers(0, 3).flatmap(lambda d: st.tuples(homogeneous(d, max_terms=2) if d else st.just(u(0) ** 2),
                                                    homogeneous(d, max_terms=2) if d else st.just(u(0) ** 3))))
def test_preimage_round_trip(pair):
    I0, J0 = pair
    assert _round_trip(I0, J0)


# --- d_invert --------------------------------------------------------------

def test_kernel_degree():
    assert kernel_degree(KernelBivector((ZERO, ZERO, ZERO, ONE))) == 2
    assert kernel_degree(KernelBivector(())) is None


def test_d_invert_forward_generated():
    Q = SYM.d_vector(1, u(0) * u(1))
    xi = d_invert(1, Q, None, SYM)
    assert SYM.d_vector(1, xi.component) == Q


def test_d_invert_zero():
    assert d_invert(1, KernelBivector(()), 2, SYM).component == ZERO


def test_d_invert_kdv_second_order():
    Q = KernelBivector((ZERO, ZERO, ZERO, JetExpr.const(mpq(1, 8))))
    for i in (1, 2):
        xi = d_invert(i, Q, 2, FLAT)
        assert FLAT.d_vector(i, xi.component) == Q


def test_d_invert_not_exact():
    op = DiffOp((ZERO, ZERO, ZERO, u(0)))
    B = KernelBivector((op - op.adjoint()).scale(mpq(1, 2)).coeffs)
    with pytest.raises(NotExact):
        d_invert(1, B, None, HydroPencil(u(0)))


@given(homogeneous(2, max_terms=2), st.sampled_from([1, 2]))
def test_d_invert_inverts_forward(X, i):
    Q = SYM.d_vector(i, X)
    if not Q:
        return
    xi = d_invert(i, Q, None, SYM)
    assert SYM.d_vector(i, xi.component) == Q


# --- trivialize ------------------------------------------------------------

def test_trivialize_undeformed_is_identity():
    assert trivialize(undeformed_pencil(phi(0), 3), 3).is_identity()


@pytest.mark.parametrize("phi_expr", [ONE, u(0)])
def test_trivialize_synthetic(phi_expr):
    T0 = MiuraTransform({1: u(1).scale(2), 2: u(0) * u(2) + u(1) ** 2}, 2)
    deformed = pushforward(undeformed_pencil(phi_expr, 2), T0)
    T = trivialize(deformed, 2)
    r1, r2 = residual(deformed, T, 2, phi_expr)
    assert r1.is_zero() and r2.is_zero()


def test_trivialize_rejects_inhomogeneous():
    base = undeformed_pencil(ONE, 2)
    bad = (base[0], base[1] + EpsSeries({2: KernelBivector((ZERO, u(1)))}, 2, KernelBivector(())))
    with pytest.raises(PreconditionError):
        trivialize(bad, 2)


def test_trivialize_rejects_non_poisson():
    base = undeformed_pencil(ONE, 2)
    op = DiffOp((ZERO, ZERO, ZERO, u(0)))
    B = KernelBivector((op - op.adjoint()).scale(mpq(1, 2)).coeffs)
    bad = (base[0], base[1] + EpsSeries({2: B}, 2, KernelBivector(())))
    with pytest.raises(PreconditionError):
        trivialize(bad, 2)


def test_trivialize_rejects_wrong_leading_order():
    base = undeformed_pencil(ONE, 1)
    bad = (base[1], base[1])
    with pytest.raises(PreconditionError):
        trivialize(bad, 1)
