from gmpy2 import mpq
import pytest
from hypothesis import given, strategies as st

from quasitrivial.jetring import EPS, ONE, ZERO, JetExpr, log, phi, total_derivative, u
from quasitrivial.multivec import DiffOp, KernelBivector, hydrodynamic_pencil, is_poisson, are_compatible
from quasitrivial.series import EpsSeries, TruncationError
from quasitrivial.transform import (
    MiuraTransform,
    compose,
    frechet,
    invert_transform,
    pushforward,
    series_kernel,
    substitute,
    undeformed_pencil,
)

from strategies import coefs, homogeneous

G2_KDV = total_derivative(total_derivative(log(u(1)))).scale(mpq(1, 24))


def random_transform(draw, E, funcs=False):
    terms = {1: u(1).scale(draw(coefs))}
    for k in range(2, E + 1):
        terms[k] = draw(homogeneous(k, maxjet=k, max_terms=2, funcs=funcs))
    return MiuraTransform(terms, E)


transforms = st.composite(lambda draw, E=3: random_transform(draw, E))


def test_frechet_examples():
    assert frechet(u(0)) == DiffOp((ONE,))
    assert frechet(u(0) ** 2) == DiffOp((u(0).scale(2),))
    L = frechet(u(0) + EPS ** 2 * G2_KDV)
    c = mpq(1, 24) * EPS ** 2
    assert L.coeffs[0] == ONE
    assert L.coeffs[1] == c * (-u(3) / u(1) ** 2 + (u(2) ** 2 / u(1) ** 3).scale(2))
    assert L.coeffs[2] == c * (u(2) / u(1) ** 2).scale(-2)
    assert L.coeffs[3] == c / u(1)
    assert len(L.coeffs) == 4


def test_transform_law_scales_bilinearly():
    # v = 2u: D_V o d o D_V^+ = 4 d
    DV = frechet(u(0).scale(2))
    K = DV.compose(DiffOp((ZERO, ONE))).compose(DV.adjoint())
    assert K == DiffOp((ZERO, JetExpr.const(4)))


def test_transform_validation():
    with pytest.raises(ValueError):
        MiuraTransform({0: u(1)}, 2)
    with pytest.raises(ValueError):
        MiuraTransform({2: u(1)}, 2)
    MiuraTransform({2: G2_KDV}, 2)


def test_pushforward_identity():
    pencil = undeformed_pencil(phi(0), 3)
    out = pushforward(pencil, MiuraTransform.identity(3))
    assert out == pencil


def test_invert_examples():
    T = MiuraTransform({1: u(1)}, 3)
    inv = invert_transform(T)
    assert inv.terms.coeffs == {1: -u(1), 2: u(2), 3: -u(3)}
    T2 = MiuraTransform({2: G2_KDV}, 3)
    assert invert_transform(T2).terms.coeffs == {2: -G2_KDV}


def test_compose_examples():
    T = MiuraTransform({1: u(1), 2: u(0) * u(2)}, 3)
    assert compose(MiuraTransform.identity(3), T) == T
    assert compose(T, MiuraTransform.identity(3)) == T
    assert compose(T, invert_transform(T)).is_identity()
    a = MiuraTransform({1: u(1).scale(3)}, 1)
    b = MiuraTransform({1: (u(0) * u(1)).scale(-2)}, 1)
    assert compose(a, b).G(1) == u(1).scale(3) - (u(0) * u(1)).scale(2)


def test_truncation_errors():
    T = MiuraTransform({1: u(1)}, 2)
    with pytest.raises(TruncationError):
        invert_transform(T, 3)
    with pytest.raises(TruncationError):
        pushforward(undeformed_pencil(ONE, 1), T, 2)
    with pytest.raises(TruncationError):
        EpsSeries({}, 2, ZERO)[3]


def test_substitute_is_taylor_expansion():
    f = u(0) ** 3 * u(1)
    delta = EpsSeries({1: u(2)}, 2, ZERO)
    got = substitute(f, delta)
    assert got[0] == f
    assert got[1] == (u(0) ** 2 * u(1) * u(2)).scale(3) + u(0) ** 3 * u(3)
    assert got[2] == (u(0) * u(1) * u(2) ** 2).scale(3) + (u(0) ** 2 * u(2) * u(3)).scale(3)


@given(transforms())
def test_compose_with_inverse_is_identity(T):
    inv = invert_transform(T)
    assert compose(T, inv).is_identity()
    assert compose(inv, T).is_identity()


@given(transforms(), transforms(), transforms())
def test_compose_is_associative(a, b, c):
    assert compose(compose(a, b), c) == compose(a, compose(b, c))


@given(transforms(E=2), transforms(E=2))
def test_pushforward_along_composition(a, b):
    pencil = undeformed_pencil(ONE, 2)
    assert pushforward(pencil, compose(a, b)) == pushforward(pushforward(pencil, a), b)


@given(transforms(E=2))
def test_pushforward_preserves_poisson(T):
    out = pushforward(undeformed_pencil(u(0), 2), T)
    B1, B2 = series_kernel(out[0]), series_kernel(out[1])
    assert is_poisson(B1, 2)[0]
    assert is_poisson(B2, 2)[0]
    assert are_compatible(B1, B2, 2)[0]


@given(transforms(E=2))
def test_pushforward_keeps_degrees(T):
    from quasitrivial.jetring import degree

    out = pushforward(undeformed_pencil(phi(0), 2), T)
    for S in out:
        for k in (1, 2):
            for l, c in enumerate(S[k].coeffs):
                assert not c or degree(c) == k + 1 - l


def test_shift_series():
    s = EpsSeries({1: u(1), 2: u(2)}, 3, ZERO)
    assert s.shift(1).coeffs == {2: u(1), 3: u(2)}
    assert s.valuation() == 1
    assert (s - s).is_zero()
