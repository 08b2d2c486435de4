from gmpy2 import mpq
import pytest
from hypothesis import given, strategies as st

from quasitrivial.jetring import EPS, ONE, ZERO, JetExpr, phi, u
from quasitrivial.multivec import (
    DiffOp,
    Exactness,
    KernelBivector,
    LocalFunctional,
    NotAntisymmetricError,
    ThetaDensity,
    are_compatible,
    d,
    density_to_bivector,
    density_to_vector_field,
    hamiltonian_flow,
    hydrodynamic_pencil,
    is_antisymmetric,
    is_exact_density,
    is_poisson,
    kernel_normalize,
    lie_derivative_bivector,
    normal_form,
    schouten,
)

from strategies import jet_exprs, polys

half = mpq(1, 2)
KDV2 = KernelBivector((u(1).scale(half), u(0), ZERO, EPS ** 2 * JetExpr.const(mpq(1, 8))))


def test_kernel_normalize_examples():
    assert kernel_normalize([(ONE, u(0), 1)]) == KernelBivector((u(1), u(0)))
    assert kernel_normalize([(u(0), ONE, 0)]) == KernelBivector((u(0),))
    got = kernel_normalize([(ONE, phi(0), 2)])
    assert got == KernelBivector((phi(2) * u(1) ** 2 + phi(1) * u(2), (phi(1) * u(1)).scale(2), phi(0)))


def test_antisymmetry_examples():
    w1, _ = hydrodynamic_pencil(phi(0))
    assert is_antisymmetric(w1) == (True, None)
    assert is_antisymmetric(KernelBivector((ZERO, u(0))))[0] is False
    assert is_antisymmetric(KernelBivector((ZERO, ZERO, ZERO, ONE)))[0] is True


def test_poisson_examples():
    _, w2 = hydrodynamic_pencil(phi(0))
    assert is_poisson(w2)[0]
    assert is_poisson(KDV2)[0]
    assert is_poisson(KernelBivector((u(0) * u(1), u(0) ** 2)))[0]
    with pytest.raises(NotAntisymmetricError):
        is_poisson(KernelBivector((ZERO, u(0))))


def test_third_order_perturbation_breaks_jacobi():
    # u^2 d^3 + its antisymmetric completion is not Poisson
    A3 = u(0) ** 2
    B = KernelBivector.from_op(DiffOp((ZERO, ZERO, ZERO, A3)))
    B = KernelBivector((B - B.adjoint()).scale(half).coeffs)
    assert is_antisymmetric(B)[0]
    assert not is_poisson(B)[0]


def test_hamiltonian_flow_examples():
    w1, _ = hydrodynamic_pencil(ONE)
    assert hamiltonian_flow(w1, (u(0) ** 3).scale(mpq(1, 6))).component == u(0) * u(1)
    assert hamiltonian_flow(w1, u(0)).component == ZERO
    assert hamiltonian_flow(KDV2, u(0)).component == u(1).scale(half)


def test_schouten_matches_flow():
    w1, _ = hydrodynamic_pencil(ONE)
    H = (u(0) ** 2).scale(half)
    v = schouten(ThetaDensity.bivector(w1), ThetaDensity.functional(H))
    assert density_to_vector_field(v).component == u(1)
    assert d(1, ThetaDensity.functional(H), hydrodynamic_pencil(ONE)) == v


def test_lie_derivative_examples():
    w1, _ = hydrodynamic_pencil(ONE)
    assert not lie_derivative_bivector(u(1), w1)
    assert lie_derivative_bivector(ONE, KDV2) == KernelBivector((ZERO, ONE))


def test_lie_derivative_matches_schouten():
    pencil = hydrodynamic_pencil(phi(0))
    X = u(0) * u(2) + phi(1) * u(1) ** 2
    for i in (1, 2):
        via_theta = density_to_bivector(d(i, ThetaDensity.vector_field(X), pencil))
        assert via_theta == lie_derivative_bivector(X, pencil[i - 1])


def test_compatibility_and_constants():
    pencil = hydrodynamic_pencil(phi(0))
    assert are_compatible(*pencil)[0]
    assert d(1, ThetaDensity.bivector(pencil[1]), pencil).var_theta().is_zero()
    assert normal_form(d(2, ThetaDensity.functional(JetExpr.const(5)), pencil)).is_zero()


def test_exactness_verdicts():
    assert is_exact_density(u(1) * u(2)) is Exactness.EXACT
    assert is_exact_density(u(1) ** 2) is Exactness.NOT_EXACT
    assert is_exact_density(u(3) / u(1) - u(2) ** 2 / u(1) ** 2) is Exactness.EXACT
    assert LocalFunctional(u(0) * u(1) + u(0)).equivalent(LocalFunctional(u(0)))


def test_thetadensity_degree_guard():
    with pytest.raises(ValueError):
        ThetaDensity({(0, 1): u(0)}, 1)


# --- properties -------------------------------------------------------------

@st.composite
def theta_densities(draw, deg):
    if deg == 0:
        return ThetaDensity.scalar(draw(polys(maxjet=2, max_terms=2)))
    if deg == 1:
        return ThetaDensity.vector_field(draw(polys(maxjet=2, max_terms=2)))
    terms = {}
    for k in draw(st.lists(st.integers(1, 3), min_size=1, max_size=2, unique=True)):
        terms[(0, k)] = draw(polys(maxjet=1, max_terms=2))
    return ThetaDensity(terms, 2)


degrees = st.integers(0, 2)


def _nf(h):
    return normal_form(h)


# sign conventions of the super-variable calculus:
#   [P, Q] = (-1)^(pq) [Q, P]
#   (-1)^(pr) [[P, Q], R] + (-1)^(qp) [[Q, R], P] + (-1)^(rq) [[R, P], Q] = 0

@given(degrees.flatmap(lambda p: st.tuples(st.just(p), theta_densities(p))),
       degrees.flatmap(lambda q: st.tuples(st.just(q), theta_densities(q))))
def test_schouten_graded_symmetry(Pp, Qq):
    (p, P), (q, Q) = Pp, Qq
    if p + q == 0:
        return
    assert _nf(schouten(P, Q)) == _nf(schouten(Q, P).scale((-1) ** (p * q)))


def _jacobi(P, p, Q, q, R, r):
    return (schouten(schouten(P, Q), R).scale((-1) ** (p * r))
            + schouten(schouten(Q, R), P).scale((-1) ** (q * p))
            + schouten(schouten(R, P), Q).scale((-1) ** (r * q)))


@given(theta_densities(1), theta_densities(1), theta_densities(1))
def test_schouten_jacobi_vector_fields(X, Y, Z):
    assert _nf(_jacobi(X, 1, Y, 1, Z, 1)).is_zero()


@given(theta_densities(2), theta_densities(1), theta_densities(0))
def test_schouten_jacobi_mixed(B, X, H):
    assert _nf(_jacobi(B, 2, X, 1, H, 0)).is_zero()


@given(theta_densities(2), theta_densities(2), theta_densities(0))
def test_schouten_jacobi_two_bivectors(B, C, H):
    assert _nf(_jacobi(B, 2, C, 2, H, 0)).is_zero()


@given(polys(maxjet=2, max_terms=2), st.sampled_from([1, 2]))
def test_d_squared_on_functionals(f, i):
    pencil = hydrodynamic_pencil(phi(0))
    once = d(i, ThetaDensity.functional(f), pencil)
    assert _nf(d(i, once, pencil)).is_zero()


@given(polys(maxjet=2, max_terms=2), st.sampled_from([1, 2]))
def test_d_squared_on_vector_fields(X, i):
    pencil = hydrodynamic_pencil(phi(0))
    once = d(i, ThetaDensity.vector_field(X), pencil)
    assert _nf(d(i, once, pencil)).is_zero()


@given(polys(maxjet=2, max_terms=2))
def test_d1_d2_anticommute(X):
    pencil = hydrodynamic_pencil(phi(0))
    a = ThetaDensity.vector_field(X)
    assert _nf(d(1, d(2, a, pencil), pencil) + d(2, d(1, a, pencil), pencil)).is_zero()


@given(jet_exprs(maxjet=2, max_terms=2, logs=False))
def test_adjoint_is_an_involution(c):
    op = DiffOp((c, u(1), c * u(0)))
    assert op.adjoint().adjoint() == op


@given(polys(maxjet=2, max_terms=2), polys(maxjet=2, max_terms=2))
def test_compose_then_apply(a, b):
    A, B = DiffOp((a, b)), DiffOp((b, ZERO, a))
    f = u(0) * u(1)
    assert A.compose(B).apply(f) == A.apply(B.apply(f))
