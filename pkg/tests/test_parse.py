from gmpy2 import mpq
import pytest

from quasitrivial.jetring import EPS, format_expr, log, phi, total_derivative, u
from quasitrivial.parse import ParseError, parse_expr


def test_simple_rational():
    assert parse_expr("u1^2/2") == (u(1) ** 2).scale(mpq(1, 2))


def test_function_derivative():
    assert parse_expr("phi'(u)*u1") == phi(1) * u(1)
    assert parse_expr("phi''(u)") == phi(2)


def test_dx_log():
    expected = total_derivative(total_derivative(log(u(1)))).scale(mpq(1, 24))
    assert parse_expr("1/24 * dx(dx(log(u1)))") == expected
    assert expected == (u(3) / u(1) - u(2) ** 2 / u(1) ** 2).scale(mpq(1, 24))


def test_negative_powers_and_unary_minus():
    assert parse_expr("-u1^-2*u2") == -(u(2) / u(1) ** 2)
    assert parse_expr("u - -u") == u(0).scale(2)


def test_eps_is_opt_in():
    with pytest.raises(ParseError):
        parse_expr("eps^2*u1")
    assert parse_expr("eps^2*u1", allow_eps=True) == EPS ** 2 * u(1)


@pytest.mark.parametrize("text, col", [
    ("u1 +", 5),
    ("u1 * (u2", 9),
    ("phi(x)", 5),
    ("u1 $ u2", 4),
    ("", 1),
])
def test_errors_carry_position(text, col):
    with pytest.raises(ParseError) as info:
        parse_expr(text, line=3)
    assert info.value.line == 3
    assert info.value.col == col
    assert "line 3" in str(info.value)


def test_error_lists_expected_tokens():
    with pytest.raises(ParseError) as info:
        parse_expr("u1 +")
    assert info.value.expected


def test_division_by_non_monomial_rejected():
    with pytest.raises(ParseError):
        parse_expr("1/(u+u1)")


@pytest.mark.parametrize("text", [
    "u1^2/2",
    "phi'(u)*u1 + 3/7*u*u2",
    "log(u1)*u2 - u1^-3*u3",
    "1/24*dx(dx(log(u1)))",
    "dx(phi(u)*log(u1))",
])
def test_round_trip(text):
    e = parse_expr(text)
    assert parse_expr(format_expr(e)) == e
