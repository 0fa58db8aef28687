import math

import numpy as np
import pytest

from tensortrace import DomainError, Interval, ParseError, evaluate, parse_domain, parse_expr, partial
from tensortrace.expr import POWI_UNROLL, powi
from tensortrace.randfun import random_function


# -- parsing -----------------------------------------------------------------

def test_parse_monomial():
    f = parse_expr("x1^3 * x2^5", 2)
    assert f.arity == 2
    assert evaluate(f, (2, 1)) == 8.0
    assert evaluate(f, (1.5, 0.5)) == pytest.approx(1.5 ** 3 * 0.5 ** 5)


def test_parse_rational():
    f = parse_expr("1/(x1^2*x2) + 1/(x1*x2^2)", 2)
    assert evaluate(f, (1, 1)) == 2.0
    assert evaluate(f, (2, 1)) == pytest.approx(0.25 + 0.5)


def test_parse_identity():
    f = parse_expr("x1", 1)
    assert evaluate(f, (3.25,)) == 3.25


def test_eval_zero_case():
    assert evaluate(parse_expr("x1*x2", 2), (0, 7)) == 0.0


def test_arity_inferred():
    assert parse_expr("x3 + x1").arity == 3
    assert parse_expr("2.5").arity == 1


def test_operator_semantics():
    cases = {
        "2 - 3 - 4": -5.0,
        "2^3^2": 2.0 ** 9,
        "-2^2": -4.0,
        "(-2)^2": 4.0,
        "8 / 4 / 2": 1.0,
        "1 + 2 * 3": 7.0,
        "exp(0) + log(1)": 1.0,
        "4^0.5": 2.0,
        "2e-1 * 10": 2.0,
    }
    for text, want in cases.items():
        assert evaluate(parse_expr(text, 1), (0.0,)) == pytest.approx(want), text


@pytest.mark.parametrize("text,pos", [("x1 +", 4), ("x1 * * x2", 5), ("(x1 + 2", 7), ("x1 $ 2", 3)])
def test_syntax_error_position(text, pos):
    with pytest.raises(ParseError) as err:
        parse_expr(text, 2)
    assert err.value.position == pos


def test_unknown_identifier():
    with pytest.raises(ParseError, match="sin"):
        parse_expr("sin(x1)", 1)
    with pytest.raises(ParseError, match="y"):
        parse_expr("y + 1", 1)


def test_arity_mismatch():
    with pytest.raises(ParseError, match="x3"):
        parse_expr("x1 + x3", 2)


def test_parse_error_message_has_caret():
    with pytest.raises(ParseError) as err:
        parse_expr("x1 + )", 1)
    assert "^" in str(err.value)


# -- domains -----------------------------------------------------------------

def test_domain_violation():
    f = parse_expr("log(x1)", 1)
    with pytest.raises(DomainError):
        evaluate(f, (0.0,))
    with pytest.raises(DomainError):
        evaluate(parse_expr("1/x1", 1), (0.0,))
    with pytest.raises(DomainError):
        evaluate(parse_expr("x1^0.5", 1), (-1.0,))


def test_declared_domain_enforced():
    f = parse_expr("x1 + x2", 2, "pos, [0, 1]")
    assert evaluate(f, (1.0, 1.0)) == 2.0
    with pytest.raises(DomainError, match="x2"):
        evaluate(f, (1.0, 1.5))
    with pytest.raises(DomainError, match="x1"):
        evaluate(f, (0.0, 0.5))


def test_nonfinite_result():
    with pytest.raises(DomainError):
        evaluate(parse_expr("exp(x1)", 1), (1000.0,))


def test_interval_parse():
    assert Interval.parse("pos") == Interval(0.0, math.inf)
    assert Interval.parse("nonneg") == Interval(0.0, math.inf, lo_closed=True)
    assert Interval.parse("[0, 1)") == Interval(0.0, 1.0, True, False)
    with pytest.raises(ValueError):
        Interval.parse("[-inf, 0]")
    with pytest.raises(ValueError):
        Interval(2.0, 1.0)
    assert len(parse_domain("pos", 3)) == 3
    with pytest.raises(ValueError):
        parse_domain("pos, pos", 3)


# -- partial derivatives -----------------------------------------------------

def test_partial_examples():
    f = parse_expr("x1^3 * x2^5", 2)
    d1 = partial(f, 1)
    for p in [(2.0, 1.0), (0.7, 1.3), (-1.1, 0.4)]:
        assert evaluate(d1, p) == pytest.approx(3 * p[0] ** 2 * p[1] ** 5)
    d2 = partial(parse_expr("x1*x2", 2), 2)
    assert evaluate(d2, (4.5, -2.0)) == 4.5
    d = partial(parse_expr("1/(x1^2*x2)", 2), 1)
    for p in [(1.0, 1.0), (2.0, 0.5), (0.3, 3.0)]:
        assert evaluate(d, p) == pytest.approx(-2 / (p[0] ** 3 * p[1]))


def test_partial_keeps_domain_and_arity():
    f = parse_expr("log(x1) * x2", 2, "pos")
    d = partial(f, 1)
    assert d.arity == 2 and d.domain == f.domain


def test_partial_index_checked():
    with pytest.raises(ValueError):
        partial(parse_expr("x1", 1), 2)


def test_partial_of_constant_is_zero():
    assert evaluate(partial(parse_expr("x1 + 3", 2), 2), (1.0, 1.0)) == 0.0


def test_partial_matches_finite_difference_random_trees():
    # 1000 random points over random trees of depth <= 6
    rng = np.random.default_rng(7)
    checked = 0
    while checked < 1000:
        f = random_function(int(rng.integers(1, 4)), rng, depth=6)
        for _ in range(10):
            p = rng.uniform(0.5, 2.0, f.arity)
            k = int(rng.integers(1, f.arity + 1))
            h = 1e-5 * max(1.0, abs(p[k - 1]))
            up, down = p.copy(), p.copy()
            up[k - 1] += h
            down[k - 1] -= h
            fd = (evaluate(f, up) - evaluate(f, down)) / (2 * h)
            exact = evaluate(partial(f, k), p)
            assert abs(exact - fd) <= 1e-5 * max(1.0, abs(fd)), (str(f), p, k)
            checked += 1


# -- printing and determinism ------------------------------------------------

def test_round_trip_random_trees():
    rng = np.random.default_rng(3)
    for _ in range(200):
        f = random_function(int(rng.integers(1, 4)), rng, depth=6)
        g = parse_expr(str(f), f.arity, f.domain)
        for _ in range(5):
            p = rng.uniform(0.5, 2.0, f.arity)
            assert evaluate(g, p) == evaluate(f, p)


def test_round_trip_partials():
    f = parse_expr("exp(x1/3) * x2^-2 - log(x1 + x2)^1.5", 2, "pos")
    for k in (1, 2):
        d = partial(f, k)
        g = parse_expr(str(d), 2, "pos")
        assert evaluate(g, (1.3, 0.7)) == evaluate(d, (1.3, 0.7))


def test_eval_deterministic():
    f = parse_expr("exp(x1) / (1 + x2^3) - log(x1*x2 + 2)", 2)
    p = (0.123456789, 1.987654321)
    first = evaluate(f, p)
    assert all(evaluate(f, p) == first for _ in range(20))


def test_functions_are_immutable():
    f = parse_expr("x1", 1)
    with pytest.raises(AttributeError):
        f.arity = 2


def test_powi_small_exponents_match_pow():
    xs = np.linspace(-3.0, 3.0, 61)
    xs = xs[xs != 0.0]
    for p in range(-POWI_UNROLL - 2, POWI_UNROLL + 3):
        exact = xs.astype(np.longdouble) ** p
        assert np.allclose(powi(xs, p), exact.astype(float), rtol=8e-16 * max(1, abs(p)), atol=0.0)


def test_powi_scalar_and_array_agree():
    xs = np.array([0.3, 1.7, -2.2])
    for p in (-5, -1, 0, 2, 7, 11):
        arr = powi(xs, p)
        assert [powi(float(x), p) for x in xs] == list(arr)
