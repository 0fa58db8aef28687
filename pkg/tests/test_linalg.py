import numpy as np
import pytest

from conftest import rand_sym, rel_fro
from tensortrace import CapExceededError, DomainError, FormatError, Ordering, eig_sym, kron, matfun_single, parse_expr
from tensortrace import psd_order
from tensortrace.linalg import parse_matrix, snap_to_domain, sym_matrix
from tensortrace.expr import Interval


def test_eig_2x2():
    lam, vec = eig_sym([[2.0, 1.0], [1.0, 2.0]])
    assert np.allclose(lam, [1.0, 3.0], atol=1e-14)
    assert np.allclose(vec @ np.diag(lam) @ vec.T, [[2, 1], [1, 2]], atol=1e-14)


def test_eig_identity():
    lam, vec = eig_sym(np.eye(3))
    assert np.array_equal(lam, [1.0, 1.0, 1.0])
    assert np.max(np.abs(vec.T @ vec - np.eye(3))) <= 1e-10


def test_eig_diagonal():
    lam, vec = eig_sym(np.diag([5.0, -2.0, 0.0]))
    assert np.array_equal(lam, [-2.0, 0.0, 5.0])
    assert np.array_equal(np.abs(vec), np.eye(3)[:, [1, 2, 0]])


def test_eig_random_reconstruction():
    rng = np.random.default_rng(0)
    for _ in range(500):
        n = int(rng.integers(1, 13))
        a = rng.uniform(-10, 10, (n, n))
        m = (a + a.T) / 2
        lam, vec = eig_sym(m)
        assert np.all(np.diff(lam) >= 0)
        assert np.max(np.abs(vec.T @ vec - np.eye(n))) <= 1e-10
        assert np.max(np.abs(vec @ np.diag(lam) @ vec.T - m)) <= 1e-8 * max(1.0, np.max(np.abs(m)))


def test_eig_sign_convention_and_determinism(rng):
    m = rand_sym(rng, 6)
    a, b = eig_sym(m), eig_sym(m.copy())
    assert a.eigenvalues.tobytes() == b.eigenvalues.tobytes()
    assert a.vectors.tobytes() == b.vectors.tobytes()
    for col in a.vectors.T:
        first = col[np.abs(col) > 1e-12][0]
        assert first > 0


def test_sym_matrix_rejects_asymmetric():
    with pytest.raises(ValueError):
        sym_matrix([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(ValueError):
        sym_matrix([[1.0, np.nan], [np.nan, 1.0]])
    out = sym_matrix([[1.0, 2.0 + 1e-14], [2.0, 1.0]])
    assert out[0, 1] == out[1, 0]


def test_kron_identity_blocks(rng):
    b = rng.standard_normal((2, 3))
    k = kron(np.eye(2), b)
    assert np.array_equal(k[:2, :3], b) and np.array_equal(k[2:, 3:], b)
    assert not k[:2, 3:].any() and not k[2:, :3].any()


def test_kron_diagonal():
    k = kron(np.diag([1.0, 2.0]), np.diag([3.0, 1.0]))
    assert np.array_equal(k, np.diag([3.0, 1.0, 6.0, 2.0]))
    assert np.trace(k) == 12.0


def test_kron_trace_random(rng):
    for _ in range(20):
        a, b = rng.standard_normal((3, 3)), rng.standard_normal((3, 3))
        assert abs(np.trace(kron(a, b)) - np.trace(a) * np.trace(b)) <= 1e-10


def test_kron_cap():
    with pytest.raises(CapExceededError):
        kron(np.eye(65), np.eye(64))
    assert kron(np.eye(64), np.eye(64)).shape == (4096, 4096)


def test_psd_order_examples(rng):
    assert psd_order(2 * np.eye(3), np.eye(3)) == Ordering.SUCCEEDS
    assert psd_order(np.eye(3), 2 * np.eye(3)) == Ordering.PRECEDES
    assert psd_order(np.diag([1.0, -1.0]), np.zeros((2, 2))) == Ordering.INCOMPARABLE
    m = rand_sym(rng, 4)
    assert psd_order(m, m.copy()) == Ordering.EQUAL


def test_psd_order_dimension_mismatch():
    with pytest.raises(ValueError):
        psd_order(np.eye(2), np.eye(3))


def test_psd_order_antisymmetry(rng):
    # succeeds both ways implies max|A - B| <= tol (constant c = 1)
    tol = 1e-6
    for _ in range(200):
        n = int(rng.integers(1, 6))
        a = rand_sym(rng, n)
        b = a + rand_sym(rng, n, scale=tol * rng.uniform(0, 2))
        if psd_order(a, b, tol) == Ordering.EQUAL:
            assert np.max(np.abs(a - b)) <= n * tol


def test_matfun_single_square():
    f = parse_expr("x1^2", 1)
    assert np.allclose(matfun_single(f, [[2.0, 1.0], [1.0, 2.0]]), [[5, 4], [4, 5]], atol=1e-13)


def test_matfun_single_constant(rng):
    out = matfun_single(parse_expr("1", 1), rand_sym(rng, 5))
    assert np.allclose(out, np.eye(5), atol=1e-14)


def test_matfun_single_cube(rng):
    for _ in range(20):
        m = rand_sym(rng, 4)
        assert rel_fro(matfun_single(parse_expr("x1^3", 1), m), m @ m @ m) <= 1e-8


def test_matfun_single_polynomial_horner(rng):
    coeffs = [0.5, -1.0, 2.0, 0.25, -0.75]  # highest degree first
    text = " + ".join(f"({c})*x1^{len(coeffs) - 1 - i}" for i, c in enumerate(coeffs))
    f = parse_expr(text, 1)
    for _ in range(50):
        n = int(rng.integers(1, 8))
        m = rand_sym(rng, n)
        horner = np.zeros((n, n))
        for c in coeffs:
            horner = horner @ m + c * np.eye(n)
        assert rel_fro(matfun_single(f, m), horner) <= 1e-8


def test_matfun_single_domain_error():
    f = parse_expr("log(x1)", 1, "pos")
    with pytest.raises(DomainError, match="-1.0"):
        matfun_single(f, np.diag([2.0, -1.0]))
    with pytest.raises(ValueError):
        matfun_single(parse_expr("x1*x2", 2), np.eye(2))


def test_snap_closed_endpoint():
    iv = Interval.parse("[0, 1]")
    out = snap_to_domain([-1e-13, 0.5, 1 + 1e-13], iv)
    assert list(out) == [0.0, 0.5, 1.0]
    with pytest.raises(DomainError):
        snap_to_domain([-1e-6], iv)
    with pytest.raises(DomainError):
        snap_to_domain([0.0], Interval.parse("pos"))


def test_parse_matrix_format():
    m = parse_matrix("2\n1 2\n2 3\n")
    assert np.array_equal(m, [[1, 2], [2, 3]])
    with pytest.raises(FormatError, match="m.txt:3:"):
        parse_matrix("2\n1 2\n2\n", "m.txt")
    with pytest.raises(FormatError, match="not a number"):
        parse_matrix("1\nabc\n")
    with pytest.raises(FormatError, match="symmetric"):
        parse_matrix("2\n1 2\n3 4\n")
