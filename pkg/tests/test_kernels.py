import numpy as np
import pytest

from tensortrace import kernels, parse_expr, partial
from tensortrace.expr import evaluate
from tensortrace.randfun import random_function

needs_compiled = pytest.mark.skipif("compiled" not in kernels.BACKENDS, reason="compiled kernels not built")

# bit identity covers + - * / and integer powers up to POWI_UNROLL; exp, log,
# real powers and larger integer powers go through libm / numpy, which may
# differ by an ulp
RATIONAL = ["x1*x2", "1/(x1^2*x2) + 1/(x1*x2^2)", "x1^3*x2^5 - x2^-7", "(x1 - x2)^2 / (1 + x1*x2)", "x1^8 + x2^0 - x2^-8"]


def _eigs(rng, m, n, lo=0.5, hi=2.0):
    return rng.uniform(lo, hi, (m, n))


def test_default_backend_is_known():
    assert kernels.BACKEND in kernels.BACKENDS
    assert "python" in kernels.BACKENDS


def test_trace_sum_matches_enumeration(rng):
    import itertools
    f = parse_expr("exp(x1/3)*x2 - log(x1 + x2)", 2, "pos")
    eigs = _eigs(rng, 2, 5)
    want = 0.0
    for combo in itertools.product(*eigs):
        want += evaluate(f, combo)
    for backend in kernels.BACKENDS:
        got, bad = kernels.trace_sum(f.program, eigs, backend=backend)
        assert bad == -1
        assert got == pytest.approx(want, rel=1e-14)


@needs_compiled
@pytest.mark.parametrize("text", RATIONAL)
def test_backends_bit_identical_on_rational_ops(text, rng):
    f = parse_expr(text, 2, "pos")
    for n in (1, 7, 64, 300):
        eigs = _eigs(rng, 2, n)
        a = kernels.trace_sum(f.program, eigs, backend="compiled")
        b = kernels.trace_sum(f.program, eigs, backend="python")
        assert a == b
        va, _ = kernels.grid_values(f.program, eigs, backend="compiled")
        vb, _ = kernels.grid_values(f.program, eigs, backend="python")
        assert va.tobytes() == vb.tobytes()


@needs_compiled
def test_backends_agree_on_random_trees():
    rng = np.random.default_rng(11)
    for _ in range(100):
        m = int(rng.integers(1, 4))
        f = random_function(m, rng)
        eigs = _eigs(rng, m, int(rng.integers(1, 9)))
        a, _ = kernels.trace_sum(f.program, eigs, backend="compiled")
        b, _ = kernels.trace_sum(f.program, eigs, backend="python")
        assert abs(a - b) <= 1e-13 * max(1.0, abs(b))
    f = parse_expr("x1^12 * x2^-9", 2, "pos")
    eigs = _eigs(rng, 2, 50)
    a, _ = kernels.trace_sum(f.program, eigs, backend="compiled")
    b, _ = kernels.trace_sum(f.program, eigs, backend="python")
    assert abs(a - b) <= 1e-13 * abs(b)


@needs_compiled
def test_marginal_weights_backends(rng):
    f = parse_expr("x1^2*x2 + exp(x2/2)*x3 - 1/(x1 + x3)", 3, "pos")
    progs = [partial(f, k).program for k in (1, 2, 3)]
    eigs = _eigs(rng, 3, 9)
    ca, ka, ia = kernels.marginal_weights(progs, eigs, backend="compiled")
    cb, kb, ib = kernels.marginal_weights(progs, eigs, backend="python")
    assert (ka, ia) == (kb, ib) == (-1, -1)
    assert np.allclose(ca, cb, rtol=1e-13, atol=0)


def test_marginal_weights_definition(rng):
    import itertools
    f = parse_expr("x1*x2^2", 2)
    progs = [partial(f, k).program for k in (1, 2)]
    eigs = _eigs(rng, 2, 4)
    want = np.zeros((2, 4))
    for j1, j2 in itertools.product(range(4), repeat=2):
        x, y = eigs[0, j1], eigs[1, j2]
        want[0, j1] += y * y
        want[1, j2] += 2 * x * y
    for backend in kernels.BACKENDS:
        c, k, _ = kernels.marginal_weights(progs, eigs, backend=backend)
        assert k == -1
        assert np.allclose(c, want, rtol=1e-14)


@pytest.mark.parametrize("backend", sorted(kernels.BACKENDS))
def test_bad_point_detection(backend):
    f = parse_expr("1/(x1 - 1) + log(x2)", 2)
    eigs = np.array([[0.0, 2.0, 1.0], [3.0, 2.0, 1.0]])
    total, bad = kernels.trace_sum(f.program, eigs, backend=backend)
    assert bad == 6  # first point in lexicographic order with x1 == 1
    eigs = np.array([[0.0, 2.0], [1.0, -1.0]])
    _, bad = kernels.trace_sum(f.program, eigs, backend=backend)
    assert bad == 1
    _, bad = kernels.grid_values(parse_expr("exp(x1)", 1).program, np.array([[1.0, 800.0]]), backend=backend)
    assert bad == 1


@pytest.mark.parametrize("backend", sorted(kernels.BACKENDS))
def test_marginal_bad_point(backend):
    f = parse_expr("x1*log(x2)", 2)
    progs = [partial(f, k).program for k in (1, 2)]
    eigs = np.array([[1.0, 2.0], [1.0, 0.0]])
    _, k, idx = kernels.marginal_weights(progs, eigs, backend=backend)
    assert (k, idx) == (0, 1)


@pytest.mark.parametrize("backend", sorted(kernels.BACKENDS))
def test_threads_preserve_order(backend, rng):
    f = parse_expr("x1 / (x2 + x3) - x3^3", 3, "pos")
    eigs = _eigs(rng, 3, 11)
    one = kernels.trace_sum(f.program, eigs, threads=1, backend=backend)
    four = kernels.trace_sum(f.program, eigs, threads=4, backend=backend)
    assert one == four


def test_pairwise_summation_close(rng):
    f = parse_expr("x1*x2 + 1", 2)
    eigs = _eigs(rng, 2, 40)
    seq, _ = kernels.trace_sum(f.program, eigs)
    pw, _ = kernels.trace_sum(f.program, eigs, summation="pairwise")
    assert pw == pytest.approx(seq, rel=1e-13)


def test_empty_grid():
    f = parse_expr("x1", 1)
    assert kernels.trace_sum(f.program, np.zeros((1, 0))) == (0.0, -1)
