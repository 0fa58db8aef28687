"""Multivariable matrix functions on tuples of symmetric matrices.

For f of m variables and symmetric M_1..M_m with eigenpairs (lambda_lj, v_lj),
f(M_1, ..., M_m) is the n^m x n^m matrix

    (V_1 (x) ... (x) V_m) diag_{j_1..j_m} f(lambda_1j1, ..., lambda_mjm) (V_1 (x) ... (x) V_m)^T

with the multi-index ordered lexicographically, j_1 slowest.  Its trace is
the plain m-fold sum of f over eigenvalue combinations, which is what the
production path computes without ever forming the big matrix.
"""

import itertools
from functools import reduce

import numpy as np

from . import kernels
from .errors import CapExceededError, DomainError
from .expr import ZERO, evaluate, partial
from .linalg import eig_sym, eig_vals_sym, kron, snap_to_domain, sym_matrix

DENSE_CAP = 512


def as_tuple(mats, arity=None):
    """Validate a tuple of equally sized symmetric matrices."""
    if isinstance(mats, np.ndarray) and mats.ndim == 2:
        mats = [mats]
    out = [sym_matrix(a) for a in mats]
    if not out:
        raise ValueError("matrix tuple must not be empty")
    n = out[0].shape[0]
    if any(a.shape != (n, n) for a in out):
        raise ValueError("all matrices in a tuple must have the same dimension")
    if arity is not None and len(out) != arity:
        raise ValueError(f"function has arity {arity} but {len(out)} matrices were given")
    return out


def _domain_rows(f, rows):
    return np.array([snap_to_domain(r, iv, var=k) for k, (iv, r) in enumerate(zip(f.domain, rows), start=1)])


def _spectra(f, mats):
    mats = as_tuple(mats, f.arity)
    specs = [eig_sym(a) for a in mats]
    eigs = _domain_rows(f, [s.eigenvalues for s in specs])
    return eigs, [s.vectors for s in specs]


def _bad_point(f, eigs, flat, label=None):
    m, n = eigs.shape
    idx = np.unravel_index(flat, (n,) * m)
    point = tuple(float(eigs[l, idx[l]]) for l in range(m))
    multi = tuple(int(i) + 1 for i in idx)
    name = label or str(f)
    return DomainError(f"{name} is undefined or not finite at eigenvalue combination "
                       f"{multi} = {point}")


def trace_from_eigenvalues(f, rows, summation="sequential", threads=1, backend=None):
    """Sum f over every combination (rows[0][j_1], ..., rows[m-1][j_m]).

    ``rows`` holds one eigenvalue vector per argument, all of equal length.
    Domain membership is checked (and closed endpoints snapped) first.
    """
    if len(rows) != f.arity:
        raise ValueError(f"function has arity {f.arity} but {len(rows)} spectra were given")
    eigs = _domain_rows(f, rows)
    total, bad = kernels.trace_sum(f.program, eigs, summation=summation, threads=threads, backend=backend)
    if bad >= 0:
        raise _bad_point(f, eigs, bad)
    return total


def marginals_from_eigenvalues(f, rows, threads=1, backend=None):
    """c[k, j] = sum of the k-th partial of f over combinations whose k-th index is j."""
    eigs = _domain_rows(f, rows)
    partials = [partial(f, k) for k in range(1, f.arity + 1)]
    programs = [None if p.expr == ZERO else p.program for p in partials]
    c, bad_k, bad = kernels.marginal_weights(programs, eigs, threads=threads, backend=backend)
    if bad_k >= 0:
        raise _bad_point(f, eigs, bad, label=f"partial {bad_k + 1} of {f}")
    return c


def matfun_multi_dense(f, mats, cap=DENSE_CAP):
    """Materialize f(M_1, ..., M_m) as an n^m x n^m matrix.

    This is the reference construction: eigenvector Kronecker products and
    one scalar evaluation per multi-index, independent of the kernels.

    Raises
    ------
    CapExceededError
        If n^m exceeds ``cap``.
    DomainError
        If an eigenvalue lies outside the matching domain interval.
    """
    mats = as_tuple(mats, f.arity)
    n = mats[0].shape[0]
    size = n ** len(mats)
    if size > cap:
        raise CapExceededError(f"dense evaluation needs {size}x{size} > cap {cap}")
    eigs, vecs = _spectra(f, mats)
    u = reduce(lambda a, b: kron(a, b, cap=size), vecs)
    vals = np.array([evaluate(f, combo) for combo in itertools.product(*eigs)])
    return (u * vals) @ u.T


def trace_matfun_multi(f, mats, summation="sequential", threads=1, backend=None):
    """Trace of f(M_1, ..., M_m) via the eigenvalue multi-sum, O(n^m) evaluations."""
    mats = as_tuple(mats, f.arity)
    eigs = _domain_rows(f, [eig_vals_sym(a) for a in mats])
    total, bad = kernels.trace_sum(f.program, eigs, summation=summation, threads=threads, backend=backend)
    if bad >= 0:
        raise _bad_point(f, eigs, bad)
    return total


def trace_matfun_diag(f, lap, summation="sequential", threads=1, backend=None):
    """Trace of f(L, L, ..., L) from a single eigendecomposition of L."""
    lam = eig_vals_sym(lap)
    return trace_from_eigenvalues(f, [lam] * f.arity, summation=summation, threads=threads, backend=backend)


def _rate_diagonals(vecs, rates):
    # diag(V^T R V) without forming the product
    return [np.einsum("ij,ij->j", v, r @ v) for v, r in zip(vecs, rates)]


def trace_matfun_derivative(f, mats, rates, threads=1, backend=None):
    """d/dt tr f(M_1(t), ..., M_m(t)) given the values M_l and rates dM_l/dt.

    Uses the eigenbasis form sum_k sum_j d_k f(lambda_j) [V_k^T R_k V_k]_{j_k j_k}.
    Within a degenerate eigenvalue cluster the individual diagonal entries
    depend on the chosen basis but their sum, which is all that enters,
    does not.
    """
    mats = as_tuple(mats, f.arity)
    rates = as_tuple(rates, f.arity)
    if rates[0].shape != mats[0].shape:
        raise ValueError("rates must have the same dimension as the matrices")
    eigs, vecs = _spectra(f, mats)
    c = marginals_from_eigenvalues(f, list(eigs), threads=threads, backend=backend)
    diags = _rate_diagonals(vecs, rates)
    terms = np.concatenate([c[k] * diags[k] for k in range(f.arity)])
    return float(np.cumsum(terms)[-1])


def placed_rate(rate, k, m):
    """I^(k-1) (x) rate (x) I^(m-k) for 1-based slot k."""
    n = rate.shape[0]
    left, right = np.eye(n ** (k - 1)), np.eye(n ** (m - k))
    return np.kron(np.kron(left, rate), right)


def trace_matfun_derivative_dense(f, mats, rates, cap=DENSE_CAP):
    """Reference derivative: sum_k tr(d_k f(M...) (I (x) .. (x) R_k (x) .. (x) I)) with dense matrices."""
    mats = as_tuple(mats, f.arity)
    rates = as_tuple(rates, f.arity)
    m = f.arity
    total = 0.0
    for k in range(1, m + 1):
        dk = partial(f, k)
        if dk.expr == ZERO:
            continue
        big = matfun_multi_dense(dk, mats, cap=cap)
        total += float(np.trace(big @ placed_rate(rates[k - 1], k, m)))
    return total
