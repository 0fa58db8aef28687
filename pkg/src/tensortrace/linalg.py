"""Dense real symmetric linear algebra: eigendecomposition, Kronecker products,
Loewner-order comparison and single-variable matrix functions."""

import enum
from typing import NamedTuple

import numpy as np

from .errors import CapExceededError, DomainError, EigenError, FormatError

KRON_CAP = 4096
# closed-endpoint snapping: eigenvalues within this relative distance of a
# closed domain endpoint are moved onto it (rounding in the eigensolver)
DOMAIN_SNAP = 1e-10


def sym_matrix(a, tol=1e-10):
    """Return a finite, exactly symmetric float64 copy of ``a``.

    Asymmetry up to ``tol * max(1, max|a|)`` is averaged away; anything
    larger raises ValueError.
    """
    arr = np.array(a, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix has nonfinite entries")
    scale = max(1.0, float(np.max(np.abs(arr)))) if arr.size else 1.0
    if arr.size and float(np.max(np.abs(arr - arr.T))) > tol * scale:
        raise ValueError("matrix is not symmetric")
    return (arr + arr.T) / 2.0


class Spectrum(NamedTuple):
    """Ascending eigenvalues and matching orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    vectors: np.ndarray


def _fix_signs(vectors, tol=1e-12):
    # first component with |v| > tol made positive, column by column
    big = np.abs(vectors) > tol
    first = np.argmax(big, axis=0)
    lead = vectors[first, np.arange(vectors.shape[1])]
    flip = big.any(axis=0) & (lead < 0)
    return np.where(flip, -vectors, vectors)


def eig_sym(m):
    """Eigendecomposition of a real symmetric matrix.

    Eigenvalues come back ascending; each eigenvector column is normalized
    so that its first nonzero component is positive, which makes the output
    reproducible for a given input.

    Raises
    ------
    EigenError
        If the LAPACK solver does not converge.
    """
    a = sym_matrix(m)
    try:
        w, v = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise EigenError(f"symmetric eigensolver did not converge: {exc}") from exc
    return Spectrum(w, _fix_signs(v))


def eig_vals_sym(m):
    """Ascending eigenvalues only; same solver family and errors as :func:`eig_sym`."""
    a = sym_matrix(m)
    try:
        return np.linalg.eigvalsh(a)
    except np.linalg.LinAlgError as exc:
        raise EigenError(f"symmetric eigensolver did not converge: {exc}") from exc


def kron(a, b, cap=KRON_CAP):
    """Kronecker product; block (i, j) of the result is ``a[i, j] * b``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError("kron expects 2-D arrays")
    rows, cols = a.shape[0] * b.shape[0], a.shape[1] * b.shape[1]
    if max(rows, cols) > cap:
        raise CapExceededError(f"Kronecker product of size {rows}x{cols} exceeds cap {cap}")
    return np.kron(a, b)


class Ordering(str, enum.Enum):
    SUCCEEDS = "succeeds"
    PRECEDES = "precedes"
    EQUAL = "equal"
    INCOMPARABLE = "incomparable"


def default_psd_tol(a, b):
    return 1e-9 * max(1.0, float(np.max(np.abs(a), initial=0.0)) + float(np.max(np.abs(b), initial=0.0)))


def min_eigenvalue(a):
    return float(eig_vals_sym(a)[0]) if np.size(a) else 0.0


def psd_order(a, b, tol=None):
    """Compare ``a`` and ``b`` in the Loewner order.

    ``succeeds`` means a - b is PSD (smallest eigenvalue >= -tol),
    ``precedes`` means b - a is, ``equal`` both, ``incomparable`` neither.
    The default tolerance is ``1e-9 * max(1, max|a| + max|b|)``.

    If both directions hold, every eigenvalue of a - b lies in [-tol, tol],
    so ``max|a - b| <= ||a - b||_2 <= tol`` (antisymmetry constant c = 1).
    """
    a = sym_matrix(a)
    b = sym_matrix(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if tol is None:
        tol = default_psd_tol(a, b)
    d = a - b
    fwd = min_eigenvalue(d) >= -tol
    bwd = min_eigenvalue(-d) >= -tol
    if fwd and bwd:
        return Ordering.EQUAL
    if fwd:
        return Ordering.SUCCEEDS
    if bwd:
        return Ordering.PRECEDES
    return Ordering.INCOMPARABLE


def snap_to_domain(values, interval, var=1, what="eigenvalue"):
    """Check that every value lies in ``interval``.

    Values within ``DOMAIN_SNAP * max(1, max|values|)`` outside a closed
    endpoint are moved onto it; anything else outside raises DomainError
    naming the offending value.
    """
    vals = np.array(values, dtype=np.float64)
    if vals.size == 0:
        return vals
    slack = DOMAIN_SNAP * max(1.0, float(np.max(np.abs(vals))))
    if interval.lo_closed:
        near = (vals < interval.lo) & (vals >= interval.lo - slack)
        vals[near] = interval.lo
    if interval.hi_closed:
        near = (vals > interval.hi) & (vals <= interval.hi + slack)
        vals[near] = interval.hi
    inside = (vals > interval.lo) | ((vals == interval.lo) & interval.lo_closed)
    inside &= (vals < interval.hi) | ((vals == interval.hi) & interval.hi_closed)
    if not inside.all():
        v = float(vals[np.argmin(inside)])
        raise DomainError(f"{what} {v!r} of argument {var} is outside the domain {interval}")
    return vals


def matfun_single(f, m):
    """Evaluate a one-variable function at a symmetric matrix: ``V diag(f(lambda)) V^T``."""
    if f.arity != 1:
        raise ValueError(f"matfun_single needs a function of one variable, got arity {f.arity}")
    lam, vec = eig_sym(m)
    lam = snap_to_domain(lam, f.domain[0])
    vals = np.array([f(float(x)) for x in lam])
    return sym_matrix((vec * vals) @ vec.T)


def read_matrix(path):
    """Read a matrix file: a line with ``n`` then ``n`` rows of ``n`` decimals."""
    with open(path) as fh:
        return parse_matrix(fh.read(), path=str(path))


def parse_matrix(text, path=None):
    rows = [(i, ln.split()) for i, ln in enumerate(text.splitlines(), start=1)
            if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows:
        raise FormatError("empty matrix file", path)
    line, head = rows[0]
    if len(head) != 1:
        raise FormatError("first line must hold the dimension n", path, line)
    try:
        n = int(head[0])
    except ValueError:
        raise FormatError(f"dimension {head[0]!r} is not an integer", path, line) from None
    if n < 1:
        raise FormatError("dimension must be positive", path, line)
    body = rows[1:]
    if len(body) != n:
        raise FormatError(f"expected {n} rows, found {len(body)}", path, body[-1][0] if body else line)
    out = np.empty((n, n))
    for r, (line, fields) in enumerate(body):
        if len(fields) != n:
            raise FormatError(f"row {r + 1} has {len(fields)} entries, expected {n}", path, line)
        for c, tok in enumerate(fields):
            try:
                out[r, c] = float(tok)
            except ValueError:
                raise FormatError(f"entry {c + 1} ({tok!r}) is not a number", path, line) from None
            if not np.isfinite(out[r, c]):
                raise FormatError(f"entry {c + 1} is not finite", path, line)
    try:
        return sym_matrix(out)
    except ValueError as exc:
        raise FormatError(str(exc), path) from None


def format_matrix(m):
    m = np.asarray(m)
    lines = [str(m.shape[0])]
    lines += [" ".join(repr(float(v)) for v in row) for row in m]
    return "\n".join(lines) + "\n"
