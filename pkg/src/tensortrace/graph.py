"""Weighted graph Laplacians, the per-edge basis, spectral objectives and their gradients."""

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, FormatError, PreconditionError
from .expr import ScalarFunction
from .linalg import eig_sym
from .tensor import marginals_from_eigenvalues, trace_from_eigenvalues


@dataclass(frozen=True)
class WeightedGraph:
    """Undirected simple graph on vertices 0..n-1 with one nonnegative weight per edge.

    Edges keep their input order; gradients and optimizer vectors are
    indexed the same way.
    """

    n: int
    edges: tuple
    weights: np.ndarray = field(compare=False)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("vertex count must be a positive integer")
        edges = tuple((int(i), int(j)) for i, j in self.edges)
        seen = set()
        for i, j in edges:
            if i == j:
                raise ValueError(f"self-loop at vertex {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"edge ({i}, {j}) has a vertex outside 0..{self.n - 1}")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise ValueError(f"duplicate edge {key}")
            seen.add(key)
        w = np.array(self.weights, dtype=np.float64).reshape(-1)
        if w.shape[0] != len(edges):
            raise ValueError(f"{len(edges)} edges but {w.shape[0]} weights")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        w.setflags(write=False)
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "weights", w)

    @property
    def num_edges(self):
        return len(self.edges)

    def with_weights(self, weights):
        return WeightedGraph(self.n, self.edges, weights)

    def __eq__(self, other):
        if not isinstance(other, WeightedGraph):
            return NotImplemented
        return (self.n, self.edges) == (other.n, other.edges) and np.array_equal(self.weights, other.weights)

    __hash__ = None


def edge_basis(n, i, j):
    """W_ij: ones at (i, i) and (j, j), minus ones at (i, j) and (j, i)."""
    if i == j:
        raise ValueError("edge endpoints must differ")
    if not (0 <= i < n and 0 <= j < n):
        raise ValueError(f"vertex index out of range 0..{n - 1}")
    w = np.zeros((n, n))
    w[i, i] = w[j, j] = 1.0
    w[i, j] = w[j, i] = -1.0
    return w


def laplacian(g):
    """Weighted Laplacian, accumulated edge by edge in input order.

    Adding w_e at the four support entries of W_e is bitwise identical to
    L + w_e * W_e, so the result equals sum_e w_e W_e exactly.
    """
    lap = np.zeros((g.n, g.n))
    for (i, j), w in zip(g.edges, g.weights):
        lap[i, i] += w
        lap[j, j] += w
        lap[i, j] -= w
        lap[j, i] -= w
    return lap


@dataclass(frozen=True)
class SpectralObjective:
    """F(L) = sum over index tuples of f(lambda_k1, ..., lambda_km).

    ``exclude_smallest`` drops that many of the smallest eigenvalues from
    every index position before summing; 0 gives the plain objective.
    Dropping modes is what makes objectives singular at zero, such as
    1/(x^2 y) + 1/(x y^2), usable on connected graphs whose Laplacian
    always has eigenvalue 0.
    """

    f: ScalarFunction
    exclude_smallest: int = 0
    threads: int = 1
    summation: str = "sequential"

    def __post_init__(self):
        if self.exclude_smallest < 0:
            raise ValueError("exclude_smallest must be nonnegative")


def _retained(obj, g):
    spec = eig_sym(laplacian(g))
    k = obj.exclude_smallest
    if k >= g.n:
        raise PreconditionError(f"exclude_smallest={k} leaves no eigenvalues of a {g.n}-vertex graph")
    return spec.eigenvalues[k:], spec.vectors[:, k:]


def _objective(obj, lam):
    return trace_from_eigenvalues(obj.f, [lam] * obj.f.arity, summation=obj.summation, threads=obj.threads)


def spectral_objective(obj, g):
    """Evaluate the objective on the Laplacian spectrum of ``g``."""
    lam, _ = _retained(obj, g)
    try:
        return _objective(obj, lam)
    except Exception as exc:
        _hint_zero_mode(obj, lam, exc)
        raise


def _hint_zero_mode(obj, lam, exc):
    if isinstance(exc, DomainError) and obj.exclude_smallest == 0 and lam.size and abs(lam[0]) < 1e-8:
        exc.args = (exc.args[0] + "; the Laplacian always has eigenvalue 0, set exclude_smallest=1 "
                    "(objective only) or use a function defined at 0",)


def _gradient_from(obj, g, lam, vec):
    c = marginals_from_eigenvalues(obj.f, [lam] * obj.f.arity, threads=obj.threads)
    weight = np.cumsum(c, axis=0)[-1]  # sum over argument slots
    if not g.edges:
        return np.zeros(0)
    idx = np.asarray(g.edges)
    diff = vec[idx[:, 0]] - vec[idx[:, 1]]  # [V^T W_e V]_kk = (V_ik - V_jk)^2
    return (diff * diff) @ weight


def spectral_gradient(obj, g):
    """dF/dw_e for every edge, in edge order.

    Only defined for ``exclude_smallest == 0``: eigenvalue derivatives of a
    truncated spectrum are not covered by the trace-derivative formula.
    """
    return objective_and_gradient(obj, g)[1]


def objective_and_gradient(obj, g):
    """Objective and gradient from a single eigendecomposition."""
    if obj.exclude_smallest:
        raise PreconditionError("analytic gradients require exclude_smallest=0 "
                                "(the truncated objective has no gradient formula here)")
    lam, vec = _retained(obj, g)
    try:
        value = _objective(obj, lam)
        grad = _gradient_from(obj, g, lam, vec)
    except Exception as exc:
        _hint_zero_mode(obj, lam, exc)
        raise
    return value, grad


def parse_graph(text, path=None):
    """Parse the graph format: header ``n m`` then m lines ``i j w`` (0-indexed)."""
    rows = [(i, ln.split()) for i, ln in enumerate(text.splitlines(), start=1)
            if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows:
        raise FormatError("empty graph file", path)
    line, head = rows[0]
    if len(head) != 2:
        raise FormatError("header must be 'n m'", path, line)
    try:
        n, m = int(head[0]), int(head[1])
    except ValueError:
        raise FormatError("header fields must be integers", path, line) from None
    if n < 1 or m < 0:
        raise FormatError("need n >= 1 and m >= 0", path, line)
    body = rows[1:]
    if len(body) != m:
        raise FormatError(f"header declares {m} edges but {len(body)} edge lines follow", path,
                          body[-1][0] if body else line)
    edges, weights, seen = [], [], {}
    for line, fields in body:
        if len(fields) != 3:
            raise FormatError("edge line must be 'i j w'", path, line)
        try:
            i, j = int(fields[0]), int(fields[1])
        except ValueError:
            raise FormatError("vertex fields must be integers", path, line) from None
        try:
            w = float(fields[2])
        except ValueError:
            raise FormatError(f"weight {fields[2]!r} is not a number", path, line) from None
        if not (0 <= i < n and 0 <= j < n):
            raise FormatError(f"vertex out of range 0..{n - 1}", path, line)
        if i == j:
            raise FormatError(f"self-loop at vertex {i}", path, line)
        if not np.isfinite(w):
            raise FormatError("weight is not finite", path, line)
        if w < 0:
            raise FormatError(f"negative weight {w}", path, line)
        key = (min(i, j), max(i, j))
        if key in seen:
            raise FormatError(f"duplicate edge {key} (first on line {seen[key]})", path, line)
        seen[key] = line
        edges.append((i, j))
        weights.append(w)
    return WeightedGraph(n, tuple(edges), np.array(weights))


def read_graph(path):
    with open(path) as fh:
        return parse_graph(fh.read(), path=str(path))


def format_graph(g):
    lines = [f"{g.n} {g.num_edges}"]
    lines += [f"{i} {j} {float(w)!r}" for (i, j), w in zip(g.edges, g.weights)]
    return "\n".join(lines) + "\n"
