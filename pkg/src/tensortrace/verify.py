"""Randomized property checks for trace functionals and graph objectives.

Every check returns a :class:`PropertyReport`.  Violations are measured as
positive slack beyond a fixed tolerance, so a passing trial has a
negative violation and ``worst_violation <= 0`` whenever nothing failed.
Trial ``i`` draws from its own generator seeded with ``(seed, i)``, which
makes a report reproducible from ``(seed, trials)`` alone and independent
of evaluation order.

On failure the offending instance is shrunk by bisecting its perturbation
magnitude (at most 20 steps) and recorded as a JSON-ready witness.

Each check also has a canonical counterexample (a sign-flipped function or
path, or a deliberately broken fast path) on which it must fail; see
:func:`self_test`.
"""

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DomainError
from .expr import ScalarFunction, evaluate, parse_expr
from .graph import SpectralObjective, WeightedGraph, laplacian, spectral_objective
from .linalg import default_psd_tol, eig_vals_sym, min_eigenvalue, sym_matrix
from .tensor import DENSE_CAP, matfun_multi_dense, trace_matfun_derivative, trace_matfun_multi

INEQ_TOL = 1e-9
ORACLE_TOL = 1e-9
DERIV_TOL = 1e-5
BISECT_STEPS = 20
ALPHAS = (0.25, 0.5, 0.75)


@dataclass
class PropertyReport:
    property: str
    trials: int
    failures: int
    worst_violation: float
    seed: int
    witness: dict = None
    skipped: int = 0

    @property
    def passed(self):
        return self.failures == 0

    def to_dict(self):
        out = asdict(self)
        if out["witness"] is None:
            del out["witness"]
        return out

    @classmethod
    def from_dict(cls, data):
        return cls(**{k: data.get(k) for k in ("property", "trials", "failures", "worst_violation", "seed")},
                   witness=data.get("witness"), skipped=data.get("skipped", 0))

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


@dataclass
class _Tally:
    name: str
    seed: int
    trials: int = 0
    failures: int = 0
    skipped: int = 0
    worst: float = None
    witness: dict = None
    first_fail: int = field(default=None)

    def record(self, index, violation, make_witness=None):
        self.trials += 1
        if self.worst is None or violation > self.worst:
            self.worst = violation
        if violation > 0:
            self.failures += 1
            if self.first_fail is None or index < self.first_fail:
                self.first_fail = index
                self.witness = make_witness() if make_witness else None

    def report(self):
        worst = self.worst if self.worst is not None else 0.0
        return PropertyReport(self.name, self.trials, self.failures, float(worst), self.seed,
                              self.witness if self.failures else None, self.skipped)


def _rng(seed, index):
    return np.random.default_rng([seed, index])


def _mats(mats):
    return [np.asarray(m).tolist() for m in mats]


def _bisect(violation, steps=BISECT_STEPS):
    """Smallest s in (0, 1] found by bisection with violation(s) > 0, given violation(1) > 0."""
    lo, hi = 0.0, 1.0
    v_hi = violation(hi)
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        try:
            v = violation(mid)
        except DomainError:
            lo = mid
            continue
        if v > 0:
            hi, v_hi = mid, v
        else:
            lo = mid
    return hi, v_hi


# -- instance generators -----------------------------------------------------

def interval_box(iv, width=2.0, inset=0.5):
    """Finite sampling box inside an interval: [0.5, 2] for (0, inf), [0, 2] for [0, inf), [-2, 2] for the line."""
    lo, hi = iv.lo, iv.hi
    if math.isinf(lo) and math.isinf(hi):
        return (-width, width)
    if math.isinf(hi):
        return (lo + (0.0 if iv.lo_closed else inset * (width / 2.0)), lo + width)
    if math.isinf(lo):
        return (hi - width, hi - (0.0 if iv.hi_closed else inset * (width / 2.0)))
    pad = 0.0 if (iv.lo_closed and iv.hi_closed) else 1e-3 * (hi - lo)
    return (lo + pad, hi - pad)


def function_boxes(f):
    return [interval_box(iv) for iv in f.domain]


def random_symmetric(n, box, rng):
    """Random Gaussian symmetric matrix shifted and scaled so its spectrum fills a random sub-interval of ``box``."""
    a = rng.standard_normal((n, n))
    g = (a + a.T) / 2.0
    lam = np.linalg.eigvalsh(g)
    lo, hi = box
    margin = 0.02 * (hi - lo)
    u, v = np.sort(rng.uniform(lo + margin, hi - margin, 2))
    spread = lam[-1] - lam[0]
    if n == 1 or spread < 1e-12:
        return np.full((n, n), 0.5 * (u + v)) * np.eye(n)
    return sym_matrix(u * np.eye(n) + (v - u) * (g - lam[0] * np.eye(n)) / spread)


def random_tuple(f, n, rng, boxes=None):
    boxes = boxes or function_boxes(f)
    return [random_symmetric(n, b, rng) for b in boxes]


def random_psd(n, rng, top):
    """Random PSD matrix A^T A rescaled to largest eigenvalue ``top``."""
    r = int(rng.integers(1, n + 1))
    a = rng.standard_normal((r, n))
    d = a.T @ a
    lmax = float(np.linalg.eigvalsh(d)[-1])
    return sym_matrix(d * (top / lmax)) if lmax > 0 else np.zeros((n, n))


@dataclass(frozen=True)
class AffinePath:
    """M_l(t) = start_l + t * rate_l for every argument l."""

    start: tuple
    rate: tuple

    def at(self, t):
        return [a + t * r for a, r in zip(self.start, self.rate)]


def random_path(f, n, rng, boxes=None):
    """Segment between two random tuples, so every point with t in [0, 1] stays in the boxes."""
    a = random_tuple(f, n, rng, boxes)
    b = random_tuple(f, n, rng, boxes)
    return AffinePath(tuple(a), tuple(bb - aa for aa, bb in zip(a, b)))


def crossing_path(f, n, rng, boxes=None, t_cross=0.5):
    """Affine path in which two eigenvalues of each M_l(t) cross at ``t_cross``.

    The start and rate share an eigenbasis; eigenvalues move linearly from
    distinct values to distinct values and the first two meet at ``t_cross``.
    """
    boxes = boxes or function_boxes(f)
    start, rate = [], []
    for lo, hi in boxes:
        q, _ = np.linalg.qr(rng.standard_normal((n, n)))
        margin = 0.1 * (hi - lo)
        a = rng.uniform(lo + margin, hi - margin, n)
        b = rng.uniform(lo + margin, hi - margin, n)
        if n >= 2:
            # entries 0 and 1 move with slopes d0 and -d1 and coincide at t_cross;
            # |slope| <= 0.2 * width keeps them inside the box for t in [0, 1]
            meet = rng.uniform(lo + 0.3 * (hi - lo), hi - 0.3 * (hi - lo))
            d0, d1 = rng.uniform(0.05, 0.2, 2) * (hi - lo)
            a[0], a[1] = meet - d0 * t_cross, meet + d1 * t_cross
            b[0], b[1] = meet + d0 * (1 - t_cross), meet - d1 * (1 - t_cross)
        start.append(sym_matrix((q * a) @ q.T))
        rate.append(sym_matrix((q * (b - a)) @ q.T))
    return AffinePath(tuple(start), tuple(rate))


# -- oracle equivalence ------------------------------------------------------

def _drop_last(f, mats):
    lam = [eig_vals_sym(m) for m in mats]
    return trace_matfun_multi(f, mats) - evaluate(f, [l[-1] for l in lam])


FAULTS = {"drop_last": _drop_last}


def check_oracle_equivalence(f, tuples, seed=0, fault=None, cap=DENSE_CAP):
    """Compare tr(matfun_multi_dense) with trace_matfun_multi on each tuple.

    Violation is the relative discrepancy ``|dense - fast| / max(1, |fast|)``
    minus 1e-9.  ``fault="drop_last"`` swaps in a fast path that omits the
    last eigenvalue combination, the canonical counterexample.
    """
    if len(tuples) and np.ndim(tuples[0]) == 2:
        tuples = [tuples]  # a single tuple
    fast_fn = FAULTS[fault] if fault else trace_matfun_multi
    tally = _Tally("oracle_equivalence", seed)
    for i, mats in enumerate(tuples):
        try:
            dense = float(np.trace(matfun_multi_dense(f, mats, cap=cap)))
            fast = fast_fn(f, mats)
        except DomainError:
            tally.skipped += 1
            continue
        rel = abs(dense - fast) / max(1.0, abs(fast))
        tally.record(i, rel - ORACLE_TOL, lambda: {
            "function": str(f), "matrices": _mats(mats), "dense": dense, "fast": fast})
    return tally.report()


def random_oracle_tuples(f, n, count, seed=0):
    return [random_tuple(f, n, _rng(seed, i)) for i in range(count)]


# -- monotonicity ------------------------------------------------------------

def _headroom(iv, mat, box):
    width = box[1] - box[0]
    if math.isinf(iv.hi):
        return width
    top = float(np.linalg.eigvalsh(mat)[-1])
    return max(0.0, min(width, (iv.hi - top) * (1.0 - 1e-6)))


def check_monotone(f, base=None, trials=500, seed=0, n=3, boxes=None):
    """Trace monotonicity under PSD increments.

    Each trial adds Delta_l = A^T A (scaled so spectra stay inside the
    domain) to a base tuple M and measures ``F(M) - F(M + Delta) - 1e-9``.
    ``base`` fixes M for every trial; otherwise a fresh random tuple is drawn.
    Trials whose spectra leave the domain are skipped and counted.
    """
    boxes = boxes or function_boxes(f)
    tally = _Tally("monotone", seed)
    for i in range(trials):
        rng = _rng(seed, i)
        mats = [np.asarray(m, float) for m in base] if base is not None else random_tuple(f, n, rng, boxes)
        dim = mats[0].shape[0]
        deltas = [random_psd(dim, rng, rng.uniform() * _headroom(iv, m, b))
                  for iv, m, b in zip(f.domain, mats, boxes)]

        def violation(s, mats=mats, deltas=deltas):
            lo = trace_matfun_multi(f, mats)
            hi = trace_matfun_multi(f, [m + s * d for m, d in zip(mats, deltas)])
            return lo - hi - INEQ_TOL

        try:
            v = violation(1.0)
        except DomainError:
            tally.skipped += 1
            continue

        def witness(mats=mats, deltas=deltas, violation=violation):
            s, vs = _bisect(violation)
            return {"function": str(f), "base": _mats(mats), "increment": _mats([s * d for d in deltas]),
                    "scale": s, "violation": vs}

        tally.record(i, v, witness)
    return tally.report()


# -- convexity ---------------------------------------------------------------

def check_convex(f, pairs=None, alphas=ALPHAS, trials=500, seed=0, n=3, boxes=None):
    """Trace convexity: F(aM + (1-a)N) <= a F(M) + (1-a) F(N) + 1e-9 for each alpha.

    ``pairs`` is a list of (M_tuple, N_tuple); random pairs in the domain
    boxes are drawn when it is omitted.  A trial's violation is the maximum
    over ``alphas``.
    """
    boxes = boxes or function_boxes(f)
    tally = _Tally("convexity", seed)
    count = len(pairs) if pairs is not None else trials
    for i in range(count):
        if pairs is not None:
            ma, mb = ([np.asarray(m, float) for m in p] for p in pairs[i])
        else:
            rng = _rng(seed, i)
            ma, mb = random_tuple(f, n, rng, boxes), random_tuple(f, n, rng, boxes)

        def violation(s, ma=ma, mb=mb):
            nb = [a + s * (b - a) for a, b in zip(ma, mb)]
            fa, fb = trace_matfun_multi(f, ma), trace_matfun_multi(f, nb)
            worst = -math.inf
            for al in alphas:
                mix = [al * a + (1 - al) * b for a, b in zip(ma, nb)]
                worst = max(worst, trace_matfun_multi(f, mix) - al * fa - (1 - al) * fb - INEQ_TOL)
            return worst

        try:
            v = violation(1.0)
        except DomainError:
            tally.skipped += 1
            continue

        def witness(ma=ma, mb=mb, violation=violation):
            s, vs = _bisect(violation)
            return {"function": str(f), "first": _mats(ma), "second": _mats([a + s * (b - a) for a, b in zip(ma, mb)]),
                    "alphas": list(alphas), "scale": s, "violation": vs}

        tally.record(i, v, witness)
    return tally.report()


# -- derivative --------------------------------------------------------------

def _negated_derivative(f, mats, rates):
    return -trace_matfun_derivative(f, mats, rates)


DERIVATIVE_FAULTS = {"negate": _negated_derivative}


def check_derivative(f, paths, t_samples=(0.0,), h=1e-5, fault=None):
    """Analytic trace derivative against central finite differences along affine paths.

    Violation is ``|analytic - fd| / max(1, |fd|) - 1e-5``.  ``fault="negate"``
    flips the sign of the analytic value (canonical counterexample).
    """
    if isinstance(paths, AffinePath):
        paths = [paths]
    deriv = DERIVATIVE_FAULTS[fault] if fault else trace_matfun_derivative
    tally = _Tally("derivative", 0)
    index = 0
    for path in paths:
        for t in t_samples:
            try:
                analytic = deriv(f, path.at(t), list(path.rate))
                fd = (trace_matfun_multi(f, path.at(t + h)) - trace_matfun_multi(f, path.at(t - h))) / (2 * h)
            except DomainError:
                tally.skipped += 1
                index += 1
                continue
            rel = abs(analytic - fd) / max(1.0, abs(fd))
            tally.record(index, rel - DERIV_TOL, lambda path=path, t=t, analytic=analytic, fd=fd: {
                "function": str(f), "start": _mats(path.start), "rate": _mats(path.rate), "t": t, "h": h,
                "analytic": analytic, "finite_difference": fd})
            index += 1
    return tally.report()


def random_derivative_paths(f, n, count, seed=0, crossing=0):
    """``count`` random segment paths, the last ``crossing`` of them with engineered eigenvalue crossings."""
    paths = []
    for i in range(count):
        rng = _rng(seed, i)
        if i >= count - crossing:
            paths.append(crossing_path(f, n, rng, t_cross=float(rng.uniform(0.3, 0.7))))
        else:
            paths.append(random_path(f, n, rng))
    return paths


# -- parameterizations -------------------------------------------------------

@dataclass(frozen=True)
class MatrixPath:
    """M(t) = C + phi(t) D for a one-variable function phi."""

    c: np.ndarray
    d: np.ndarray
    phi: ScalarFunction

    def at(self, t):
        return self.c + evaluate(self.phi, (t,)) * self.d

    @classmethod
    def from_expr(cls, c, d, phi):
        return cls(sym_matrix(c), sym_matrix(d), parse_expr(phi, 1) if isinstance(phi, str) else phi)


def _order_gap(upper, lower):
    # positive when upper - lower is not PSD beyond the default tolerance
    return -min_eigenvalue(upper - lower) - default_psd_tol(upper, lower)


def check_parameterization(kind, path, t_samples, alphas=ALPHAS):
    """Loewner monotonicity or convexity of a matrix path over all sampled pairs t1 < t2.

    ``monotone``: M(t2) >= M(t1).  ``convex``: a M(t1) + (1-a) M(t2) >= M(a t1 + (1-a) t2).
    """
    if kind not in ("monotone", "convex"):
        raise ValueError(f"kind must be 'monotone' or 'convex', got {kind!r}")
    ts = sorted(float(t) for t in t_samples)
    tally = _Tally(f"parameterization_{kind}", 0)
    index = 0
    for i, t1 in enumerate(ts):
        for t2 in ts[i + 1:]:
            if kind == "monotone":
                def violation(s, t1=t1, t2=t2):
                    return _order_gap(path.at(t1 + s * (t2 - t1)), path.at(t1))
            else:
                def violation(s, t1=t1, t2=t2):
                    t2s = t1 + s * (t2 - t1)
                    a, b = path.at(t1), path.at(t2s)
                    return max(_order_gap(al * a + (1 - al) * b, path.at(al * t1 + (1 - al) * t2s))
                               for al in alphas)

            def witness(t1=t1, t2=t2, violation=violation):
                s, vs = _bisect(violation)
                return {"kind": kind, "c": path.c.tolist(), "d": path.d.tolist(), "phi": str(path.phi),
                        "t1": t1, "t2": t1 + s * (t2 - t1), "violation": vs}

            try:
                v = violation(1.0)
            except DomainError:
                tally.skipped += 1
                index += 1
                continue
            tally.record(index, v, witness)
            index += 1
    return tally.report()


# -- graph objectives --------------------------------------------------------

def random_graph(rng, n_max=15, n_min=2):
    n = int(rng.integers(n_min, n_max + 1))
    p = rng.uniform(0.2, 0.9)
    edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
    if not edges:
        edges = [(0, 1)]
    w = rng.uniform(0.0, 1.0, len(edges))
    w[rng.random(len(edges)) < 0.1] = 0.0
    return WeightedGraph(n, tuple(edges), w)


def _graph_top(f):
    return min(b[1] for b in function_boxes(f))


def _scale_to(g, weights_list, top):
    # common factor putting the largest Laplacian eigenvalue of every weight vector at or below top
    lmax = max(float(eig_vals_sym(laplacian(g.with_weights(w)))[-1]) for w in weights_list)
    return top / lmax if lmax > 0 else 1.0


def check_graph_monotone(f, trials=200, seed=0, n_max=15, exclude_smallest=0):
    """Objective non-decreasing when edge weights increase: F(w) - F(w + d) - 1e-9 with d >= 0."""
    obj = SpectralObjective(f, exclude_smallest)
    top = _graph_top(f)
    tally = _Tally("graph_monotone", seed)
    for i in range(trials):
        rng = _rng(seed, i)
        g = random_graph(rng, n_max)
        inc = rng.uniform(0.0, 1.0, g.num_edges) * (rng.random(g.num_edges) < 0.5)
        scale = _scale_to(g, [g.weights + inc], top * rng.uniform(0.3, 1.0))
        w, d = g.weights * scale, inc * scale

        def violation(s, g=g, w=w, d=d):
            return spectral_objective(obj, g.with_weights(w)) - spectral_objective(obj, g.with_weights(w + s * d)) \
                - INEQ_TOL

        try:
            v = violation(1.0)
        except DomainError:
            tally.skipped += 1
            continue

        def witness(g=g, w=w, d=d, violation=violation):
            s, vs = _bisect(violation)
            return {"function": str(f), "n": g.n, "edges": [list(e) for e in g.edges], "weights": w.tolist(),
                    "increment": (s * d).tolist(), "violation": vs}

        tally.record(i, v, witness)
    return tally.report()


def check_graph_convex(f, trials=200, seed=0, n_max=15, alphas=ALPHAS):
    """Objective convex in the weights: F(a w1 + (1-a) w2) <= a F(w1) + (1-a) F(w2) + 1e-9."""
    obj = SpectralObjective(f)
    top = _graph_top(f)
    tally = _Tally("graph_convexity", seed)
    for i in range(trials):
        rng = _rng(seed, i)
        g = random_graph(rng, n_max)
        w2 = rng.uniform(0.0, 1.0, g.num_edges)
        scale = _scale_to(g, [g.weights, w2], top * rng.uniform(0.3, 1.0))
        wa, wb = g.weights * scale, w2 * scale

        def violation(s, g=g, wa=wa, wb=wb):
            wbs = wa + s * (wb - wa)
            fa = spectral_objective(obj, g.with_weights(wa))
            fb = spectral_objective(obj, g.with_weights(wbs))
            return max(spectral_objective(obj, g.with_weights(al * wa + (1 - al) * wbs)) - al * fa - (1 - al) * fb
                       - INEQ_TOL for al in alphas)

        try:
            v = violation(1.0)
        except DomainError:
            tally.skipped += 1
            continue

        def witness(g=g, wa=wa, wb=wb, violation=violation):
            s, vs = _bisect(violation)
            return {"function": str(f), "n": g.n, "edges": [list(e) for e in g.edges], "first": wa.tolist(),
                    "second": (wa + s * (wb - wa)).tolist(), "violation": vs}

        tally.record(i, v, witness)
    return tally.report()


# -- canonical counterexamples -----------------------------------------------

def _counter_oracle(seed):
    f = parse_expr("x1*x2", 2, "pos")
    return check_oracle_equivalence(f, random_oracle_tuples(f, 3, 5, seed), seed=seed, fault="drop_last")


def _counter_monotone(seed):
    return check_monotone(parse_expr("-x1", 1), trials=20, seed=seed)


def _counter_convex(seed):
    return check_convex(parse_expr("-x1^2", 1), trials=20, seed=seed)


def _counter_derivative(seed):
    f = parse_expr("x1^2", 1)
    return check_derivative(f, random_derivative_paths(f, 3, 5, seed), t_samples=(0.5,), fault="negate")


def _counter_parameterization(seed):
    rng = _rng(seed, 0)
    n = 3
    c = random_symmetric(n, (-1.0, 1.0), rng)
    d = random_psd(n, rng, 1.0)
    path = MatrixPath.from_expr(c, d, "-x1")
    return check_parameterization("monotone", path, np.linspace(0.0, 2.0, 5))


def _counter_graph_monotone(seed):
    return check_graph_monotone(parse_expr("-x1", 1), trials=20, seed=seed)


def _counter_graph_convex(seed):
    return check_graph_convex(parse_expr("-x1^2", 1), trials=20, seed=seed)


COUNTEREXAMPLES = {
    "oracle": _counter_oracle,
    "monotone": _counter_monotone,
    "convexity": _counter_convex,
    "derivative": _counter_derivative,
    "parameterization": _counter_parameterization,
    "graph-monotone": _counter_graph_monotone,
    "graph-convexity": _counter_graph_convex,
}


def canonical_counterexample(name, seed=0):
    """Run check ``name`` on its canonical counterexample; a sound check reports failures."""
    try:
        fn = COUNTEREXAMPLES[name]
    except KeyError:
        raise ValueError(f"unknown check {name!r}; expected one of {sorted(COUNTEREXAMPLES)}") from None
    return fn(seed)


def self_test(seed=0):
    """Every check against its canonical counterexample, keyed by check name."""
    return {name: fn(seed) for name, fn in COUNTEREXAMPLES.items()}
