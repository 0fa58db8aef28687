"""Projected-gradient optimization of spectral objectives over edge weights."""

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DomainError, InfeasibleError, PreconditionError
from .expr import Neg, ScalarFunction, evaluate
from .graph import SpectralObjective, objective_and_gradient

CONVERGED = "converged"
ITERATION_CAP = "iteration_cap"
LINE_SEARCH_FAILURE = "line_search_failure"

# relative rounding floor of an objective value (64 ulp); steps whose predicted
# decrease is below it are judged by the gradient mapping instead
NOISE_FLOOR = 64 * np.finfo(float).eps


@dataclass(frozen=True)
class ConstraintSet:
    """Per-edge bounds plus an optional total-weight equality.

    ``lower`` and ``upper`` may be scalars (broadcast to every edge) or
    per-edge arrays.
    """

    lower: object = 0.0
    upper: object = math.inf
    budget: float = None

    def bounds(self, size):
        lo = np.broadcast_to(np.asarray(self.lower, dtype=np.float64), (size,)).copy()
        hi = np.broadcast_to(np.asarray(self.upper, dtype=np.float64), (size,)).copy()
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)) or np.any(lo == math.inf) or np.any(hi == -math.inf):
            raise InfeasibleError("bounds must be real numbers with lower < inf and upper > -inf")
        if np.any(lo > hi):
            raise InfeasibleError("lower bound exceeds upper bound on some edge")
        if self.budget is not None:
            c = float(self.budget)
            if not math.isfinite(c):
                raise InfeasibleError("budget must be finite")
            slack = 1e-12 * max(1.0, abs(c))
            if c < lo.sum() - slack or c > hi.sum() + slack:
                raise InfeasibleError(f"budget {c} outside [{lo.sum()}, {hi.sum()}]")
        return lo, hi


def _budget_sum(w, lo, hi, tau):
    return np.clip(w - tau, lo, hi).sum()


def project(w, constraints):
    """Euclidean projection onto the box, intersected with the budget hyperplane when set.

    With a budget the multiplier tau in clip(w - tau, lower, upper) is
    bracketed and bisected, then solved exactly on the final linear piece.
    Already feasible points come back unchanged, so projection is
    idempotent bit for bit.
    """
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    lo, hi = constraints.bounds(w.size)
    if constraints.budget is None:
        return np.clip(w, lo, hi)
    c = float(constraints.budget)
    tol = 1e-12 * max(1.0, abs(c))
    if w.size == 0:
        if abs(c) > tol:
            raise InfeasibleError("nonzero budget with no edges")
        return w.copy()
    if np.all(w >= lo) and np.all(w <= hi) and abs(w.sum() - c) <= tol:
        return w.copy()
    excess = c - lo.sum()
    t_hi = float(np.max(w - lo))
    finite_hi = np.isfinite(hi)
    t_lo = float(np.min(w - lo)) - max(excess, 0.0) - 1.0
    if finite_hi.any():
        t_lo = min(t_lo, float(np.min((w - hi)[finite_hi])))
    for _ in range(200):
        mid = 0.5 * (t_lo + t_hi)
        if mid in (t_lo, t_hi):
            break
        if _budget_sum(w, lo, hi, mid) > c:
            t_lo = mid
        else:
            t_hi = mid
    tau = 0.5 * (t_lo + t_hi)
    x = np.clip(w - tau, lo, hi)
    free = (w - tau > lo) & (w - tau < hi)
    if free.any():
        fixed_sum = x[~free].sum()
        tau = (w[free].sum() + fixed_sum - c) / free.sum()
        x = np.clip(w - tau, lo, hi)
        resid = c - x.sum()
        inner = (x > lo) & (x < hi)
        if inner.any() and resid != 0.0:
            x[inner] = np.clip(x[inner] + resid / inner.sum(), lo[inner], hi[inner])
    return x


@dataclass(frozen=True)
class MinimizeOptions:
    step0: float = 1.0
    shrink: float = 0.5
    max_iter: int = 5000
    tol: float = 1e-7
    armijo: float = 1e-4
    min_step: float = 1e-16

    def __post_init__(self):
        if not 0.0 < self.shrink < 1.0:
            raise ValueError("shrink must lie in (0, 1)")
        if self.step0 <= 0 or self.tol <= 0 or self.max_iter < 0:
            raise ValueError("step0 and tol must be positive, max_iter nonnegative")


@dataclass
class OptimizationResult:
    weights: np.ndarray
    objective_history: list
    grad_map_norm: float
    iterations: int
    status: str
    convexity_certified: bool
    objective: float = field(init=False)

    def __post_init__(self):
        self.objective = self.objective_history[-1] if self.objective_history else math.nan

    def to_dict(self):
        out = asdict(self)
        out["weights"] = [float(v) for v in self.weights]
        out["objective_history"] = [float(v) for v in self.objective_history]
        return out


def gradient_map_norm(w, grad, constraints):
    """Infinity norm of w - project(w - grad): zero exactly at constrained stationary points."""
    if w.size == 0:
        return 0.0
    return float(np.max(np.abs(w - project(w - grad, constraints))))


def sampling_box(f, constraints, w0):
    """Finite per-variable boxes covering every Laplacian spectrum reachable from the constraints.

    Eigenvalues of a weighted Laplacian lie in [0, 2 * max weighted degree]
    and max degree <= total weight.
    """
    lo, hi = constraints.bounds(w0.size)
    if constraints.budget is not None:
        total = float(constraints.budget)
    elif np.all(np.isfinite(hi)):
        total = float(hi.sum())
    else:
        total = 4.0 * max(float(np.sum(w0)), 1.0)
    top = 2.0 * max(total, 1e-6)
    boxes = []
    for iv in f.domain:
        a, b = max(iv.lo, 0.0), min(iv.hi, top)
        if a >= b:
            boxes.append(None)
            continue
        pad = 1e-3 * (b - a)
        boxes.append((a + (0.0 if iv.contains(a) else pad), b - (0.0 if iv.contains(b) else pad)))
    return boxes


def sampled_convexity_check(f, boxes, samples=1000, seed=0):
    """Randomized midpoint-convexity test of f on a box; False on any violation."""
    if any(b is None for b in boxes):
        return False
    rng = np.random.default_rng(seed)
    lo = np.array([b[0] for b in boxes])
    hi = np.array([b[1] for b in boxes])
    for _ in range(samples):
        p = lo + (hi - lo) * rng.random(lo.size)
        q = lo + (hi - lo) * rng.random(lo.size)
        try:
            fp, fq, fm = evaluate(f, p), evaluate(f, q), evaluate(f, (p + q) / 2.0)
        except DomainError:
            continue
        if fm > 0.5 * (fp + fq) + 1e-9 * max(1.0, abs(fp), abs(fq)):
            return False
    return True


def _trial_step(step, s_prev, y_prev, opts, iterations):
    # Barzilai-Borwein step s.s / s.y when the last step saw positive curvature,
    # else the last accepted step enlarged by 1/shrink
    if iterations == 0:
        return opts.step0
    if s_prev is not None:
        sy = float(s_prev @ y_prev)
        if sy > 0:
            return min(max(float(s_prev @ s_prev) / sy, 1e-12), 1e12)
    return min(step / opts.shrink, 1e12)


def minimize(obj, g, constraints=None, opts=None, declared_convex=False, seed=0):
    """Projected gradient descent with Armijo backtracking on the edge weights of ``g``.

    Each iteration first tries the Barzilai-Borwein step from the last
    displacement and gradient change (the previous step enlarged by
    1/shrink when that curvature is not positive, ``step0`` at the start),
    cutting it by ``shrink`` until the Armijo condition holds with strict
    decrease.  Once the predicted
    decrease is below the rounding floor of F, a trial is accepted instead
    when the gradient mapping shrinks and F rises by at most that floor.
    Stops when the gradient mapping norm drops to ``tol``.  Trial points that leave the function's
    domain are rejected like failed Armijo trials.

    ``convexity_certified`` is set when the caller declares f convex and a
    seeded sampled midpoint check on the reachable spectral box agrees; in
    that case the final gradient mapping norm certifies global optimality
    to first order.
    """
    if obj.exclude_smallest:
        raise PreconditionError("optimization needs analytic gradients, which require exclude_smallest=0")
    constraints = constraints or ConstraintSet()
    opts = opts or MinimizeOptions()
    w = project(g.weights, constraints)
    value, grad = objective_and_gradient(obj, g.with_weights(w))
    history = [value]
    step = opts.step0
    status = ITERATION_CAP
    iterations = 0
    gnorm = gradient_map_norm(w, grad, constraints)
    s_prev = y_prev = None
    for iterations in range(opts.max_iter + 1):
        if gnorm <= opts.tol:
            status = CONVERGED
            break
        if iterations == opts.max_iter:
            break
        t = _trial_step(step, s_prev, y_prev, opts, iterations)
        floor = NOISE_FLOOR * max(1.0, abs(value))
        accepted = None
        while t >= opts.min_step:
            trial = project(w - t * grad, constraints)
            try:
                trial_value, trial_grad = objective_and_gradient(obj, g.with_weights(trial))
            except DomainError:
                t *= opts.shrink
                continue
            decrease = float(grad @ (trial - w))
            if trial_value < value and trial_value <= value + opts.armijo * decrease:
                accepted = trial_value, trial_grad
                break
            # predicted decrease below rounding in F: Armijo cannot resolve it,
            # so require the gradient mapping to shrink and F not to rise past the floor
            if -opts.armijo * decrease < floor and trial_value <= value + floor:
                trial_gnorm = gradient_map_norm(trial, trial_grad, constraints)
                if trial_gnorm < gnorm:
                    accepted = trial_value, trial_grad
                    break
            t *= opts.shrink
        if accepted is None:
            status = LINE_SEARCH_FAILURE
            break
        step = t
        s_prev, y_prev = trial - w, accepted[1] - grad
        w = trial
        value, grad = accepted
        history.append(value)
        gnorm = gradient_map_norm(w, grad, constraints)
    certified = False
    if declared_convex:
        certified = sampled_convexity_check(obj.f, sampling_box(obj.f, constraints, w), seed=seed)
    return OptimizationResult(w, history, gnorm, iterations, status, certified)


def negated(f):
    return ScalarFunction(Neg(f.expr), f.arity, f.domain)


def maximize(obj, g, constraints=None, opts=None, declared_concave=False, seed=0):
    """Maximize by minimizing the objective built from -f; history is reported in the original sign."""
    flipped = SpectralObjective(negated(obj.f), obj.exclude_smallest, obj.threads, obj.summation)
    res = minimize(flipped, g, constraints, opts, declared_convex=declared_concave, seed=seed)
    res.objective_history = [-v for v in res.objective_history]
    res.objective = -res.objective
    return res
