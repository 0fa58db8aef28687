"""Seeded random scalar functions whose monotonicity or convexity holds by construction.

Each family builds trees from atoms with a known property and combines
them only with operations that preserve it, so the property never has to
be decided after the fact.  Candidates are rejected (and redrawn) when
their values or partials grow too large on the sampling box, which keeps
the fixed absolute tolerances of the property checks meaningful.

Domain kinds:

``pos``     every variable on (0, inf); sampling box [0.5, 2]
``nonneg``  every variable on [0, inf); sampling box [0, 2]
``real``    every variable on the real line; sampling box [-2, 2]
"""

import itertools
import math

import numpy as np

from .errors import DomainError
from .expr import Add, Const, Div, Exp, Log, Mul, PowInt, PowReal, ScalarFunction, Sub, Var, evaluate, partial

BOXES = {"pos": (0.5, 2.0), "nonneg": (0.0, 2.0), "real": (-2.0, 2.0)}
DOMAINS = {"pos": "pos", "nonneg": "nonneg", "real": "real"}

MAX_VALUE = 1e3
MAX_TRIES = 200


def default_box(kind):
    try:
        return BOXES[kind]
    except KeyError:
        raise ValueError(f"unknown domain kind {kind!r}; expected one of {sorted(BOXES)}") from None


def _const(rng, lo=0.5, hi=2.0):
    return Const(round(float(rng.uniform(lo, hi)), 3))


def _shifted(k, rng, kind):
    # x_k + s, with s > 0 whenever the variable can reach 0
    if kind == "pos" and rng.random() < 0.5:
        return Var(k)
    return Add(Var(k), _const(rng, 0.25, 1.5))


def _sum(terms):
    out = terms[0]
    for t in terms[1:]:
        out = Add(out, t)
    return out


def _prod(terms):
    out = terms[0]
    for t in terms[1:]:
        out = Mul(out, t)
    return out


def _sample_points(arity, box, rng, count=48):
    lo, hi = box
    corners = itertools.islice(itertools.product((lo, hi), repeat=arity), 16)
    pts = [np.array(c, dtype=float) for c in corners]
    pts += list(lo + (hi - lo) * rng.random((count, arity)))
    return pts


def acceptable(f, box, rng, max_value=MAX_VALUE, check_partials=True):
    """True if f and its partials are defined and bounded by ``max_value`` on sampled box points."""
    fns = [f]
    if check_partials:
        fns += [partial(f, k) for k in range(1, f.arity + 1)]
    for p in _sample_points(f.arity, box, rng):
        for g in fns:
            try:
                v = evaluate(g, p)
            except DomainError:
                return False
            if not math.isfinite(v) or abs(v) > max_value:
                return False
    return True


def _draw(build, arity, kind, rng, box, max_value):
    box = box or default_box(kind)
    for _ in range(MAX_TRIES):
        f = ScalarFunction(build(), arity, DOMAINS[kind])
        if acceptable(f, box, rng, max_value):
            return f
    raise RuntimeError(f"no acceptable random function after {MAX_TRIES} draws")


# -- general positive trees --------------------------------------------------

def _positive_tree(arity, depth, rng, root=False):
    if depth <= 0 or (not root and rng.random() < 0.25):
        if rng.random() < 0.75:
            return Var(int(rng.integers(1, arity + 1)))
        return _const(rng)
    op = rng.choice(["add", "mul", "div", "powi", "powr", "exp", "log"])
    sub = lambda: _positive_tree(arity, depth - 1, rng)  # noqa: E731
    if op == "add":
        return Add(sub(), sub())
    if op == "mul":
        return Mul(sub(), sub())
    if op == "div":
        return Div(sub(), sub())
    if op == "powi":
        return PowInt(sub(), int(rng.choice([-2, -1, 2, 3])))
    if op == "powr":
        return PowReal(sub(), float(rng.choice([0.5, 1.5, -0.5])))
    if op == "exp":
        return Exp(Mul(Const(0.5), sub()))
    return Log(Add(Const(1.0), sub()))


def random_function(arity, rng, depth=6, box=None, max_value=MAX_VALUE):
    """A random tree of depth <= ``depth`` on (0, inf)^arity.

    Every subtree is positive on the positive orthant, so the tree is
    defined everywhere there; a top-level subtraction half of the time
    exercises signed values too.
    """
    def build():
        tree = _positive_tree(arity, depth - 1, rng, root=True)
        if rng.random() < 0.5:
            tree = Sub(tree, _positive_tree(arity, depth - 1, rng))
        return tree

    return _draw(build, arity, "pos", rng, box, max_value)


# -- monotone increasing -----------------------------------------------------

def _increasing_atom(k, rng, kind):
    # positive and nondecreasing in x_k on the domain kind
    base = _shifted(k, rng, kind)
    choice = rng.integers(0, 5)
    if choice == 0:
        return base
    if choice == 1:
        return PowInt(base, int(rng.integers(2, 4)))
    if choice == 2:
        return Exp(Mul(_const(rng, 0.2, 1.0), Var(k)))
    if choice == 3:
        return PowReal(base, float(rng.choice([0.5, 1.5])))
    return Log(Add(Var(k), _const(rng, 1.5, 3.0)))


def random_monotone(arity, rng, kind="pos", box=None, max_value=MAX_VALUE):
    """Random f nondecreasing in every argument.

    Built from positive increasing single-variable atoms joined by ``+`` and
    ``*`` with positive coefficients, optionally wrapped at the top in
    ``log`` or turned into ``-1/g``; both preserve monotonicity of a
    positive g.  Every variable appears in at least one atom.
    """
    if kind == "real":
        raise ValueError("monotone family needs kind 'pos' or 'nonneg'")

    def build():
        terms = []
        for k in range(1, arity + 1):
            atoms = [_increasing_atom(k, rng, kind)]
            if rng.random() < 0.4:
                other = int(rng.integers(1, arity + 1))
                atoms.append(_increasing_atom(other, rng, kind))
            terms.append(Mul(_const(rng, 0.2, 1.0), _prod(atoms)))
        g = _sum(list(rng.permutation(np.array(terms, dtype=object))))
        top = rng.random()
        if top < 0.2:
            return Log(g)
        if top < 0.4:
            return Sub(Const(0.0), Div(Const(1.0), g))
        return g

    return _draw(build, arity, kind, rng, box, max_value)


# -- convex ------------------------------------------------------------------

def _convex_atom(arity, rng, kind):
    k = int(rng.integers(1, arity + 1))
    l = int(rng.integers(1, arity + 1))
    if arity > 1 and k == l:
        l = k % arity + 1
    x, y = Var(k), Var(l)
    options = ["square", "quartic", "exp", "diffsq", "affsq", "expaff"]
    if kind in ("pos", "nonneg"):
        options += ["recip", "neglog", "quadlin"]
    if kind == "pos" and arity >= 2:
        options += ["recipprod"]
    op = rng.choice(options)
    if op == "square":
        return PowInt(Sub(x, _const(rng, -1.0, 1.0)), 2)
    if op == "quartic":
        return PowInt(x, 4)
    if op == "exp":
        return Exp(Mul(_const(rng, -1.0, 1.0), x))
    if op == "diffsq":
        return PowInt(Sub(x, y), 2)
    if op == "affsq":
        return PowInt(Add(Mul(_const(rng, -1.0, 1.0), x), Mul(_const(rng, -1.0, 1.0), y)), 2)
    if op == "expaff":
        return Exp(Add(Mul(_const(rng, -0.7, 0.7), x), Mul(_const(rng, -0.7, 0.7), y)))
    shift = Const(0.0) if kind == "pos" else _const(rng, 0.5, 1.5)
    if op == "recip":
        return PowInt(Add(x, shift), -int(rng.integers(1, 3)))
    if op == "neglog":
        return Sub(Const(0.0), Log(Add(x, shift)))
    if op == "quadlin":
        # x^2 / y is jointly convex for y > 0
        return Div(PowInt(x, 2), Add(y, shift) if kind == "nonneg" else y)
    # x^-p y^-q is convex on the positive orthant
    return Div(Const(1.0), Mul(PowInt(Var(k), int(rng.integers(1, 3))), PowInt(Var(l), int(rng.integers(1, 3)))))


def random_convex(arity, rng, kind="pos", box=None, max_value=MAX_VALUE):
    """Random jointly convex f: a positive combination of convex atoms plus an affine part."""
    if kind not in BOXES:
        default_box(kind)

    def build():
        count = int(rng.integers(1, arity + 3))
        terms = [Mul(_const(rng, 0.1, 1.0), _convex_atom(arity, rng, kind)) for _ in range(count)]
        if rng.random() < 0.5:
            terms.append(Mul(_const(rng, -1.0, 1.0), Var(int(rng.integers(1, arity + 1)))))
        return _sum(terms)

    return _draw(build, arity, kind, rng, box, max_value)


FAMILIES = {"any": random_function, "monotone": random_monotone, "convex": random_convex}
