"""
Scalar functions of m real variables as expression trees.

Grammar (EBNF)::

    expr    = term { ("+" | "-") term } ;
    term    = unary { ("*" | "/") unary } ;
    unary   = ("-" | "+") unary | power ;
    power   = atom [ ("^" | "**") unary ] ;
    atom    = number | variable | func "(" expr ")" | "(" expr ")" ;
    func    = "exp" | "log" ;
    variable = "x" digit { digit } ;          (* x1 .. xm *)

``^`` is right associative and binds tighter than unary minus, so ``-x1^2``
is ``-(x1^2)``.  The exponent must fold to a constant; integer-valued
exponents become integer powers, everything else a real power that
requires a nonnegative base.

Nodes are immutable.  The only rewriting ever applied is constant folding,
plus the pruning of structurally zero terms while building derivatives.
"""

import math
import re
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DomainError, ParseError

# bytecode opcodes shared by both kernel backends
OP_CONST, OP_VAR, OP_ADD, OP_SUB, OP_MUL, OP_DIV, OP_NEG, OP_POWI, OP_POWR, OP_EXP, OP_LOG = range(11)

_INF = math.inf

# integer powers with |p| <= POWI_UNROLL use binary powering, larger ones libm
# pow; the scalar evaluator and both kernel backends follow the same rule so
# they agree bit for bit
POWI_UNROLL = 8


def powi(a, p):
    """a**p for integer p; works on floats and numpy arrays alike."""
    e = abs(p)
    if e > POWI_UNROLL:
        return a ** float(p)
    if e == 0:
        return a * 0.0 + 1.0
    result = None
    base = a
    while e:
        if e & 1:
            result = base if result is None else result * base
        e >>= 1
        if e:
            base = base * base
    return 1.0 / result if p < 0 else result


# ---------------------------------------------------------------------------
# Intervals
# ---------------------------------------------------------------------------

_NAMED_INTERVALS = {
    "real": (-_INF, _INF, False, False),
    "r": (-_INF, _INF, False, False),
    "pos": (0.0, _INF, False, False),
    "nonneg": (0.0, _INF, True, False),
    "neg": (-_INF, 0.0, False, False),
    "nonpos": (-_INF, 0.0, False, True),
}

_BRACKET_RE = re.compile(r"^\s*([\[(])\s*([^,]+?)\s*,\s*([^,]+?)\s*([\])])\s*$")


def _parse_bound(text):
    t = text.strip().lower()
    if t in ("inf", "+inf", "infinity", "+infinity", "oo"):
        return _INF
    if t in ("-inf", "-infinity", "-oo"):
        return -_INF
    return float(t)


@dataclass(frozen=True)
class Interval:
    """A real interval with open/closed endpoints; infinite endpoints are always open."""

    lo: float = -_INF
    hi: float = _INF
    lo_closed: bool = False
    hi_closed: bool = False

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if math.isnan(lo) or math.isnan(hi):
            raise ValueError("interval endpoints must not be NaN")
        if lo > hi:
            raise ValueError(f"empty interval: lo={lo} > hi={hi}")
        if (self.lo_closed and math.isinf(lo)) or (self.hi_closed and math.isinf(hi)):
            raise ValueError("closed endpoints must be finite")
        if lo == hi and not (self.lo_closed and self.hi_closed):
            raise ValueError("degenerate interval must be closed on both ends")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def parse(cls, text):
        """Parse ``real``, ``pos``, ``nonneg``, ``neg``, ``nonpos`` or bracket notation like ``[0, inf)``."""
        key = text.strip().lower()
        if key in _NAMED_INTERVALS:
            return cls(*_NAMED_INTERVALS[key])
        match = _BRACKET_RE.match(text)
        if not match:
            raise ValueError(f"cannot parse interval {text!r}")
        left, lo, hi, right = match.groups()
        return cls(_parse_bound(lo), _parse_bound(hi), left == "[", right == "]")

    def contains(self, x):
        if x < self.lo or x > self.hi:
            return False
        if x == self.lo and not self.lo_closed:
            return False
        if x == self.hi and not self.hi_closed:
            return False
        return True

    def __str__(self):
        def fmt(v):
            return "inf" if v == _INF else "-inf" if v == -_INF else repr(v)

        return f"{'[' if self.lo_closed else '('}{fmt(self.lo)}, {fmt(self.hi)}{']' if self.hi_closed else ')'}"


REAL_LINE = Interval()


def _split_top_level(text):
    parts, depth, start = [], 0, 0
    for i, ch in enumerate(text):
        if ch in "[(":
            depth += 1
        elif ch in "])":
            depth -= 1
        elif ch in ",;" and depth == 0:
            parts.append(text[start:i])
            start = i + 1
    parts.append(text[start:])
    return [p for p in (s.strip() for s in parts) if p]


def parse_domain(spec, arity):
    """Build a domain tuple from ``None``, an Interval, a string or a sequence.

    A single interval is broadcast to every variable.  Strings may list
    several intervals separated by commas or semicolons, e.g. ``"pos, [0, 1]"``.
    """
    if spec is None:
        return (REAL_LINE,) * arity
    if isinstance(spec, Interval):
        return (spec,) * arity
    if isinstance(spec, str):
        items = [Interval.parse(p) for p in _split_top_level(spec)]
    else:
        items = [s if isinstance(s, Interval) else Interval.parse(s) for s in spec]
    if len(items) == 1:
        items = items * arity
    if len(items) != arity:
        raise ValueError(f"domain lists {len(items)} intervals but the function has arity {arity}")
    return tuple(items)


# ---------------------------------------------------------------------------
# Expression nodes
# ---------------------------------------------------------------------------

def _fmt_number(v):
    return repr(float(v))


class Node:
    """Base class of expression tree nodes."""

    precedence = 5
    __slots__ = ()

    def children(self):
        return ()

    def variables(self):
        out = set()
        stack = [self]
        while stack:
            node = stack.pop()
            if isinstance(node, Var):
                out.add(node.index)
            stack.extend(node.children())
        return out

    def _wrap(self, child, min_prec):
        s = str(child)
        return f"({s})" if child.precedence < min_prec else s


@dataclass(frozen=True, eq=True)
class Const(Node):
    value: float

    @property
    def precedence(self):
        return 3 if self.value < 0 else 5

    def __str__(self):
        return _fmt_number(self.value)

    def evaluate(self, x):
        return self.value

    def diff(self, k):
        return ZERO

    def emit(self, code):
        code.append((OP_CONST, 0, self.value))


ZERO = Const(0.0)
ONE = Const(1.0)


@dataclass(frozen=True, eq=True)
class Var(Node):
    index: int  # 1-based

    def __str__(self):
        return f"x{self.index}"

    def evaluate(self, x):
        return x[self.index - 1]

    def diff(self, k):
        return ONE if k == self.index else ZERO

    def emit(self, code):
        code.append((OP_VAR, self.index - 1, 0.0))


@dataclass(frozen=True, eq=True)
class _Binary(Node):
    left: Node
    right: Node

    def children(self):
        return (self.left, self.right)

    def emit(self, code):
        self.left.emit(code)
        self.right.emit(code)
        code.append((self.opcode, 0, 0.0))


class Add(_Binary):
    precedence = 1
    opcode = OP_ADD

    def __str__(self):
        return f"{self._wrap(self.left, 1)} + {self._wrap(self.right, 2)}"

    def evaluate(self, x):
        return self.left.evaluate(x) + self.right.evaluate(x)

    def diff(self, k):
        return _dadd(self.left.diff(k), self.right.diff(k))


class Sub(_Binary):
    precedence = 1
    opcode = OP_SUB

    def __str__(self):
        return f"{self._wrap(self.left, 1)} - {self._wrap(self.right, 2)}"

    def evaluate(self, x):
        return self.left.evaluate(x) - self.right.evaluate(x)

    def diff(self, k):
        return _dsub(self.left.diff(k), self.right.diff(k))


class Mul(_Binary):
    precedence = 2
    opcode = OP_MUL

    def __str__(self):
        return f"{self._wrap(self.left, 2)} * {self._wrap(self.right, 3)}"

    def evaluate(self, x):
        return self.left.evaluate(x) * self.right.evaluate(x)

    def diff(self, k):
        a, b = self.left, self.right
        return _dadd(_dmul(a.diff(k), b), _dmul(a, b.diff(k)))


class Div(_Binary):
    precedence = 2
    opcode = OP_DIV

    def __str__(self):
        return f"{self._wrap(self.left, 2)} / {self._wrap(self.right, 3)}"

    def evaluate(self, x):
        den = self.right.evaluate(x)
        if den == 0.0:
            raise DomainError(f"division by zero in {self}")
        return self.left.evaluate(x) / den

    def diff(self, k):
        a, b = self.left, self.right
        da, db = a.diff(k), b.diff(k)
        first = _ddiv(da, b)
        if _is_zero(db):
            return first
        return _dsub(first, _ddiv(_dmul(a, db), PowInt(b, 2)))


@dataclass(frozen=True, eq=True)
class Neg(Node):
    operand: Node
    precedence = 3

    def children(self):
        return (self.operand,)

    def __str__(self):
        return f"-{self._wrap(self.operand, 3)}"

    def evaluate(self, x):
        return -self.operand.evaluate(x)

    def diff(self, k):
        d = self.operand.diff(k)
        return ZERO if _is_zero(d) else make_neg(d)

    def emit(self, code):
        self.operand.emit(code)
        code.append((OP_NEG, 0, 0.0))


@dataclass(frozen=True, eq=True)
class PowInt(Node):
    base: Node
    exponent: int
    precedence = 4

    def children(self):
        return (self.base,)

    def __str__(self):
        e = str(self.exponent) if self.exponent >= 0 else f"({self.exponent})"
        return f"{self._wrap(self.base, 5)}^{e}"

    def evaluate(self, x):
        b = self.base.evaluate(x)
        if b == 0.0 and self.exponent < 0:
            raise DomainError(f"zero raised to negative power in {self}")
        try:
            return powi(b, self.exponent)
        except (OverflowError, ZeroDivisionError):
            raise DomainError(f"overflow in {self}") from None

    def diff(self, k):
        p = self.exponent
        db = self.base.diff(k)
        if p == 0 or _is_zero(db):
            return ZERO
        if p == 1:
            return db
        reduced = self.base if p == 2 else PowInt(self.base, p - 1)
        return _dmul(make_mul(Const(float(p)), reduced), db)

    def emit(self, code):
        self.base.emit(code)
        code.append((OP_POWI, self.exponent, 0.0))


@dataclass(frozen=True, eq=True)
class PowReal(Node):
    base: Node
    exponent: float
    precedence = 4

    def children(self):
        return (self.base,)

    def __str__(self):
        e = _fmt_number(self.exponent)
        return f"{self._wrap(self.base, 5)}^{e if self.exponent >= 0 else '(' + e + ')'}"

    def evaluate(self, x):
        b = self.base.evaluate(x)
        if b < 0.0 or (b == 0.0 and self.exponent < 0):
            raise DomainError(f"real power of {b!r} undefined in {self}")
        try:
            return b ** self.exponent
        except OverflowError:
            raise DomainError(f"overflow in {self}") from None

    def diff(self, k):
        db = self.base.diff(k)
        if _is_zero(db):
            return ZERO
        return _dmul(make_mul(Const(self.exponent), PowReal(self.base, self.exponent - 1.0)), db)

    def emit(self, code):
        self.base.emit(code)
        code.append((OP_POWR, 0, self.exponent))


@dataclass(frozen=True, eq=True)
class Exp(Node):
    operand: Node

    def children(self):
        return (self.operand,)

    def __str__(self):
        return f"exp({self.operand})"

    def evaluate(self, x):
        try:
            return math.exp(self.operand.evaluate(x))
        except OverflowError:
            raise DomainError(f"overflow in {self}") from None

    def diff(self, k):
        return _dmul(self, self.operand.diff(k))

    def emit(self, code):
        self.operand.emit(code)
        code.append((OP_EXP, 0, 0.0))


@dataclass(frozen=True, eq=True)
class Log(Node):
    operand: Node

    def children(self):
        return (self.operand,)

    def __str__(self):
        return f"log({self.operand})"

    def evaluate(self, x):
        v = self.operand.evaluate(x)
        if v <= 0.0:
            raise DomainError(f"log of nonpositive value {v!r} in {self}")
        return math.log(v)

    def diff(self, k):
        return _ddiv(self.operand.diff(k), self.operand)

    def emit(self, code):
        self.operand.emit(code)
        code.append((OP_LOG, 0, 0.0))


# constant-folding constructors ---------------------------------------------

def _fold(node):
    if all(isinstance(c, Const) for c in node.children()):
        value = node.evaluate(())
        if not math.isfinite(value):
            raise DomainError(f"constant expression {node} is not finite")
        return Const(float(value))
    return node


def make_add(a, b):
    return _fold(Add(a, b))


def make_sub(a, b):
    return _fold(Sub(a, b))


def make_mul(a, b):
    return _fold(Mul(a, b))


def make_div(a, b):
    return _fold(Div(a, b))


def make_neg(a):
    return _fold(Neg(a))


def make_pow(base, exponent):
    """Power with a constant exponent; integer-valued exponents give an integer power."""
    if not isinstance(exponent, Const):
        raise DomainError("exponent must be a constant expression")
    e = exponent.value
    if e.is_integer() and abs(e) <= 2**31:
        return _fold(PowInt(base, int(e)))
    return _fold(PowReal(base, e))


def make_exp(a):
    return _fold(Exp(a))


def make_log(a):
    return _fold(Log(a))


# derivative-construction helpers: drop structurally zero terms and unit factors

def _is_zero(node):
    return isinstance(node, Const) and node.value == 0.0


def _is_one(node):
    return isinstance(node, Const) and node.value == 1.0


def _dadd(a, b):
    if _is_zero(a):
        return b
    if _is_zero(b):
        return a
    return make_add(a, b)


def _dsub(a, b):
    if _is_zero(b):
        return a
    if _is_zero(a):
        return make_neg(b)
    return make_sub(a, b)


def _dmul(a, b):
    if _is_zero(a) or _is_zero(b):
        return ZERO
    if _is_one(a):
        return b
    if _is_one(b):
        return a
    return make_mul(a, b)


def _ddiv(a, b):
    if _is_zero(a):
        return ZERO
    return make_div(a, b)


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/^()])"
    r")"
)

_FUNCS = {"exp": make_exp, "log": make_log}


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        match = _TOKEN_RE.match(text, pos)
        if not match or match.end() == pos:
            bad = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ParseError(f"unexpected character {text[bad]!r}", text, bad)
        kind = match.lastgroup
        start = match.start(kind)
        tokens.append((kind, match.group(kind), start))
        pos = match.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text, arity):
        self.text = text
        self.arity = arity
        self.tokens = _tokenize(text)
        self.i = 0
        self.max_var = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message, tok=None):
        tok = tok or self.peek()
        return ParseError(message, self.text, tok[2])

    def expect(self, value):
        tok = self.take()
        if tok[1] != value:
            found = tok[1] or "end of input"
            raise ParseError(f"expected {value!r}, found {found!r}", self.text, tok[2])

    def build(self, fn, tok, *args):
        try:
            return fn(*args)
        except DomainError as exc:
            raise self.error(str(exc), tok) from None

    def parse(self):
        node = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise self.error(f"unexpected token {tok[1]!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            tok = self.take()
            rhs = self.term()
            node = self.build(make_add if tok[1] == "+" else make_sub, tok, node, rhs)
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            tok = self.take()
            rhs = self.unary()
            node = self.build(make_mul if tok[1] == "*" else make_div, tok, node, rhs)
        return node

    def unary(self):
        tok = self.peek()
        if tok[1] == "-":
            self.take()
            return self.build(make_neg, tok, self.unary())
        if tok[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        tok = self.peek()
        if tok[1] in ("^", "**"):
            self.take()
            exponent = self.unary()
            if not isinstance(exponent, Const):
                raise self.error("exponent must be a constant expression", tok)
            return self.build(make_pow, tok, base, exponent)
        return base

    def atom(self):
        tok = self.take()
        kind, value, pos = tok
        if kind == "num":
            return Const(float(value))
        if kind == "name":
            if value in _FUNCS:
                self.expect("(")
                inner = self.expr()
                self.expect(")")
                return self.build(_FUNCS[value], tok, inner)
            match = re.fullmatch(r"x(\d+)", value)
            if not match:
                raise ParseError(f"unknown identifier {value!r}", self.text, pos)
            index = int(match.group(1))
            if index < 1:
                raise ParseError("variables are numbered from x1", self.text, pos)
            if self.arity is not None and index > self.arity:
                raise ParseError(f"variable {value} exceeds arity {self.arity}", self.text, pos)
            self.max_var = max(self.max_var, index)
            return Var(index)
        if value == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = value or "end of input"
        raise ParseError(f"unexpected {found!r}", self.text, pos)


# ---------------------------------------------------------------------------
# ScalarFunction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Program:
    """Postfix bytecode for the kernels: parallel opcode / int-arg / float-arg arrays."""

    ops: np.ndarray
    iargs: np.ndarray
    fargs: np.ndarray
    stack_size: int


def _compile(node):
    code = []
    node.emit(code)
    depth = peak = 0
    for op, _, _ in code:
        if op in (OP_CONST, OP_VAR):
            depth += 1
        elif op in (OP_ADD, OP_SUB, OP_MUL, OP_DIV):
            depth -= 1
        peak = max(peak, depth)
    ops = np.array([c[0] for c in code], dtype=np.int32)
    iargs = np.array([c[1] for c in code], dtype=np.int64)
    fargs = np.array([c[2] for c in code], dtype=np.float64)
    for arr in (ops, iargs, fargs):
        arr.setflags(write=False)
    return Program(ops, iargs, fargs, peak)


@dataclass(frozen=True)
class ScalarFunction:
    """A real function of ``arity`` variables with a per-variable domain box."""

    expr: Node
    arity: int
    domain: tuple = field(default=None)

    def __post_init__(self):
        if not isinstance(self.arity, int) or self.arity < 1:
            raise ValueError("arity must be a positive integer")
        dom = parse_domain(self.domain, self.arity)
        object.__setattr__(self, "domain", dom)
        bad = [i for i in self.expr.variables() if not 1 <= i <= self.arity]
        if bad:
            raise ValueError(f"expression references x{max(bad)} but arity is {self.arity}")

    def __str__(self):
        return str(self.expr)

    def __call__(self, *point):
        return evaluate(self, point)

    def with_domain(self, domain):
        return ScalarFunction(self.expr, self.arity, domain)

    def partial(self, k):
        return partial(self, k)

    @cached_property
    def _partials(self):
        return {}

    @cached_property
    def program(self):
        return _compile(self.expr)

    def in_domain(self, point):
        return all(iv.contains(v) for iv, v in zip(self.domain, point))


def parse_expr(text, arity=None, domain=None):
    """Parse ``text`` into a ScalarFunction.

    Parameters
    ----------
    text : str
        Expression in the variables ``x1 .. x<arity>``.
    arity : int, optional
        Number of variables.  Inferred as the largest variable index (at
        least 1) when omitted.
    domain : str, Interval or sequence, optional
        Domain annotation; defaults to the whole real line per variable.

    Raises
    ------
    ParseError
        On syntax errors, unknown identifiers, or a variable index above ``arity``.
    """
    if arity is not None and (not isinstance(arity, int) or arity < 1):
        raise ValueError("arity must be a positive integer")
    parser = _Parser(text, arity)
    node = parser.parse()
    if arity is None:
        arity = max(parser.max_var, 1)
    return ScalarFunction(node, arity, domain)


def evaluate(f, point):
    """Evaluate ``f`` at ``point``; raises DomainError outside the domain or on undefined arithmetic."""
    if len(point) != f.arity:
        raise ValueError(f"expected {f.arity} coordinates, got {len(point)}")
    x = tuple(float(v) for v in point)
    for k, (iv, v) in enumerate(zip(f.domain, x), start=1):
        if not iv.contains(v):
            raise DomainError(f"x{k} = {v!r} is outside the domain {iv}")
    value = f.expr.evaluate(x)
    if not math.isfinite(value):
        raise DomainError(f"{f} is not finite at {x}")
    return float(value)


def partial(f, k):
    """Exact symbolic partial derivative of ``f`` with respect to ``x<k>`` (1-based)."""
    if not 1 <= k <= f.arity:
        raise ValueError(f"partial index {k} out of range 1..{f.arity}")
    cache = f._partials
    if k not in cache:
        cache[k] = ScalarFunction(f.expr.diff(k), f.arity, f.domain)
    return cache[k]
