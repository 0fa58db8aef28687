"""Command-line interface: ``tensortrace {eval,grad,optimize,check,bench}``.

Structured results go to stdout (or ``--output``) as JSON with sorted keys,
so identical inputs and seeds give byte-identical documents; ``bench``
writes CSV instead.  Options may also come from a flat ``key = value``
config file (``--config``); command-line flags win.

Exit codes: 0 success, 1 input error (files, parsing, domain,
preconditions), 2 numerical failure (eigensolver, line search), 3 a
property check failed.
"""

import argparse
import configparser
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .bench import run_bench, to_csv
from .errors import EigenError, TensorTraceError
from .expr import parse_expr
from .graph import SpectralObjective, laplacian, objective_and_gradient, read_graph, spectral_objective
from .linalg import eig_sym, read_matrix
from .optimize import LINE_SEARCH_FAILURE, ConstraintSet, MinimizeOptions, maximize, minimize
from .randfun import FAMILIES
from .tensor import trace_matfun_diag, trace_matfun_multi
from . import verify

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_PROPERTY = 0, 1, 2, 3
THREADS_ENV = "TENSORTRACE_NUM_THREADS"
SUITES = ("oracle", "monotone", "convexity", "derivative", "parameterization", "graph-monotone", "graph-convexity")


class InputError(Exception):
    """Bad command-line or config input."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(f"{message} (see {self.prog} --help)")


def _env_threads():
    raw = os.environ.get(THREADS_ENV)
    if not raw:
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise InputError(f"{THREADS_ENV}={raw!r} is not an integer") from None
    if value < 1:
        raise InputError(f"{THREADS_ENV} must be >= 1")
    return value


def _function_args(p, default_expr=None):
    p.add_argument("--expr", "-f", default=default_expr, help="expression in x1..xm, e.g. 'x1^3*x2^5'")
    p.add_argument("--arity", type=int, help="number of variables (default: largest index used)")
    p.add_argument("--domain", help="per-variable domain, e.g. 'pos' or 'pos, [0, 1]' (default: real line)")


def _common(p):
    p.add_argument("--config", help="flat key = value file; flags override it")
    p.add_argument("--output", "-o", help="write the result here instead of stdout")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, help=f"worker threads (default: ${THREADS_ENV} or 1)")


def _input_args(p, matrices=True):
    p.add_argument("--graph", "-g", help="graph file: 'n m' then m lines 'i j w'")
    if matrices:
        p.add_argument("--matrix", "-M", action="append", default=None,
                       help="matrix file ('n' then n rows); repeat once per argument")
    p.add_argument("--exclude-smallest", type=int, default=0,
                   help="drop this many smallest Laplacian eigenvalues (objective only)")


def build_parser():
    parser = _Parser(prog="tensortrace", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="trace functional of matrices or a graph's spectral objective")
    _common(p)
    _function_args(p)
    _input_args(p)
    p.add_argument("--summation", choices=("sequential", "pairwise"), default="sequential")

    p = sub.add_parser("grad", help="objective and edge-weight gradient of a graph")
    _common(p)
    _function_args(p)
    _input_args(p, matrices=False)
    p.add_argument("--fd-check", action="store_true", help="compare against central finite differences")

    p = sub.add_parser("optimize", help="projected-gradient optimization of edge weights")
    _common(p)
    _function_args(p)
    _input_args(p, matrices=False)
    p.add_argument("--lower", type=float, default=0.0)
    p.add_argument("--upper", type=float, default=math.inf)
    p.add_argument("--budget", type=float)
    p.add_argument("--maximize", action="store_true", help="maximize F (f concave) instead of minimizing")
    p.add_argument("--declared-convex", action="store_true",
                   help="assert f is convex (concave with --maximize) to enable the certificate")
    defaults = MinimizeOptions()
    p.add_argument("--step0", type=float, default=defaults.step0)
    p.add_argument("--shrink", type=float, default=defaults.shrink)
    p.add_argument("--max-iter", type=int, default=defaults.max_iter)
    p.add_argument("--tol", type=float, default=defaults.tol)

    p = sub.add_parser("check", help="randomized property checks; exit 3 on any failure")
    _common(p)
    _function_args(p)
    p.add_argument("--suite", default="convexity",
                   help=f"comma-separated list from: {', '.join(SUITES)}, or 'self-test'")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--n", type=int, default=3, help="matrix dimension for matrix suites")
    p.add_argument("--n-max", type=int, default=15, help="largest vertex count for graph suites")
    p.add_argument("--random", choices=sorted(FAMILIES), help="draw f from a random family instead of --expr")
    p.add_argument("--fault", choices=("drop_last", "negate"),
                   help="inject a known fault (oracle: drop_last, derivative: negate)")
    p.add_argument("--param-kind", choices=("monotone", "convex"), default="monotone")
    p.add_argument("--phi", default="x1", help="path shape phi for M(t) = C + phi(t) D")
    p.add_argument("--t-max", type=float, default=2.0)
    p.add_argument("--crossing", type=int, default=0, help="derivative suite: paths with eigenvalue crossings")

    p = sub.add_parser("bench", help="dense vs eigenvalue-sum timings as CSV")
    _common(p)
    _function_args(p)
    p.add_argument("--sizes", default="4,8,16,32")
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--warmup", type=int, default=1)
    p.add_argument("--cap", type=int, default=512)
    return parser


# -- config handling ---------------------------------------------------------

def read_config(path):
    """Flat ``key = value`` file (``#`` comments); keys use option names with '-' or '_'."""
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"), inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        cp.read_string("[config]\n" + text, source=path)
    except configparser.Error as exc:
        raise InputError(f"{path}: {exc}") from None
    return {k.replace("-", "_"): v for k, v in cp["config"].items()}


def _action_map(parser, command):
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction)).choices[command]
    return sub, {a.dest: a for a in sub._actions if a.dest not in ("help", "config")}


def _coerce(action, raw, path):
    if action.nargs == 0 or isinstance(action, argparse._StoreTrueAction):
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise InputError(f"{path}: {action.dest} expects true/false, got {raw!r}")
    if isinstance(action, argparse._AppendAction):
        return [v.strip() for v in raw.split(",") if v.strip()]
    try:
        value = action.type(raw) if action.type else raw
    except ValueError:
        raise InputError(f"{path}: {action.dest} = {raw!r} is not a valid {action.type.__name__}") from None
    if action.choices and value not in action.choices:
        raise InputError(f"{path}: {action.dest} must be one of {', '.join(map(str, action.choices))}")
    return value


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        config = read_config(args.config)
        sub, actions = _action_map(parser, args.command)
        unknown = sorted(set(config) - set(actions))
        if unknown:
            raise InputError(f"{args.config}: unknown key(s) for '{args.command}': {', '.join(unknown)}")
        values = {k: _coerce(actions[k], v, args.config) for k, v in config.items()}
        # list options from the config are replaced, not extended, by flags
        lists = {k: values.pop(k) for k in list(values) if isinstance(actions[k], argparse._AppendAction)}
        sub.set_defaults(**values)
        args = parser.parse_args(argv)
        for k, v in lists.items():
            if getattr(args, k) is None:
                setattr(args, k, v)
    if args.threads is None:
        args.threads = _env_threads()
    if args.threads < 1:
        raise InputError("--threads must be >= 1")
    return args


# -- commands ----------------------------------------------------------------

def _function(args, required=True):
    if not args.expr:
        if required:
            raise InputError("an expression is required (--expr)")
        return None
    return parse_expr(args.expr, args.arity, args.domain)


def _graph_only(args):
    if not args.graph:
        raise InputError(f"'{args.command}' needs --graph")
    return read_graph(args.graph)


def _one_source(args):
    sources = [s for s in ("graph", "matrix") if getattr(args, s, None)]
    if len(sources) != 1:
        raise InputError("give exactly one input source: --graph or --matrix")
    return sources[0]


def cmd_eval(args):
    f = _function(args)
    if _one_source(args) == "graph":
        g = read_graph(args.graph)
        obj = SpectralObjective(f, args.exclude_smallest, args.threads, args.summation)
        value = spectral_objective(obj, g)
        return {"objective": value, "eigenvalues": eig_sym(laplacian(g)).eigenvalues.tolist(),
                "exclude_smallest": args.exclude_smallest}
    if args.exclude_smallest:
        raise InputError("--exclude-smallest applies to graph input only")
    mats = [read_matrix(p) for p in args.matrix]
    if len(mats) == 1 and f.arity > 1:
        value = trace_matfun_diag(f, mats[0], summation=args.summation, threads=args.threads)
    else:
        if len(mats) != f.arity:
            raise InputError(f"function has arity {f.arity} but {len(mats)} matrices were given")
        value = trace_matfun_multi(f, mats, summation=args.summation, threads=args.threads)
    return {"objective": value, "eigenvalues": [eig_sym(m).eigenvalues.tolist() for m in mats]}


def _fd_gradient(obj, g, h_rel=1e-6):
    out = np.empty(g.num_edges)
    for e in range(g.num_edges):
        h = h_rel * max(1.0, g.weights[e])
        up, down = g.weights.copy(), g.weights.copy()
        up[e] += h
        down[e] -= h
        if down[e] < 0:  # one-sided at the weight bound
            out[e] = (spectral_objective(obj, g.with_weights(up)) - spectral_objective(obj, g)) / h
        else:
            out[e] = (spectral_objective(obj, g.with_weights(up)) - spectral_objective(obj, g.with_weights(down))) / (2 * h)
    return out


def cmd_grad(args):
    f = _function(args)
    g = _graph_only(args)
    obj = SpectralObjective(f, args.exclude_smallest, args.threads)
    value, grad = objective_and_gradient(obj, g)
    out = {"objective": value, "gradient": grad.tolist()}
    if args.fd_check:
        fd = _fd_gradient(obj, g)
        rel = np.abs(grad - fd) / np.maximum(1.0, np.abs(fd))
        out["fd_check"] = {"finite_difference": fd.tolist(), "max_rel_error": float(rel.max(initial=0.0))}
    return out


def cmd_optimize(args):
    f = _function(args)
    g = _graph_only(args)
    obj = SpectralObjective(f, args.exclude_smallest, args.threads)
    constraints = ConstraintSet(args.lower, args.upper, args.budget)
    try:
        opts = MinimizeOptions(args.step0, args.shrink, args.max_iter, args.tol)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    run = maximize if args.maximize else minimize
    flag = {"declared_concave" if args.maximize else "declared_convex": args.declared_convex}
    res = run(obj, g, constraints, opts, seed=args.seed, **flag)
    out = res.to_dict()
    out["sense"] = "maximize" if args.maximize else "minimize"
    code = EXIT_NUMERIC if res.status == LINE_SEARCH_FAILURE else EXIT_OK
    return out, code


def _suite_function(args, suite):
    if args.random:
        rng = np.random.default_rng(args.seed)
        arity = args.arity or 2
        if args.random == "any":
            return FAMILIES["any"](arity, rng)
        kind = "nonneg" if suite.startswith("graph") else "pos"
        return FAMILIES[args.random](arity, rng, kind=kind)
    return _function(args)


def _run_suite(args, suite):
    if suite == "parameterization":
        rng = np.random.default_rng([args.seed, 0])
        c = verify.random_symmetric(args.n, (-1.0, 1.0), rng)
        d = verify.random_psd(args.n, rng, 1.0)
        path = verify.MatrixPath.from_expr(c, d, args.phi)
        ts = np.linspace(0.0, args.t_max, max(2, min(args.trials, 50)))
        return verify.check_parameterization(args.param_kind, path, ts)
    f = _suite_function(args, suite)
    if suite == "oracle":
        tuples = verify.random_oracle_tuples(f, args.n, args.trials, args.seed)
        return verify.check_oracle_equivalence(f, tuples, seed=args.seed,
                                               fault=args.fault if args.fault == "drop_last" else None)
    if suite == "monotone":
        return verify.check_monotone(f, trials=args.trials, seed=args.seed, n=args.n)
    if suite == "convexity":
        return verify.check_convex(f, trials=args.trials, seed=args.seed, n=args.n)
    if suite == "derivative":
        paths = verify.random_derivative_paths(f, args.n, args.trials, args.seed, crossing=min(args.crossing, args.trials))
        report = verify.check_derivative(f, paths, t_samples=(0.5,), fault=args.fault if args.fault == "negate" else None)
        report.seed = args.seed
        return report
    if suite == "graph-monotone":
        return verify.check_graph_monotone(f, trials=args.trials, seed=args.seed, n_max=args.n_max)
    if suite == "graph-convexity":
        return verify.check_graph_convex(f, trials=args.trials, seed=args.seed, n_max=args.n_max)
    raise InputError(f"unknown suite {suite!r}; choose from {', '.join(SUITES)} or self-test")


def cmd_check(args):
    names = [s.strip() for s in args.suite.split(",") if s.strip()]
    if not names:
        raise InputError("--suite is empty")
    reports = []
    for name in names:
        if name == "self-test":
            reports += list(verify.self_test(args.seed).values())
        else:
            reports.append(_run_suite(args, name))
    docs = [r.to_dict() for r in reports]
    return docs, (EXIT_PROPERTY if any(r.failures for r in reports) else EXIT_OK)


def cmd_bench(args):
    try:
        sizes = [int(s) for s in str(args.sizes).split(",") if s.strip()]
    except ValueError:
        raise InputError(f"--sizes must be comma-separated integers, got {args.sizes!r}") from None
    f = parse_expr(args.expr, args.arity or args.m, args.domain) if args.expr else None
    try:
        rows = run_bench(f, sizes, args.m, args.repeats, args.warmup, args.cap, args.seed)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    return to_csv(rows)


COMMANDS = {"eval": cmd_eval, "grad": cmd_grad, "optimize": cmd_optimize, "check": cmd_check, "bench": cmd_bench}


def _finite(obj):
    # JSON has no inf/nan; encode them as strings
    if isinstance(obj, float) and not math.isfinite(obj):
        return "inf" if obj > 0 else "-inf" if obj < 0 else "nan"
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


def render(result):
    if isinstance(result, str):
        return result
    return json.dumps(_finite(result), sort_keys=True, indent=2) + "\n"


def _emit(text, path):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None):
    try:
        args = parse_args(argv)
        out = COMMANDS[args.command](args)
        result, code = out if isinstance(out, tuple) else (out, EXIT_OK)
        _emit(render(result), args.output)
        return code
    except EigenError as exc:
        print(f"tensortrace: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, TensorTraceError, ValueError) as exc:
        print(f"tensortrace: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        name = exc.filename or ""
        print(f"tensortrace: error: {name}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_INPUT
    except ArithmeticError as exc:
        print(f"tensortrace: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
