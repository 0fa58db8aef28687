"""Compiled kernel vs pure-Python fallback on eigenvalue grids.

Usage: python3 benchmarks/bench_backends.py [--sizes 64,128,256] [--m 2] [--repeats 5]

Prints CSV rows: n, m, points, op, compiled_ms, python_ms, speedup.  The
backends agree bit for bit on rational operations; exp, log and real powers
may differ by an ulp (numpy SIMD vs libm), so the trace sums are compared to
a relative tolerance and the script aborts beyond it.
"""

import argparse
import sys

import numpy as np

from tensortrace import kernels
from tensortrace.bench import median_ms
from tensortrace.expr import partial, parse_expr

EXPR = "exp(x1/4) * x2^3 + log(1 + x1*x2) - x1^2/(1 + x2)"
REL_TOL = 1e-13


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--sizes", default="64,128,256")
    ap.add_argument("--m", type=int, default=2)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args(argv)
    if "compiled" not in kernels.BACKENDS:
        print("compiled backend not built; nothing to compare", file=sys.stderr)
        return 1
    f = parse_expr(EXPR if args.m == 2 else " + ".join(f"x{k}^2 * exp(x{k}/4)" for k in range(1, args.m + 1)),
                   args.m, "pos")
    progs = [partial(f, k).program for k in range(1, args.m + 1)]
    print("n,m,points,op,compiled_ms,python_ms,speedup")
    rng = np.random.default_rng(0)
    for n in (int(s) for s in args.sizes.split(",")):
        eigs = rng.uniform(0.5, 2.0, (args.m, n))
        a = kernels.trace_sum(f.program, eigs, backend="compiled")[0]
        b = kernels.trace_sum(f.program, eigs, backend="python")[0]
        if abs(a - b) > REL_TOL * max(1.0, abs(b)):
            print(f"backends disagree at n={n}: {a} vs {b}", file=sys.stderr)
            return 2
        for op, call in (("trace", lambda be: kernels.trace_sum(f.program, eigs, backend=be)),
                         ("marginals", lambda be: kernels.marginal_weights(progs, eigs, backend=be))):
            tc = median_ms(lambda: call("compiled"), args.repeats)
            tp = median_ms(lambda: call("python"), args.repeats)
            print(f"{n},{args.m},{n ** args.m},{op},{tc:.4g},{tp:.4g},{tp / tc:.3g}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
