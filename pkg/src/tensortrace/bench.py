"""Timing of the dense Kronecker construction against the eigenvalue-sum trace."""

import csv
import io
import statistics
import time

import numpy as np

from . import kernels
from .errors import CapExceededError
from .expr import parse_expr
from .tensor import DENSE_CAP, matfun_multi_dense, trace_matfun_multi
from .verify import random_tuple

COLUMNS = ("n", "m", "dense_ms", "eigsum_ms", "ratio", "fallback_ms", "abs_diff")


def default_function(m):
    return parse_expr("*".join(f"x{k}" for k in range(1, m + 1)), m)


def median_ms(fn, repeats=5, warmup=1):
    """Median wall time of ``fn()`` in milliseconds after ``warmup`` discarded calls."""
    for _ in range(warmup):
        fn()
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append((time.perf_counter() - t0) * 1e3)
    return statistics.median(times)


def bench_row(f, n, repeats=5, warmup=1, cap=DENSE_CAP, seed=0):
    """One timing row for an n x n random tuple.

    The dense column is ``None`` when n^m exceeds ``cap``; so are ``ratio``
    and ``abs_diff``.  ``fallback_ms`` times the eigenvalue sum on the
    pure-Python kernel backend.
    """
    m = f.arity
    mats = random_tuple(f, n, np.random.default_rng([seed, n, m]))
    fast = trace_matfun_multi(f, mats)
    eigsum_ms = median_ms(lambda: trace_matfun_multi(f, mats), repeats, warmup)
    fallback_ms = median_ms(lambda: trace_matfun_multi(f, mats, backend="python"), repeats, warmup)
    row = {"n": n, "m": m, "dense_ms": None, "eigsum_ms": eigsum_ms, "ratio": None,
           "fallback_ms": fallback_ms, "abs_diff": None}
    if n ** m <= cap:
        dense = float(np.trace(matfun_multi_dense(f, mats, cap=cap)))
        row["dense_ms"] = median_ms(lambda: np.trace(matfun_multi_dense(f, mats, cap=cap)), repeats, warmup)
        row["ratio"] = row["dense_ms"] / eigsum_ms if eigsum_ms > 0 else float("inf")
        row["abs_diff"] = abs(dense - fast)
    return row


def run_bench(f=None, sizes=(4, 8, 16, 32), m=2, repeats=5, warmup=1, cap=DENSE_CAP, seed=0):
    f = f or default_function(m)
    if f.arity != m:
        raise ValueError(f"function has arity {f.arity} but m={m}")
    if repeats < 1 or warmup < 0:
        raise ValueError("repeats must be >= 1 and warmup >= 0")
    try:
        return [bench_row(f, int(n), repeats, warmup, cap, seed) for n in sizes]
    except CapExceededError:  # pragma: no cover - guarded by the n^m check
        raise


def to_csv(rows):
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: ("" if row[k] is None else (f"{row[k]:.6g}" if isinstance(row[k], float) else row[k]))
                         for k in COLUMNS})
    return buf.getvalue()


def backend_names():
    return sorted(kernels.BACKENDS)
