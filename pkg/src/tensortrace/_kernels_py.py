"""Pure numpy implementation of the kernels in ``_kernels.pyx``.

Same signatures, same lexicographic point order, same left-to-right
accumulation (``np.cumsum`` is strictly sequential), so results agree with
the compiled kernels bit for bit on rational arithmetic and to within libm
rounding on exp/log/pow.
"""

import numpy as np

from .expr import (OP_ADD, OP_CONST, OP_DIV, OP_EXP, OP_MUL, OP_NEG, OP_POWI, OP_POWR, OP_SUB,
                   OP_VAR, powi)


def _points(eigs, start, count):
    m, n = eigs.shape
    flat = np.arange(start, start + count, dtype=np.int64)
    idx = np.unravel_index(flat, (n,) * m) if m else ()
    return [eigs[l][idx[l]] for l in range(m)]


def _run(ops, iargs, fargs, lo, hi, cols, size):
    """Evaluate ops[lo:hi] over column vectors; returns (values, bad_mask)."""
    stack = []
    bad = np.zeros(size, dtype=bool)
    with np.errstate(all="ignore"):
        for p in range(lo, hi):
            op = ops[p]
            if op == OP_CONST:
                stack.append(np.full(size, fargs[p]))
                continue
            if op == OP_VAR:
                stack.append(cols[iargs[p]])
                continue
            if op <= OP_DIV:
                b = stack.pop()
                a = stack.pop()
                if op == OP_ADD:
                    r = a + b
                elif op == OP_SUB:
                    r = a - b
                elif op == OP_MUL:
                    r = a * b
                else:
                    bad |= b == 0.0
                    r = a / b
            else:
                a = stack.pop()
                if op == OP_NEG:
                    r = -a
                elif op == OP_POWI:
                    e = int(iargs[p])
                    if e < 0:
                        bad |= a == 0.0
                    r = powi(a, e)
                elif op == OP_POWR:
                    e = fargs[p]
                    bad |= (a < 0.0) | ((a == 0.0) & (e < 0.0))
                    r = np.power(a, e)
                elif op == OP_EXP:
                    r = np.exp(a)
                else:
                    bad |= a <= 0.0
                    r = np.log(a)
            bad |= ~np.isfinite(r)
            stack.append(r)
    return stack[0], bad


def _first(bad, offset=0):
    hits = np.flatnonzero(bad)
    return int(hits[0]) + offset if hits.size else -1


def grid_values(ops, iargs, fargs, stack_size, eigs, start, out):
    count = out.shape[0]
    if count == 0:
        return -1
    cols = _points(eigs, start, count)
    values, bad = _run(ops, iargs, fargs, 0, len(ops), cols, count)
    first = _first(bad)
    stop = count if first < 0 else first
    out[:stop] = values[:stop]
    return -1 if first < 0 else start + first


def grid_sum(ops, iargs, fargs, stack_size, eigs):
    m, n = eigs.shape
    total_points = n ** m if n else 0
    if total_points == 0:
        return 0.0, -1
    cols = _points(eigs, 0, total_points)
    values, bad = _run(ops, iargs, fargs, 0, len(ops), cols, total_points)
    first = _first(bad)
    if first >= 0:
        return float(np.cumsum(values[:first])[-1]) if first else 0.0, first
    return float(np.cumsum(values)[-1]), -1


def marginal_weights(ops, iargs, fargs, offsets, stack_size, eigs):
    m, n = eigs.shape
    total_points = n ** m if n else 0
    c = np.zeros((m, n))
    if total_points == 0:
        return c, -1, -1
    cols = _points(eigs, 0, total_points)
    first_bad = (-1, -1)
    per_k = []
    for k in range(m):
        lo, hi = int(offsets[k]), int(offsets[k + 1])
        if lo == hi:
            per_k.append(None)
            continue
        values, bad = _run(ops, iargs, fargs, lo, hi, cols, total_points)
        first = _first(bad)
        if first >= 0 and (first_bad[1] < 0 or first < first_bad[1]):
            first_bad = (k, first)
        per_k.append(values)
    if first_bad[0] >= 0:
        return c, first_bad[0], first_bad[1]
    for k, values in enumerate(per_k):
        if values is None:
            continue
        grid = np.moveaxis(values.reshape((n,) * m), k, 0).reshape(n, -1)
        c[k] = np.cumsum(grid, axis=1)[:, -1]
    return c, -1, -1
