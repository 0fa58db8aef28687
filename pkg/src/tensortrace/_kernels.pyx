# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for the eigenvalue multi-sums.

Points are visited in lexicographic multi-index order (j_1 slowest) and
processed in blocks: each opcode runs over a whole block before the next,
which keeps the inner loops branch-light.  Accumulation is still strictly
left to right in point order, so results are bitwise reproducible for a
fixed input.  A point is "bad" when any intermediate is undefined (zero
divisor, log of a nonpositive value, real power of a negative base) or
nonfinite; kernels stop at the first bad point and report its flat index.
"""

from libc.math cimport exp, log, pow, isfinite
from libc.stdlib cimport malloc, free

import numpy as np

DEF BLOCK = 256

cdef enum:
    OP_CONST = 0
    OP_VAR = 1
    OP_ADD = 2
    OP_SUB = 3
    OP_MUL = 4
    OP_DIV = 5
    OP_NEG = 6
    OP_POWI = 7
    OP_POWR = 8
    OP_EXP = 9
    OP_LOG = 10


DEF POWI_UNROLL = 8


cdef inline double _powi(double a, long long p) noexcept nogil:
    # binary powering for |p| <= POWI_UNROLL, mirrored by expr.powi
    cdef long long e = p if p >= 0 else -p
    cdef double result = 1.0, base = a
    cdef bint first = 1
    if e > POWI_UNROLL:
        return pow(a, <double>p)
    if e == 0:
        return a * 0.0 + 1.0
    while e:
        if e & 1:
            if first:
                result = base
                first = 0
            else:
                result = result * base
        e >>= 1
        if e:
            base = base * base
    return 1.0 / result if p < 0 else result


cdef struct Work:
    double* stack      # stack_size rows of BLOCK
    double* cols       # m rows of BLOCK: coordinates of the block's points
    Py_ssize_t* idx    # m rows of BLOCK: multi-index of the block's points
    char* bad          # BLOCK flags
    Py_ssize_t* cur    # odometer, m entries


cdef int _alloc(Work* w, Py_ssize_t stack_size, Py_ssize_t m) noexcept:
    if stack_size < 1:
        stack_size = 1
    if m < 1:
        m = 1
    w.stack = <double*>malloc(stack_size * BLOCK * sizeof(double))
    w.cols = <double*>malloc(m * BLOCK * sizeof(double))
    w.idx = <Py_ssize_t*>malloc(m * BLOCK * sizeof(Py_ssize_t))
    w.bad = <char*>malloc(BLOCK * sizeof(char))
    w.cur = <Py_ssize_t*>malloc(m * sizeof(Py_ssize_t))
    return w.stack != NULL and w.cols != NULL and w.idx != NULL and w.bad != NULL and w.cur != NULL


cdef void _release(Work* w) noexcept:
    free(w.stack)
    free(w.cols)
    free(w.idx)
    free(w.bad)
    free(w.cur)


cdef inline void _decode(Py_ssize_t flat, Py_ssize_t m, Py_ssize_t n, Py_ssize_t* cur) noexcept nogil:
    cdef Py_ssize_t l
    for l in range(m - 1, -1, -1):
        cur[l] = flat % n
        flat = flat // n


cdef void _fill(Work* w, Py_ssize_t m, Py_ssize_t n, const double* eigs, Py_ssize_t count) noexcept nogil:
    # write coordinates of the next ``count`` points and advance the odometer
    cdef Py_ssize_t i, l
    for i in range(count):
        for l in range(m):
            w.idx[l * BLOCK + i] = w.cur[l]
            w.cols[l * BLOCK + i] = eigs[l * n + w.cur[l]]
        l = m - 1
        while l >= 0:
            w.cur[l] += 1
            if w.cur[l] < n:
                break
            w.cur[l] = 0
            l -= 1


cdef Py_ssize_t _run(const int* ops, const long long* ia, const double* fa, Py_ssize_t lo, Py_ssize_t hi,
                     Work* w, Py_ssize_t count) noexcept nogil:
    """Evaluate ops[lo:hi] on the block; result in stack row 0.  Returns first bad offset or -1."""
    cdef Py_ssize_t p, i, sp = 0
    cdef int op
    cdef double e
    cdef double* a
    cdef double* b
    cdef char* bad = w.bad
    for i in range(count):
        bad[i] = 0
    for p in range(lo, hi):
        op = ops[p]
        if op == OP_CONST:
            a = w.stack + sp * BLOCK
            for i in range(count):
                a[i] = fa[p]
            sp += 1
            continue
        if op == OP_VAR:
            a = w.stack + sp * BLOCK
            b = w.cols + ia[p] * BLOCK
            for i in range(count):
                a[i] = b[i]
            sp += 1
            continue
        if op <= OP_DIV:
            a = w.stack + (sp - 2) * BLOCK
            b = w.stack + (sp - 1) * BLOCK
            sp -= 1
            if op == OP_ADD:
                for i in range(count):
                    a[i] = a[i] + b[i]
            elif op == OP_SUB:
                for i in range(count):
                    a[i] = a[i] - b[i]
            elif op == OP_MUL:
                for i in range(count):
                    a[i] = a[i] * b[i]
            else:
                for i in range(count):
                    bad[i] |= b[i] == 0.0
                    a[i] = a[i] / b[i]
        else:
            a = w.stack + (sp - 1) * BLOCK
            if op == OP_NEG:
                for i in range(count):
                    a[i] = -a[i]
            elif op == OP_POWI:
                if ia[p] < 0:
                    for i in range(count):
                        bad[i] |= a[i] == 0.0
                for i in range(count):
                    a[i] = _powi(a[i], ia[p])
            elif op == OP_POWR:
                e = fa[p]
                for i in range(count):
                    bad[i] |= (a[i] < 0.0) or (a[i] == 0.0 and e < 0.0)
                    a[i] = pow(a[i], e)
            elif op == OP_EXP:
                for i in range(count):
                    a[i] = exp(a[i])
            else:
                for i in range(count):
                    bad[i] |= a[i] <= 0.0
                    a[i] = log(a[i])
        for i in range(count):
            bad[i] |= not isfinite(a[i])
    for i in range(count):
        if bad[i]:
            return i
    return -1


def grid_sum(const int[::1] ops, const long long[::1] iargs, const double[::1] fargs,
             int stack_size, const double[:, ::1] eigs):
    """Sequential sum of f over all multi-indices; returns (total, first_bad_index or -1)."""
    cdef Py_ssize_t m = eigs.shape[0], n = eigs.shape[1]
    cdef Py_ssize_t total_points = n ** m if n > 0 else 0
    cdef Py_ssize_t length = ops.shape[0], start = 0, count, i, hit
    cdef double total = 0.0
    cdef Py_ssize_t bad = -1
    cdef Work w
    if not _alloc(&w, stack_size, m):
        _release(&w)
        raise MemoryError()
    try:
        with nogil:
            _decode(0, m, n, w.cur)
            while start < total_points:
                count = min(<Py_ssize_t>BLOCK, total_points - start)
                _fill(&w, m, n, &eigs[0, 0], count)
                hit = _run(&ops[0], &iargs[0], &fargs[0], 0, length, &w, count)
                if hit >= 0:
                    count = hit
                    bad = start + hit
                for i in range(count):
                    total = total + w.stack[i]
                if bad >= 0:
                    break
                start += count
    finally:
        _release(&w)
    return total, bad


def grid_values(const int[::1] ops, const long long[::1] iargs, const double[::1] fargs,
                int stack_size, const double[:, ::1] eigs, Py_ssize_t start, double[::1] out):
    """Fill ``out`` with f at flat indices start .. start+len(out); returns first bad flat index or -1."""
    cdef Py_ssize_t m = eigs.shape[0], n = eigs.shape[1]
    cdef Py_ssize_t total = out.shape[0], length = ops.shape[0], done = 0, count, i, hit
    cdef Py_ssize_t bad = -1
    cdef Work w
    if total == 0:
        return -1
    if not _alloc(&w, stack_size, m):
        _release(&w)
        raise MemoryError()
    try:
        with nogil:
            _decode(start, m, n, w.cur)
            while done < total:
                count = min(<Py_ssize_t>BLOCK, total - done)
                _fill(&w, m, n, &eigs[0, 0], count)
                hit = _run(&ops[0], &iargs[0], &fargs[0], 0, length, &w, count)
                if hit >= 0:
                    count = hit
                    bad = start + done + hit
                for i in range(count):
                    out[done + i] = w.stack[i]
                if bad >= 0:
                    break
                done += count
    finally:
        _release(&w)
    return bad


def marginal_weights(const int[::1] ops, const long long[::1] iargs, const double[::1] fargs,
                     const long long[::1] offsets, int stack_size, const double[:, ::1] eigs):
    """Per-slot sums c[k, j] = sum over multi-indices with j_k = j of program k.

    ``offsets`` has m + 1 entries delimiting the m concatenated programs.
    Returns (c, bad_k, bad_index); bad_k is -1 when every point is defined.
    The earliest bad point wins; ties go to the lowest k.
    """
    cdef Py_ssize_t m = eigs.shape[0], n = eigs.shape[1]
    cdef Py_ssize_t total_points = n ** m if n > 0 else 0
    cdef Py_ssize_t start = 0, count, i, k, hit
    cdef Py_ssize_t bad_k = -1, bad = -1
    cdef Py_ssize_t* row
    c_arr = np.zeros((m, n), dtype=np.float64)
    cdef double[:, ::1] c = c_arr
    cdef Work w
    if not _alloc(&w, stack_size, m):
        _release(&w)
        raise MemoryError()
    try:
        with nogil:
            _decode(0, m, n, w.cur)
            while start < total_points and bad_k < 0:
                count = min(<Py_ssize_t>BLOCK, total_points - start)
                _fill(&w, m, n, &eigs[0, 0], count)
                for k in range(m):
                    if offsets[k] == offsets[k + 1]:
                        continue
                    hit = _run(&ops[0], &iargs[0], &fargs[0], offsets[k], offsets[k + 1], &w, count)
                    if hit >= 0:
                        # c is discarded by callers once a bad point is reported
                        if bad < 0 or start + hit < bad:
                            bad_k = k
                            bad = start + hit
                        continue
                    row = w.idx + k * BLOCK
                    for i in range(count):
                        c[k, row[i]] = c[k, row[i]] + w.stack[i]
                start += count
    finally:
        _release(&w)
    return c_arr, bad_k, bad
