"""Backend selection for the eigenvalue multi-sum kernels.

The compiled extension ``_kernels`` is used when it imports; otherwise the
numpy implementation in ``_kernels_py``.  Set ``TENSORTRACE_BACKEND`` to
``python`` or ``compiled`` to force one (``compiled`` raises ImportError if
the extension is missing).
"""

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # pragma: no cover - depends on the build
    _compiled = None

BACKENDS = {"python": _kernels_py}
if _compiled is not None:
    BACKENDS["compiled"] = _compiled


def _select():
    choice = os.environ.get("TENSORTRACE_BACKEND", "auto").strip().lower()
    if choice in ("", "auto"):
        return "compiled" if _compiled is not None else "python"
    if choice not in ("python", "compiled"):
        raise ImportError(f"unknown TENSORTRACE_BACKEND {choice!r}")
    if choice == "compiled" and _compiled is None:
        raise ImportError("TENSORTRACE_BACKEND=compiled but the extension is not built")
    return choice


BACKEND = _select()


def get_backend(name=None):
    """Return the kernel module for ``name`` (default: the active backend)."""
    return BACKENDS[name or BACKEND]


def _eig_matrix(eigs):
    return np.ascontiguousarray(np.asarray(eigs, dtype=np.float64).reshape(len(eigs), -1))


def grid_values(program, eigs, threads=1, backend=None):
    """Values of a program at every multi-index in lexicographic order; returns (values, first_bad)."""
    impl = get_backend(backend)
    eigs = _eig_matrix(eigs)
    m, n = eigs.shape
    total = n ** m if n else 0
    out = np.empty(total)
    args = (program.ops, program.iargs, program.fargs, program.stack_size, eigs)
    threads = max(1, int(threads))
    if threads == 1 or total < 4096:
        return out, impl.grid_values(*args, 0, out)
    bounds = np.linspace(0, total, threads + 1).astype(np.int64)
    chunks = [(int(a), out[a:b]) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        results = list(pool.map(lambda ch: impl.grid_values(*args, ch[0], ch[1]), chunks))
    bad = next((b for b in results if b >= 0), -1)
    return out, bad


def trace_sum(program, eigs, summation="sequential", threads=1, backend=None):
    """Sum of a program over all multi-indices; returns (total, first_bad).

    ``summation="sequential"`` adds left to right in lexicographic order and
    is the reproducible default; ``"pairwise"`` uses numpy's pairwise
    reduction, which has a smaller error bound on very long sums.
    """
    if summation not in ("sequential", "pairwise"):
        raise ValueError(f"unknown summation mode {summation!r}")
    impl = get_backend(backend)
    eigs = _eig_matrix(eigs)
    if summation == "sequential" and threads <= 1:
        total, bad = impl.grid_sum(program.ops, program.iargs, program.fargs, program.stack_size, eigs)
        return float(total), int(bad)
    values, bad = grid_values(program, eigs, threads, backend)
    if bad >= 0:
        return float("nan"), bad
    if values.size == 0:
        return 0.0, -1
    if summation == "pairwise":
        return float(np.sum(values)), -1
    return float(np.cumsum(values)[-1]), -1


def _pack(programs):
    ops, iargs, fargs, offsets = [], [], [], [0]
    stack = 1
    for prog in programs:
        if prog is not None:
            ops.append(prog.ops)
            iargs.append(prog.iargs)
            fargs.append(prog.fargs)
            stack = max(stack, prog.stack_size)
        offsets.append(offsets[-1] + (0 if prog is None else len(prog.ops)))
    cat = lambda parts, dtype: np.ascontiguousarray(np.concatenate(parts) if parts else np.zeros(0), dtype=dtype)
    return (cat(ops, np.int32), cat(iargs, np.int64), cat(fargs, np.float64),
            np.asarray(offsets, dtype=np.int64), stack)


def marginal_weights(programs, eigs, threads=1, backend=None):
    """c[k, j] = sum over multi-indices with j_k = j of program k; returns (c, bad_k, bad_index).

    ``programs[k]`` may be None for a partial that is identically zero.
    """
    impl = get_backend(backend)
    eigs = _eig_matrix(eigs)
    m, n = eigs.shape
    if threads <= 1:
        ops, iargs, fargs, offsets, stack = _pack(programs)
        if len(ops) == 0:
            return np.zeros((m, n)), -1, -1
        c, bad_k, bad = impl.marginal_weights(ops, iargs, fargs, offsets, stack, eigs)
        return np.asarray(c), int(bad_k), int(bad)
    c = np.zeros((m, n))
    first = (-1, -1)
    for k, prog in enumerate(programs):
        if prog is None:
            continue
        values, bad = grid_values(prog, eigs, threads, backend)
        if bad >= 0:
            if first[1] < 0 or bad < first[1]:
                first = (k, bad)
            continue
        grid = np.moveaxis(values.reshape((n,) * m), k, 0).reshape(n, -1)
        c[k] = np.cumsum(grid, axis=1)[:, -1]
    if first[0] >= 0:
        return np.zeros((m, n)), first[0], first[1]
    return c, -1, -1
