"""Trace functionals of multivariable matrix functions.

A scalar function f of m variables extends to m-tuples of symmetric
matrices through the Kronecker product of their eigenbases.  This package
evaluates that extension densely (as a reference), its trace as a sum over
eigenvalue combinations, and the trace's derivative along matrix paths.
It applies them to spectral objectives of weighted graph Laplacians,
optimizes edge weights, and checks monotonicity and convexity properties
on random instances.
"""

from .errors import (CapExceededError, DomainError, EigenError, FormatError, InfeasibleError, ParseError,
                     PreconditionError, TensorTraceError)
from .expr import Interval, ScalarFunction, evaluate, parse_domain, parse_expr, partial
from .graph import (SpectralObjective, WeightedGraph, edge_basis, laplacian, objective_and_gradient, parse_graph,
                    read_graph, spectral_gradient, spectral_objective)
from .kernels import BACKEND
from .linalg import Ordering, Spectrum, eig_sym, eig_vals_sym, kron, matfun_single, psd_order, read_matrix
from .optimize import ConstraintSet, MinimizeOptions, OptimizationResult, maximize, minimize, project
from .tensor import (matfun_multi_dense, trace_matfun_derivative, trace_matfun_derivative_dense, trace_matfun_diag,
                     trace_matfun_multi)
from .verify import PropertyReport

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "CapExceededError", "ConstraintSet", "DomainError", "EigenError", "FormatError", "InfeasibleError",
    "Interval", "MinimizeOptions", "OptimizationResult", "Ordering", "ParseError", "PreconditionError",
    "PropertyReport", "ScalarFunction", "SpectralObjective", "Spectrum", "TensorTraceError", "WeightedGraph",
    "edge_basis", "eig_sym", "eig_vals_sym", "evaluate", "kron", "laplacian", "matfun_multi_dense", "matfun_single",
    "maximize", "minimize", "objective_and_gradient", "parse_domain", "parse_expr", "parse_graph", "partial",
    "project", "psd_order", "read_graph", "read_matrix", "spectral_gradient", "spectral_objective",
    "trace_matfun_derivative", "trace_matfun_derivative_dense", "trace_matfun_diag", "trace_matfun_multi",
]
