"""Arnoldi-enhanced tangent-space Hermite interpolation on SO(3) and S^2."""

from .garnoldi import (
    BreakdownError,
    GArnoldiModel,
    SelectionSpec,
    XOperator,
    apply_x_operator,
    evaluate_basis,
    fit,
    predict,
    solve_coefficients,
)
from .manifolds import (
    KarcherConvergenceError,
    LogDomainError,
    dexp_mathias,
    geodesic_distance,
    karcher_mean,
    matrix_exp,
    so3_expmap,
    so3_logmap,
    sphere_exp,
    sphere_log,
    transport_derivative,
)
from .polybasis import DerivativeOrder, MonomialBasis, enumerate_basis, parent_of
from .thi import ManifoldSample, ThiModel, error_report, load_model, save_model, thi_eval, thi_fit

__version__ = "0.1.0"

__all__ = [
    "BreakdownError", "GArnoldiModel", "SelectionSpec", "XOperator", "apply_x_operator",
    "evaluate_basis", "fit", "predict", "solve_coefficients",
    "KarcherConvergenceError", "LogDomainError", "dexp_mathias", "geodesic_distance",
    "karcher_mean", "matrix_exp", "so3_expmap", "so3_logmap", "sphere_exp", "sphere_log",
    "transport_derivative",
    "DerivativeOrder", "MonomialBasis", "enumerate_basis", "parent_of",
    "ManifoldSample", "ThiModel", "error_report", "load_model", "save_model", "thi_eval", "thi_fit",
]
