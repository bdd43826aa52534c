"""Quantile and composite quantile regression for varying-coefficient
partially linear models.

The model is ``y = alpha0(u) + x' alpha(u) + z' beta + eps``. Estimators run
in three stages: local linear fits at every observation, a global fit of
beta on partial residuals, and a local refit of the curves given beta.
"""
from .efficiency import (ErrorDist, EfficiencyReport, are_report, bandwidth_cqr, bandwidth_qr,
                         get_distribution, r1, r2, tau_cov)
from .exceptions import (DatasetError, DegenerateDensityError, ExtrapolationError, InputError,
                         InsufficientLocalDataError, InvalidBandwidthError, InvalidProblemError,
                         OracleTooLargeError, SemiCQRError)
from .kernels import (EPANECHNIKOV, TRIANGULAR, UNIFORM, KernelSpec, kernel_moments,
                      kernel_weight, local_weights)
from .lp_core import (PinballProblem, PinballRow, PinballSolution, Status, brute_force_oracle,
                      check_loss, solve)
from .model import CurveSet, Dataset, QuantileGrid, SemiFit, default_grid, evaluate_curveset
from .semi_cqr import fit_semi_cqr
from .semi_ls import fit_semi_ls
from .semi_qr import fit_semi_qr
from .sparse_select import (PenaltySpec, SelectionResult, bic_select, one_step_sparse_cqr,
                            one_step_sparse_ls, one_step_sparse_qr, scad_derivative)

__version__ = "0.1.0"

__all__ = [
    "Dataset", "QuantileGrid", "CurveSet", "SemiFit", "evaluate_curveset", "default_grid",
    "KernelSpec", "EPANECHNIKOV", "UNIFORM", "TRIANGULAR", "kernel_weight", "local_weights",
    "kernel_moments",
    "PinballRow", "PinballProblem", "PinballSolution", "Status", "check_loss", "solve",
    "brute_force_oracle",
    "fit_semi_qr", "fit_semi_cqr", "fit_semi_ls",
    "PenaltySpec", "SelectionResult", "scad_derivative", "one_step_sparse_cqr",
    "one_step_sparse_qr", "one_step_sparse_ls", "bic_select",
    "ErrorDist", "EfficiencyReport", "get_distribution", "tau_cov", "r1", "r2",
    "bandwidth_cqr", "bandwidth_qr", "are_report",
    "SemiCQRError", "DatasetError", "ExtrapolationError", "InvalidBandwidthError",
    "InsufficientLocalDataError", "InvalidProblemError", "OracleTooLargeError",
    "DegenerateDensityError", "InputError",
]
