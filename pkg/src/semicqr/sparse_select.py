"""One-step sparse semi-CQR / semi-QR / semi-LS estimators with BIC tuning.

Each estimator minimizes the stage-2 loss plus a weighted L1 penalty whose
weights are SCAD derivatives at an unpenalized pilot ``beta0``:

    CQR: sum_k sum_i rho_{tau_k}(r_ik - z_i' b) + n q sum_j p'_lam(|beta0_j|) |b_j|
    QR:  sum_i rho_tau(r_i - z_i' b)            + n   sum_j p'_lam(|beta0_j|) |b_j|
    LS:  (1/2) sum_i (r_i - z_i' b)^2           + n   sum_j p'_lam(|beta0_j|) |b_j|

where ``r`` are the stage-1 partial residuals. The check-loss versions are
solved as one linear program, so unselected coefficients are exact zeros;
the LS version uses coordinate descent with soft thresholding, which also
produces exact zeros.

The tuning parameter minimizes

    BIC(lam) = log(loss(lam)) + log(n) / n * df(lam)

with the loss evaluated on the same stage-1 curves used inside the
penalized objective.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._composite import map_points, partial_residuals, stage2_problem
from .lp_core import Status, check_loss, solve
from .model import CurveSet, Dataset, QuantileGrid

__all__ = [
    "PenaltySpec",
    "PathPoint",
    "SelectionResult",
    "scad_derivative",
    "penalty_weights",
    "one_step_sparse_cqr",
    "one_step_sparse_qr",
    "one_step_sparse_ls",
    "default_lambda_grid",
    "bic_select",
]

SCAD_A = 3.7
LOSS_FLOOR = 1e-12


@dataclass(frozen=True)
class PenaltySpec:
    lam: float
    a: float = SCAD_A
    kind: str = "SCAD"

    def __post_init__(self):
        if self.kind.upper() != "SCAD":
            raise ValueError("only the SCAD penalty is supported")
        if not self.a > 2:
            raise ValueError("SCAD concavity parameter a must exceed 2")
        if not self.lam >= 0:
            raise ValueError("lambda must be nonnegative")


@dataclass(frozen=True)
class PathPoint:
    lam: float
    beta: np.ndarray
    df: int
    loss: float
    bic: float
    loss_clamped: bool
    status: Status


@dataclass(frozen=True)
class SelectionResult:
    beta: np.ndarray
    selected: tuple
    df: int
    bic: float
    lam: float
    loss: float
    status: Status = Status.OPTIMAL
    loss_clamped: bool = False
    path: list = field(default_factory=list)

    def __post_init__(self):
        if self.df != len(self.selected):
            raise ValueError("df must equal the number of selected coefficients")


def scad_derivative(b, lam: float, a: float = SCAD_A):
    """SCAD derivative ``p'_lam(b)`` for ``b >= 0``.

    ``lam`` for ``b <= lam``; ``(a lam - b)_+ / (a - 1)`` beyond.
    """
    if not a > 2:
        raise ValueError("a must exceed 2")
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    b = np.asarray(b, dtype=float)
    if np.any(b < 0):
        raise ValueError("scad_derivative expects magnitudes b >= 0")
    out = np.where(b <= lam, lam, np.maximum(a * lam - b, 0.0) / (a - 1.0))
    return float(out) if out.ndim == 0 else out


def penalty_weights(beta0, lam: float, factor: float, a: float = SCAD_A) -> np.ndarray:
    return factor * np.atleast_1d(scad_derivative(np.abs(np.asarray(beta0, dtype=float)), lam, a))


def _bic(loss: float, df: int, n: int):
    clamped = loss < LOSS_FLOOR
    return float(np.log(max(loss, LOSS_FLOOR)) + np.log(n) / n * df), clamped


def _result(data, lam, beta, loss, status):
    beta = np.asarray(beta, dtype=float)
    selected = tuple(int(j) for j in np.flatnonzero(beta != 0.0))
    bic, clamped = _bic(loss, len(selected), data.n)
    return SelectionResult(beta, selected, len(selected), bic, float(lam), float(loss),
                           status, clamped)


def _one_step_check(data, curves, beta0, taus, lam, a):
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    if data.d2 == 0:
        return _result(data, lam, np.zeros(0), float(check_loss(
            partial_residuals(data, curves).ravel(), np.repeat(taus, data.n)).sum()),
            Status.OPTIMAL)
    pen = penalty_weights(beta0, lam, data.n * len(taus), a)
    prob = stage2_problem(data, curves, taus, penalty=pen)
    sol = solve(prob)
    beta = sol.coefficients
    loss = float(check_loss(prob.y - prob.X @ beta, prob.tau).sum())
    return _result(data, lam, beta, loss, sol.status)


def one_step_sparse_cqr(data: Dataset, stage1_curves: CurveSet, beta0, qgrid,
                        lam: float, a: float = SCAD_A) -> SelectionResult:
    """One-step sparse semi-CQR at a single ``lam``."""
    g = qgrid if isinstance(qgrid, QuantileGrid) else QuantileGrid(int(qgrid))
    return _one_step_check(data, stage1_curves, beta0, g.taus, lam, a)


def one_step_sparse_qr(data: Dataset, stage1_curves: CurveSet, beta0, tau: float,
                       lam: float, a: float = SCAD_A) -> SelectionResult:
    """One-step sparse semi-QR at level ``tau`` (penalty factor ``n``)."""
    return _one_step_check(data, stage1_curves, beta0, [tau], lam, a)


def _weighted_lasso_cd(Z, r, w, tol=1e-12, max_sweeps=10_000):
    """Coordinate descent for ``(1/2)||r - Z b||^2 + sum_j w_j |b_j|``."""
    p = Z.shape[1]
    col_sq = np.einsum("ij,ij->j", Z, Z)
    b = np.zeros(p)
    resid = r.copy()
    scale = 1.0 + float(np.max(np.abs(r))) if len(r) else 1.0
    for sweep in range(1, max_sweeps + 1):
        max_change = 0.0
        for j in range(p):
            if col_sq[j] == 0.0:
                continue
            old = b[j]
            rho = Z[:, j] @ resid + col_sq[j] * old
            new = np.sign(rho) * max(abs(rho) - w[j], 0.0) / col_sq[j]
            if new != old:
                resid -= Z[:, j] * (new - old)
                b[j] = new
                max_change = max(max_change, abs(new - old))
        if max_change <= tol * scale:
            return b, Status.OPTIMAL, sweep
    return b, Status.MAX_ITERATIONS, max_sweeps


def one_step_sparse_ls(data: Dataset, curves: CurveSet, beta0, lam: float,
                       a: float = SCAD_A) -> SelectionResult:
    """One-step sparse semi-LS at a single ``lam`` (squared loss, factor ``n``)."""
    r = partial_residuals(data, curves)[0]
    if data.d2 == 0:
        return _result(data, lam, np.zeros(0), float(r @ r), Status.OPTIMAL)
    w = penalty_weights(beta0, lam, data.n, a)
    beta, status, _ = _weighted_lasso_cd(data.z, r, w)
    e = r - data.z @ beta
    return _result(data, lam, beta, float(e @ e), status)


def _method_taus(method, qgrid, tau):
    method = method.upper()
    if method == "CQR":
        g = qgrid if isinstance(qgrid, QuantileGrid) else QuantileGrid(int(qgrid))
        return method, g.taus
    if method == "QR":
        return method, np.array([float(tau)])
    if method == "LS":
        return method, None
    raise ValueError(f"unknown method {method!r}; expected CQR, QR or LS")


def default_lambda_grid(data: Dataset, curves: CurveSet, beta0, qgrid=9, method="CQR",
                        tau=0.5, n_lambda: int = 50, ratio: float = 1e-3) -> np.ndarray:
    """Log-spaced grid from ``lam_max`` down to ``ratio * lam_max``.

    ``lam_max`` is the smallest level at which every penalty weight equals
    ``factor * lam`` and dominates the loss slope at ``b = 0``, so the whole
    parametric part is zero there.
    """
    method, taus = _method_taus(method, qgrid, tau)
    beta0 = np.abs(np.asarray(beta0, dtype=float))
    if data.d2 == 0:
        return np.array([0.0])
    absz = np.abs(data.z).sum(axis=0)
    if method == "LS":
        r = partial_residuals(data, curves)[0]
        slope = np.abs(data.z.T @ r) / data.n
    else:
        slope = absz * np.maximum(taus, 1 - taus).sum() / (data.n * len(taus))
    lam_max = max(float(beta0.max()), float(slope.max()), 1e-12)
    # nudge above the bound so the top of the grid is strictly all-zero
    lam_max *= 1.0 + 1e-9
    return np.geomspace(lam_max, lam_max * ratio, n_lambda)


def _fit_one(data, curves, beta0, method, taus, lam, a):
    if method == "LS":
        return one_step_sparse_ls(data, curves, beta0, lam, a)
    return _one_step_check(data, curves, beta0, taus, lam, a)


def bic_select(data: Dataset, curves: CurveSet, beta0, qgrid=9, lambda_grid=None,
               method: str = "CQR", tau: float = 0.5, a: float = SCAD_A,
               n_jobs: int | None = None) -> SelectionResult:
    """Evaluate the one-step estimator over ``lambda_grid`` and keep the BIC minimizer.

    ``curves`` are the stage-1 curves (observation mode) and ``beta0`` the
    unpenalized estimate from the same fit. Ties go to the larger lambda.
    """
    method, taus = _method_taus(method, qgrid, tau)
    if lambda_grid is None:
        lambda_grid = default_lambda_grid(data, curves, beta0, qgrid, method, tau)
    lams = np.asarray(lambda_grid, dtype=float).ravel()
    if lams.size == 0:
        raise ValueError("lambda grid must be nonempty")
    if np.any(lams < 0) or not np.all(np.isfinite(lams)):
        raise ValueError("lambda values must be finite and nonnegative")
    lams = np.sort(lams)[::-1]     # largest first
    fits = map_points(lambda lam: _fit_one(data, curves, beta0, method, taus, lam, a),
                      lams, n_jobs)
    path = [PathPoint(f.lam, f.beta, f.df, f.loss, f.bic, f.loss_clamped, f.status)
            for f in fits]
    bics = np.array([f.bic for f in fits])
    best_val = bics.min()
    # first index among (near-)ties is the largest lambda
    best = int(np.flatnonzero(bics <= best_val + 1e-12 * (1 + abs(best_val)))[0])
    f = fits[best]
    return SelectionResult(f.beta, f.selected, f.df, f.bic, f.lam, f.loss, f.status,
                           f.loss_clamped, path)
