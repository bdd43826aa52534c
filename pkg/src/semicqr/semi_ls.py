"""Least-squares three-stage baseline (semi-LS).

Stage 1 is a local linear weighted least-squares fit at each observation
point, stage 2 an ordinary least-squares regression of the partial residuals
on z, and stage 3 a local linear refit of ``y - z' beta`` on the grid. This
is the three-stage analogue used as the comparator for every efficiency
ratio; it is not Fan and Huang's profile least squares.
"""
from __future__ import annotations

import numpy as np

from ._composite import LocalFit, map_points, partial_residuals
from .exceptions import InsufficientLocalDataError
from .kernels import EPANECHNIKOV, get_kernel, local_weights
from .lp_core import Status
from .model import CurveSet, Dataset, SemiFit, default_grid
from .semi_qr import undersmoothed_bandwidth

__all__ = ["local_ls", "stage1_curves_ls", "stage2_ls", "stage3_ls", "fit_semi_ls"]


def _lstsq(A, b):
    """Least squares via a QR factorization; raises when A is rank deficient."""
    if A.shape[1] == 0:
        return np.zeros(0)
    if A.shape[0] < A.shape[1]:
        raise InsufficientLocalDataError("fewer observations than coefficients")
    Q, R = np.linalg.qr(A)
    d = np.abs(np.diag(R))
    if d.min() <= 1e-10 * max(d.max(), 1e-300):
        raise InsufficientLocalDataError("singular normal equations")
    return np.linalg.solve(R, Q.T @ b)


def local_ls(data: Dataset, u0: float, h: float, kernel=EPANECHNIKOV,
             response=None, with_z=True) -> LocalFit:
    """Weighted least-squares local linear fit at ``u0``.

    Design ``[1, (u - u0), x, x (u - u0), z]``. The baseline slope column
    exists only when the model has a baseline function; the intercept is
    always kept, as in the quantile designs, so that the three estimators
    treat the error location the same way.
    """
    kernel = get_kernel(kernel)
    base = 2 if data.include_baseline else 1
    d1, d2 = data.d1, (data.d2 if with_z else 0)
    ncol = base + 2 * d1 + d2
    w = local_weights(kernel, data.u, u0, h, min_count=ncol)
    idx = np.flatnonzero(w)
    du = data.u[idx] - u0
    x = data.x[idx]
    cols = [np.ones((len(idx), 1))]
    if base == 2:
        cols.append(du[:, None])
    if d1:
        cols += [x, x * du[:, None]]
    if d2:
        cols.append(data.z[idx])
    y = (data.y if response is None else np.asarray(response, dtype=float))[idx]
    D = np.hstack(cols)
    sw = np.sqrt(w[idx])
    c = _lstsq(D * sw[:, None], y * sw)
    resid = y - D @ c
    a0 = np.array([c[0]])
    b0 = float(c[1]) if base == 2 else 0.0
    j = base
    return LocalFit(float(u0), a0, b0, c[j:j + d1], c[j + d1:j + 2 * d1],
                    c[j + 2 * d1:j + 2 * d1 + d2], float(np.dot(w[idx], resid * resid)),
                    Status.OPTIMAL)


def stage1_curves_ls(data: Dataset, h: float, kernel=EPANECHNIKOV, n_jobs=None):
    """Returns ``(curves, local_betas, objective)``; curves in observation mode."""
    fits = map_points(lambda u0: local_ls(data, u0, h, kernel), data.u, n_jobs)
    curves = CurveSet(data.u, np.column_stack([f.a0 for f in fits]),
                      np.column_stack([f.a for f in fits]) if data.d1 else np.zeros((0, data.n)),
                      mode="observations")
    betas = np.vstack([f.beta for f in fits]) if data.d2 else np.zeros((data.n, 0))
    return curves, betas, sum(f.objective for f in fits)


def stage2_ls(data: Dataset, curves: CurveSet):
    """OLS of ``y - a0(U) - x' a(U)`` on z; returns ``(beta, rss)``."""
    r = partial_residuals(data, curves)[0]
    if data.d2 == 0:
        return np.zeros(0), float(r @ r)
    beta = _lstsq(data.z, r)
    e = r - data.z @ beta
    return beta, float(e @ e)


def stage3_ls(data: Dataset, beta, h: float, kernel=EPANECHNIKOV, grid=None, n_jobs=None):
    beta = np.asarray(beta, dtype=float)
    grid = default_grid(data.u) if grid is None else np.asarray(grid, dtype=float)
    resp = data.y - (data.z @ beta if data.d2 else 0.0)
    fits = map_points(lambda u0: local_ls(data, u0, h, kernel, resp, with_z=False),
                      grid, n_jobs)
    curves = CurveSet(grid, np.column_stack([f.a0 for f in fits]),
                      np.column_stack([f.a for f in fits]) if data.d1 else np.zeros((0, len(grid))),
                      mode="grid")
    return curves, sum(f.objective for f in fits)


def fit_semi_ls(data: Dataset, h1: float | None = None, h3: float | None = None,
                kernel=EPANECHNIKOV, grid=None, n_jobs: int | None = None) -> SemiFit:
    if h3 is None and h1 is None:
        raise ValueError("a bandwidth is required")
    if h3 is None:
        h3 = h1
    if h1 is None:
        h1 = undersmoothed_bandwidth(h3, data.n)
    s1, local_betas, obj1 = stage1_curves_ls(data, h1, kernel, n_jobs)
    beta, obj2 = stage2_ls(data, s1)
    curves, obj3 = stage3_ls(data, beta, h3, kernel, grid, n_jobs)
    return SemiFit(curves=curves, beta=beta, initial_beta=local_betas.mean(axis=0), q=1,
                   h_stage1=float(h1), h_stage3=float(h3), method="LS",
                   stage1_curves=s1,
                   objectives={"stage1": obj1, "stage2": obj2, "stage3": obj3})
