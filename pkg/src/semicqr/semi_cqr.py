"""Three-stage semiparametric composite quantile regression (semi-CQR).

Same three stages as semi-QR, but every loss is summed over the levels
``k / (q + 1)``: slopes, varying coefficients and beta are shared across
levels while each level keeps its own intercept. The reported baseline is
the average of the level intercepts.
"""
from __future__ import annotations

import numpy as np

from . import _composite
from .kernels import EPANECHNIKOV
from .model import CurveSet, Dataset, QuantileGrid, SemiFit, default_grid
from .semi_qr import _fit, undersmoothed_bandwidth

__all__ = [
    "DEFAULT_Q",
    "stage1_local_cqr",
    "stage1_curves_cqr",
    "stage2_refine_beta_cqr",
    "stage3_refine_curves_cqr",
    "fit_semi_cqr",
    "intercept_crossings",
]

DEFAULT_Q = 9
MAX_Q = 19


def _grid(qgrid) -> QuantileGrid:
    if isinstance(qgrid, QuantileGrid):
        g = qgrid
    else:
        g = QuantileGrid(int(qgrid))
    if g.q > MAX_Q:
        raise ValueError(f"q must lie in [1, {MAX_Q}], got {g.q}")
    return g


def stage1_local_cqr(data: Dataset, u0: float, qgrid, h: float, kernel=EPANECHNIKOV):
    """Local composite fit at ``u0``; ``fit.alpha0`` is the averaged intercept."""
    return _composite.local_fit(data, u0, _grid(qgrid).taus, h, kernel)


def stage1_curves_cqr(data: Dataset, qgrid, h: float, kernel=EPANECHNIKOV, n_jobs=None):
    curves, _, _, _ = _composite.stage1(data, _grid(qgrid).taus, h, kernel, n_jobs)
    return curves


def stage2_refine_beta_cqr(data: Dataset, stage1_curves: CurveSet, qgrid) -> np.ndarray:
    beta, _ = _composite.stage2(data, stage1_curves, _grid(qgrid).taus)
    return beta


def stage3_refine_curves_cqr(data: Dataset, beta_hat, qgrid, h: float,
                             kernel=EPANECHNIKOV, grid=None, n_jobs=None) -> CurveSet:
    grid = default_grid(data.u) if grid is None else grid
    curves, _ = _composite.stage3(data, beta_hat, _grid(qgrid).taus, h, kernel, grid, n_jobs)
    return curves


def fit_semi_cqr(data: Dataset, qgrid=DEFAULT_Q, h1: float | None = None,
                 h3: float | None = None, kernel=EPANECHNIKOV, grid=None,
                 n_jobs: int | None = None) -> SemiFit:
    """Semi-CQR fit with ``q`` levels (an int or a :class:`QuantileGrid`)."""
    g = _grid(qgrid)
    if h3 is None and h1 is None:
        raise ValueError("a bandwidth is required")
    if h3 is None:
        h3 = h1
    if h1 is None:
        h1 = undersmoothed_bandwidth(h3, data.n)
    return _fit(data, g.taus, h1, h3, kernel, grid, n_jobs, "CQR", None)


def intercept_crossings(curves: CurveSet) -> np.ndarray:
    """Indices of evaluation points where the level intercepts are not nondecreasing.

    Crossing can happen in small windows; it is a diagnostic, not an error.
    """
    if curves.q < 2:
        return np.zeros(0, dtype=int)
    return np.flatnonzero(np.any(np.diff(curves.alpha0_k, axis=0) < 0, axis=0))
