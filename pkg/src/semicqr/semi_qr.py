"""Three-stage semiparametric quantile regression at a single level tau.

1. local linear quantile fits at each observation point give initial
   curves and a local estimate of beta;
2. a global quantile regression of the partial residuals on z refines beta
   at the root-n rate;
3. a local linear refit of ``y - z' beta`` on the output grid refines the
   curves.
"""
from __future__ import annotations

import numpy as np

from . import _composite
from .kernels import EPANECHNIKOV
from .model import CurveSet, Dataset, SemiFit, default_grid

__all__ = [
    "undersmoothed_bandwidth",
    "stage1_local_qr",
    "stage1_curves_qr",
    "stage2_refine_beta",
    "stage3_refine_curves",
    "fit_semi_qr",
]


def undersmoothed_bandwidth(h3: float, n: int) -> float:
    """Default stage-1 bandwidth ``h3 * n**(-1/10)``.

    With ``h3 ~ n**(-1/5)`` this gives ``n h1^4 -> 0`` while
    ``n h1^2 / log(1/h1) -> inf``, the regime where beta is root-n.
    """
    return float(h3) * float(n) ** -0.1


def stage1_local_qr(data: Dataset, u0: float, tau: float, h: float, kernel=EPANECHNIKOV):
    """Local linear quantile fit at ``u0`` (returns a :class:`LocalFit`)."""
    return _composite.local_fit(data, u0, [tau], h, kernel)


def stage1_curves_qr(data: Dataset, tau: float, h: float, kernel=EPANECHNIKOV, n_jobs=None):
    """Stage-1 curves at every observation point, in observation mode."""
    curves, _, _, _ = _composite.stage1(data, [tau], h, kernel, n_jobs)
    return curves


def stage2_refine_beta(data: Dataset, stage1_curves: CurveSet, tau: float) -> np.ndarray:
    beta, _ = _composite.stage2(data, stage1_curves, [tau])
    return beta


def stage3_refine_curves(data: Dataset, beta_hat, tau: float, h: float,
                         kernel=EPANECHNIKOV, grid=None, n_jobs=None) -> CurveSet:
    grid = default_grid(data.u) if grid is None else grid
    curves, _ = _composite.stage3(data, beta_hat, [tau], h, kernel, grid, n_jobs)
    return curves


def fit_semi_qr(data: Dataset, tau: float = 0.5, h1: float | None = None,
                h3: float | None = None, kernel=EPANECHNIKOV, grid=None,
                n_jobs: int | None = None) -> SemiFit:
    """Run all three stages at quantile level ``tau``.

    ``h3`` is the curve bandwidth; ``h1`` defaults to the undersmoothed
    ``h3 * n**(-1/10)``. Supplying only ``h1`` uses it for both stages.
    """
    if h3 is None and h1 is None:
        raise ValueError("a bandwidth is required")
    if h3 is None:
        h3 = h1
    if h1 is None:
        h1 = undersmoothed_bandwidth(h3, data.n)
    return _fit(data, np.array([float(tau)]), h1, h3, kernel, grid, n_jobs, "QR", float(tau))


def _fit(data, taus, h1, h3, kernel, grid, n_jobs, method, tau):
    grid = default_grid(data.u) if grid is None else np.asarray(grid, dtype=float)
    s1_curves, local_betas, obj1, _ = _composite.stage1(data, taus, h1, kernel, n_jobs)
    beta, obj2 = _composite.stage2(data, s1_curves, taus)
    curves, obj3 = _composite.stage3(data, beta, taus, h3, kernel, grid, n_jobs)
    return SemiFit(curves=curves, beta=beta, initial_beta=local_betas.mean(axis=0),
                   q=len(taus), h_stage1=float(h1), h_stage3=float(h3), method=method,
                   tau=tau, stage1_curves=s1_curves,
                   objectives={"stage1": obj1, "stage2": obj2, "stage3": obj3})
