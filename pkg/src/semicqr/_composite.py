"""Three-stage local composite check-loss fitting shared by semi-QR and semi-CQR.

Semi-QR at level tau is the composite procedure with the single level tau,
so both estimators run through the functions here with an array of levels.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .kernels import get_kernel, local_weights
from .lp_core import PinballProblem, Status, solve
from .model import CurveSet, Dataset

# Local designs always carry one intercept per quantile level: even when the
# model has no baseline function, the intercepts absorb the error quantiles.
# Without a baseline only the baseline slope column is dropped.


@dataclass(frozen=True)
class LocalFit:
    """Minimizer of a local composite check loss at one point ``u0``."""

    u0: float
    a0: np.ndarray       # one intercept per level
    b0: float            # baseline slope (0 when the model has no baseline)
    a: np.ndarray        # varying coefficients at u0
    b: np.ndarray        # their derivatives
    beta: np.ndarray     # local parametric estimate (empty in stage 3)
    objective: float
    status: Status

    @property
    def alpha0(self) -> float:
        return float(np.mean(self.a0))


def map_points(fn, points, n_jobs=None):
    """Apply ``fn`` over points, preserving order; threads when ``n_jobs > 1``."""
    if n_jobs is None or n_jobs <= 1:
        return [fn(p) for p in points]
    with ThreadPoolExecutor(max_workers=n_jobs) as ex:
        return list(ex.map(fn, points))


def local_problem(data: Dataset, u0, taus, h, kernel, response=None, with_z=True):
    """Build the stacked local design at ``u0``.

    Row (i, k) carries level ``taus[k]``, kernel weight ``K_h(u_i - u0)`` and
    features ``[e_k, (u_i - u0), x_i, x_i (u_i - u0), z_i]`` where the
    baseline slope is present only with a baseline and ``z`` only when
    ``with_z``. Returns ``(problem, n_levels, layout)``.
    """
    kernel = get_kernel(kernel)
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    K = len(taus)
    d1, d2 = data.d1, (data.d2 if with_z else 0)
    slope = 1 if data.include_baseline else 0
    n_shared = slope + 2 * d1 + d2
    w = local_weights(kernel, data.u, u0, h, min_count=1 + n_shared)
    idx = np.flatnonzero(w)
    w = w[idx]
    du = data.u[idx] - u0
    x = data.x[idx]
    cols = []
    if slope:
        cols.append(du[:, None])
    if d1:
        cols += [x, x * du[:, None]]
    if d2:
        cols.append(data.z[idx])
    nw = len(idx)
    shared = np.hstack(cols) if cols else np.zeros((nw, 0))
    y = (data.y if response is None else np.asarray(response, dtype=float))[idx]
    X = np.zeros((nw * K, K + n_shared))
    for k in range(K):
        X[k * nw:(k + 1) * nw, k] = 1.0
        X[k * nw:(k + 1) * nw, K:] = shared
    prob = PinballProblem(X, np.tile(y, K), np.repeat(taus, nw), np.tile(w, K))
    return prob, K, (slope, d1, d2)


def local_fit(data, u0, taus, h, kernel, response=None, with_z=True) -> LocalFit:
    prob, K, (slope, d1, d2) = local_problem(data, u0, taus, h, kernel, response, with_z)
    sol = solve(prob)
    c = sol.coefficients
    j = K
    b0 = float(c[j]) if slope else 0.0
    j += slope
    a, b = c[j:j + d1], c[j + d1:j + 2 * d1]
    beta = c[j + 2 * d1:j + 2 * d1 + d2]
    return LocalFit(float(u0), c[:K].copy(), b0, a.copy(), b.copy(), beta.copy(),
                    sol.objective, sol.status)


def stage1(data: Dataset, taus, h, kernel, n_jobs=None):
    """Local fits at every observation point.

    Returns ``(curves, local_betas, objective, fits)`` where ``curves`` is in
    observation mode.
    """
    fits = map_points(lambda u0: local_fit(data, u0, taus, h, kernel), data.u, n_jobs)
    curves = CurveSet(data.u, np.column_stack([f.a0 for f in fits]),
                      np.column_stack([f.a for f in fits]) if data.d1 else np.zeros((0, data.n)),
                      mode="observations")
    betas = np.vstack([f.beta for f in fits]) if data.d2 else np.zeros((data.n, 0))
    return curves, betas, sum(f.objective for f in fits), fits


def partial_residuals(data: Dataset, curves: CurveSet) -> np.ndarray:
    """``y_i - a0k(U_i) - x_i' a(U_i)`` as a (levels, n) array."""
    if curves.mode != "observations" or len(curves.grid) != data.n:
        raise ValueError("stage-1 curves must be evaluated at every observation point")
    fitted_x = np.einsum("ij,ji->i", data.x, curves.alpha) if data.d1 else 0.0
    return data.y[None, :] - curves.alpha0_k - fitted_x


def stage2_problem(data: Dataset, curves: CurveSet, taus, penalty=None) -> PinballProblem:
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    if curves.q != len(taus):
        raise ValueError(f"curves carry {curves.q} intercept rows but {len(taus)} levels given")
    resid = partial_residuals(data, curves)
    K, n = resid.shape
    return PinballProblem(np.tile(data.z, (K, 1)), resid.ravel(), np.repeat(taus, n),
                          None, penalty)


def stage2(data: Dataset, curves: CurveSet, taus):
    """Global composite regression of the partial residuals on z."""
    if data.d2 == 0:
        return np.zeros(0), 0.0
    sol = solve(stage2_problem(data, curves, taus))
    return sol.coefficients, sol.objective


def stage3(data: Dataset, beta, taus, h, kernel, grid, n_jobs=None):
    """Local refit of ``y - z' beta`` on the grid; returns (curves, objective)."""
    beta = np.asarray(beta, dtype=float)
    if len(beta) != data.d2:
        raise ValueError(f"beta has length {len(beta)}, expected d2={data.d2}")
    resp = data.y - (data.z @ beta if data.d2 else 0.0)
    grid = np.asarray(grid, dtype=float)
    fits = map_points(lambda u0: local_fit(data, u0, taus, h, kernel, resp, with_z=False),
                      grid, n_jobs)
    curves = CurveSet(grid, np.column_stack([f.a0 for f in fits]),
                      np.column_stack([f.a for f in fits]) if data.d1 else np.zeros((0, len(grid))),
                      mode="grid")
    return curves, sum(f.objective for f in fits)
