"""Core data containers for varying-coefficient partially linear models.

The model is ``y = alpha0(u) + x' alpha(u) + z' beta + eps`` with a scalar
index variable ``u``, ``d1`` varying-coefficient covariates ``x`` and ``d2``
linear covariates ``z``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DatasetError, ExtrapolationError

__all__ = [
    "Dataset",
    "QuantileGrid",
    "CurveSet",
    "SemiFit",
    "evaluate_curveset",
    "default_grid",
]


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _as_matrix(a, n, name):
    if a is None:
        return np.zeros((n, 0))
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a.reshape(-1, 1)
    if a.ndim != 2:
        raise DatasetError(f"{name} must be a 2-d matrix, got {a.ndim} dimensions")
    return a


@dataclass(frozen=True)
class Dataset:
    """One sample ``(u, x, z, y)`` of size n.

    ``x`` is n-by-d1 and ``z`` is n-by-d2; either may have zero columns but
    not both. ``include_baseline`` says whether an unknown intercept function
    ``alpha0(u)`` is part of the model.
    """

    u: np.ndarray
    x: np.ndarray
    z: np.ndarray
    y: np.ndarray
    include_baseline: bool = True

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float).ravel()
        y = np.asarray(self.y, dtype=float).ravel()
        n = len(u)
        x = _as_matrix(self.x, n, "x")
        z = _as_matrix(self.z, n, "z")
        lengths = {"u": n, "x": x.shape[0], "z": z.shape[0], "y": len(y)}
        if len(set(lengths.values())) != 1:
            raise DatasetError(f"mismatched lengths: {lengths}")
        if n < 1:
            raise DatasetError("dataset must contain at least one observation")
        if x.shape[1] == 0 and z.shape[1] == 0:
            raise DatasetError("need at least one x or z column (d1 + d2 > 0)")
        for name, a in (("u", u), ("x", x), ("z", z), ("y", y)):
            if not np.all(np.isfinite(a)):
                raise DatasetError(f"{name} contains non-finite values")
        object.__setattr__(self, "u", _frozen(u))
        object.__setattr__(self, "x", _frozen(x))
        object.__setattr__(self, "z", _frozen(z))
        object.__setattr__(self, "y", _frozen(y))
        object.__setattr__(self, "include_baseline", bool(self.include_baseline))

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def d1(self) -> int:
        return self.x.shape[1]

    @property
    def d2(self) -> int:
        return self.z.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.u[idx], self.x[idx], self.z[idx], self.y[idx],
                       self.include_baseline)

    def with_response(self, y) -> "Dataset":
        return Dataset(self.u, self.x, self.z, y, self.include_baseline)


@dataclass(frozen=True)
class QuantileGrid:
    """Equally spaced quantile levels ``k / (q + 1)``, k = 1..q."""

    q: int

    def __post_init__(self):
        if int(self.q) != self.q or self.q < 1:
            raise ValueError(f"q must be a positive integer, got {self.q!r}")
        object.__setattr__(self, "q", int(self.q))

    @property
    def taus(self) -> np.ndarray:
        return np.arange(1, self.q + 1) / (self.q + 1)


@dataclass(frozen=True)
class CurveSet:
    """Fitted coefficient curves on a set of evaluation points.

    ``alpha0_k`` has one row per quantile level (a single row for least
    squares or a single quantile); each row estimates ``alpha0(u) + c_k``.
    ``alpha`` holds the d1 varying coefficients. ``mode`` is ``"grid"`` for
    an output grid and ``"observations"`` for curves evaluated at the
    sample's own index values (in sample order, not necessarily sorted).
    """

    grid: np.ndarray
    alpha0_k: np.ndarray
    alpha: np.ndarray
    mode: str = "grid"

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float).ravel()
        a0 = np.atleast_2d(np.asarray(self.alpha0_k, dtype=float))
        al = np.asarray(self.alpha, dtype=float)
        if al.size == 0:
            al = np.zeros((0, len(grid)))
        al = np.atleast_2d(al)
        if a0.shape[1] != len(grid) or al.shape[1] != len(grid):
            raise ValueError("every curve must have the same length as grid")
        if self.mode not in ("grid", "observations"):
            raise ValueError(f"unknown evaluation mode {self.mode!r}")
        object.__setattr__(self, "grid", _frozen(grid))
        object.__setattr__(self, "alpha0_k", _frozen(a0))
        object.__setattr__(self, "alpha", _frozen(al))

    @property
    def q(self) -> int:
        return self.alpha0_k.shape[0]

    @property
    def d1(self) -> int:
        return self.alpha.shape[0]

    @property
    def alpha0(self) -> np.ndarray:
        """Baseline estimate: the average of the level-specific intercepts."""
        return self.alpha0_k.mean(axis=0)

    @property
    def curves(self) -> np.ndarray:
        """All stored curves stacked: q intercept rows, then d1 coefficient rows."""
        return np.vstack([self.alpha0_k, self.alpha])

    def evaluate(self, u, extrapolate: str = "raise"):
        """Linearly interpolate every stored curve at the points ``u``.

        Returns an array of shape ``(q + d1, len(u))`` (or ``(q + d1,)`` for
        scalar ``u``). ``extrapolate`` is ``"raise"`` or ``"clamp"``; clamping
        uses the nearest endpoint value.
        """
        scalar = np.ndim(u) == 0
        u = np.atleast_1d(np.asarray(u, dtype=float))
        order = np.argsort(self.grid, kind="stable")
        g = self.grid[order]
        vals = self.curves[:, order]
        lo, hi = g[0], g[-1]
        outside = (u < lo) | (u > hi)
        if outside.any():
            if extrapolate == "raise":
                raise ExtrapolationError(
                    f"u0={u[outside][0]!r} lies outside the grid hull [{lo}, {hi}]")
            if extrapolate != "clamp":
                raise ValueError(f"unknown extrapolation policy {extrapolate!r}")
            u = np.clip(u, lo, hi)
        out = np.empty((vals.shape[0], len(u)))
        for j in range(vals.shape[0]):
            out[j] = np.interp(u, g, vals[j])
        return out[:, 0] if scalar else out


def evaluate_curveset(curves: CurveSet, u0: float) -> np.ndarray:
    """Values of all curves at ``u0`` by linear interpolation on the grid."""
    return curves.evaluate(float(u0))


def default_grid(u, n_grid: int = 200) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    return np.linspace(u.min(), u.max(), n_grid)


@dataclass(frozen=True)
class SemiFit:
    """Complete three-stage estimate.

    ``curves`` are the refined stage-3 curves on the output grid,
    ``stage1_curves`` the initial curves at the observation points, ``beta``
    the refined parametric part and ``initial_beta`` the stage-1 value (the
    average of the local estimates over observation points).
    """

    curves: CurveSet
    beta: np.ndarray
    initial_beta: np.ndarray
    q: int
    h_stage1: float
    h_stage3: float
    method: str
    tau: float | None = None
    stage1_curves: CurveSet | None = None
    objectives: dict = field(default_factory=dict)

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float).ravel()
        if not np.all(np.isfinite(beta)):
            raise ValueError("beta must be finite")
        if self.h_stage1 <= 0 or self.h_stage3 <= 0:
            raise ValueError("bandwidths must be positive")
        if self.q < 1:
            raise ValueError("q must be at least 1")
        object.__setattr__(self, "beta", _frozen(beta))
        object.__setattr__(self, "initial_beta",
                           _frozen(np.asarray(self.initial_beta, dtype=float).ravel()))

    def predict(self, u, x, z, extrapolate: str = "clamp") -> np.ndarray:
        """Fitted conditional location ``alpha0(u) + x' alpha(u) + z' beta``."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        x = np.asarray(x, dtype=float).reshape(len(u), -1)
        z = np.asarray(z, dtype=float).reshape(len(u), -1)
        vals = self.curves.evaluate(u, extrapolate=extrapolate)
        q = self.curves.q
        pred = vals[:q].mean(axis=0)
        if self.curves.d1:
            pred = pred + np.einsum("ij,ji->i", x, vals[q:])
        if len(self.beta):
            pred = pred + z @ self.beta
        return pred
