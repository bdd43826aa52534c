"""Weighted composite check-loss minimization.

Every estimator in the package reduces to

    minimize  sum_i w_i * rho_{tau_i}(y_i - x_i' b)  +  sum_j pen_j * |b_j|

with ``rho_tau(r) = r * (tau - 1{r < 0})``. :func:`solve` handles it with a
primal-dual interior-point method on the bounded dual (Frisch-Newton with
Mehrotra predictor-corrector steps), followed by a crossover to an optimal
vertex so that reported coefficients are exact basic solutions.
"""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .exceptions import InvalidProblemError, OracleTooLargeError

__all__ = [
    "Status",
    "PinballRow",
    "PinballProblem",
    "PinballSolution",
    "check_loss",
    "pinball_objective",
    "solve",
    "brute_force_oracle",
    "kkt_residual",
]


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    MAX_ITERATIONS = "MaxIterations"
    DEGENERATE = "Degenerate"


def check_loss(r, tau):
    """Elementwise ``rho_tau(r)``."""
    r = np.asarray(r, dtype=float)
    return r * (tau - (r < 0))


@dataclass(frozen=True)
class PinballRow:
    features: tuple
    response: float
    tau: float
    weight: float = 1.0


class PinballProblem:
    """Rows of ``(features, response, tau, weight)`` plus optional L1 weights.

    Stored column-wise as numpy arrays; ``X`` is m-by-p.
    """

    def __init__(self, X, y, tau, weight=None, penalty=None):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        y = np.asarray(y, dtype=float).ravel()
        m = len(y)
        if X.ndim != 2 or X.shape[0] != m:
            raise InvalidProblemError("features must be an m-by-p matrix matching the responses")
        if m == 0 or X.shape[1] == 0:
            raise InvalidProblemError("problem needs at least one row and one coefficient")
        tau = np.broadcast_to(np.asarray(tau, dtype=float), (m,)).copy()
        weight = np.ones(m) if weight is None else np.broadcast_to(
            np.asarray(weight, dtype=float), (m,)).copy()
        if np.any((tau <= 0) | (tau >= 1)):
            raise InvalidProblemError("every tau must lie strictly inside (0, 1)")
        if np.any(weight < 0) or not np.all(np.isfinite(weight)):
            raise InvalidProblemError("weights must be finite and nonnegative")
        if not np.any(weight > 0):
            raise InvalidProblemError("at least one row needs a positive weight")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise InvalidProblemError("features and responses must be finite")
        p = X.shape[1]
        if penalty is not None:
            penalty = np.broadcast_to(np.asarray(penalty, dtype=float), (p,)).copy()
            if np.any(penalty < 0) or not np.all(np.isfinite(penalty)):
                raise InvalidProblemError("penalty weights must be finite and nonnegative")
        self.X, self.y, self.tau, self.weight, self.penalty = X, y, tau, weight, penalty

    @classmethod
    def from_rows(cls, rows, penalty=None):
        rows = list(rows)
        if not rows:
            raise InvalidProblemError("empty problem")
        lengths = {len(r.features) for r in rows}
        if len(lengths) != 1:
            raise InvalidProblemError("all rows need the same feature length")
        return cls([r.features for r in rows], [r.response for r in rows],
                   [r.tau for r in rows], [r.weight for r in rows], penalty)

    @property
    def m(self) -> int:
        return len(self.y)

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def objective(self, b) -> float:
        return pinball_objective(self, b)

    def augmented(self):
        """Scaled rows with zero-weight rows dropped and penalty pseudo-rows appended.

        Uses ``w * rho_tau(r) = rho_tau(w * r)`` and
        ``pen * |b| = rho_{1/2}(0 - 2 * pen * b)``. Returns
        ``(X, y, tau, is_penalty_row)``.
        """
        keep = self.weight > 0
        w = self.weight[keep]
        X = self.X[keep] * w[:, None]
        y = self.y[keep] * w
        tau = self.tau[keep]
        is_pen = np.zeros(len(y), dtype=bool)
        if self.penalty is not None and np.any(self.penalty > 0):
            idx = np.flatnonzero(self.penalty > 0)
            P = np.zeros((len(idx), self.p))
            P[np.arange(len(idx)), idx] = 2.0 * self.penalty[idx]
            X = np.vstack([X, P])
            y = np.concatenate([y, np.zeros(len(idx))])
            tau = np.concatenate([tau, np.full(len(idx), 0.5)])
            is_pen = np.concatenate([is_pen, np.ones(len(idx), dtype=bool)])
        return X, y, tau, is_pen


def pinball_objective(problem: PinballProblem, b) -> float:
    b = np.asarray(b, dtype=float)
    r = problem.y - problem.X @ b
    val = float(np.dot(problem.weight, check_loss(r, problem.tau)))
    if problem.penalty is not None:
        val += float(np.dot(problem.penalty, np.abs(b)))
    return val


@dataclass(frozen=True)
class PinballSolution:
    coefficients: np.ndarray
    objective: float
    status: Status
    iterations: int
    duality_gap: float


def _loss(X, y, tau, b):
    r = y - X @ b
    return float(np.sum(r * (tau - (r < 0))))


@njit(cache=True, nogil=True)
def _cholesky(Q):
    """Lower Cholesky factor of Q; ``ok`` is False if Q is not positive definite."""
    p = Q.shape[0]
    L = np.zeros((p, p))
    for j in range(p):
        d = Q[j, j]
        for k in range(j):
            d -= L[j, k] * L[j, k]
        if d <= 0.0:
            return L, False
        L[j, j] = np.sqrt(d)
        for i in range(j + 1, p):
            v = Q[i, j]
            for k in range(j):
                v -= L[i, k] * L[j, k]
            L[i, j] = v / L[j, j]
    return L, True


@njit(cache=True, nogil=True)
def _cho_solve(L, rhs):
    p = L.shape[0]
    x = rhs.copy()
    for i in range(p):
        v = x[i]
        for k in range(i):
            v -= L[i, k] * x[k]
        x[i] = v / L[i, i]
    for i in range(p - 1, -1, -1):
        v = x[i]
        for k in range(i + 1, p):
            v -= L[k, i] * x[k]
        x[i] = v / L[i, i]
    return x


@njit(cache=True, nogil=True)
def _factor(X, q, ridge):
    """Cholesky factor of X' diag(q) X with a relative ridge on the diagonal."""
    Xq = X * q.reshape(-1, 1)
    Q = Xq.T @ X
    p = Q.shape[0]
    dmax = 1e-300
    for j in range(p):
        dmax = max(dmax, Q[j, j])
    for j in range(p):
        Q[j, j] += ridge * dmax
    L, ok = _cholesky(Q)
    if not ok:
        for j in range(p):
            Q[j, j] += 1e-8 * max(dmax, 1.0)
        L, ok = _cholesky(Q)
    return L


@njit(cache=True, nogil=True)
def _interior_point(X, y, tau, tol, max_iter, beta=0.99995, ridge=1e-10):
    """Frisch-Newton iterations on the bounded dual.

    Dual of the check-loss problem: max y'a s.t. X'a = X'(1 - tau), 0 <= a <= 1,
    written as ``min c'a`` with ``c = -y``; coefficients are ``-dual_y``.
    Returns ``(b, a, gap, iterations, converged)``.
    """
    m, p = X.shape
    c = -y
    a = 1.0 - tau
    s = tau.copy()
    rhs_b = X.T @ a
    const = np.dot(1.0 - tau, y)
    # least-squares start for the dual prices
    dy = _cho_solve(_factor(X, np.ones(m), 1e-10), X.T @ c)
    r = c - X @ dy
    delta = max(1e-3, 0.1 * np.mean(np.abs(r)))
    z = np.maximum(r, 0.0) + delta
    w = np.maximum(-r, 0.0) + delta
    it = 0
    gap = np.dot(a, z) + np.dot(s, w)
    lower = np.sum(w) - np.dot(rhs_b, dy) - const
    q = np.empty(m)
    da = np.empty(m)
    dz = np.empty(m)
    dw = np.empty(m)
    xi = np.empty(m)
    while gap > tol * (1.0 + abs(lower)) and it < max_iter:
        it += 1
        for i in range(m):
            q[i] = 1.0 / (z[i] / a[i] + w[i] / s[i])
            r[i] = z[i] - w[i]
        # affine-scaling predictor; the Newton system also removes any drift
        # in the dual equality X'a = X'(1 - tau) left by earlier steps
        feas = X.T @ a - rhs_b
        L = _factor(X, q, ridge)
        ddy = _cho_solve(L, X.T @ (q * r) - feas)
        xd = X @ ddy
        fp = 1.0
        fz = 1.0
        for i in range(m):
            da[i] = q[i] * (xd[i] - r[i])
            dz[i] = -z[i] * (1.0 + da[i] / a[i])
            dw[i] = -w[i] * (1.0 - da[i] / s[i])
            if da[i] < 0.0:
                fp = min(fp, beta * a[i] / -da[i])
            elif da[i] > 0.0:
                fp = min(fp, beta * s[i] / da[i])
            if dz[i] < 0.0:
                fz = min(fz, beta * z[i] / -dz[i])
            if dw[i] < 0.0:
                fz = min(fz, beta * w[i] / -dw[i])
        fd = fz
        if min(fp, fd) < 1.0:
            # Mehrotra corrector with centering target
            mu = gap
            g = 0.0
            for i in range(m):
                g += (a[i] + fp * da[i]) * (z[i] + fd * dz[i]) \
                    + (s[i] - fp * da[i]) * (w[i] + fd * dw[i])
            mu = mu * (g / mu) ** 3 / (2.0 * m)
            for i in range(m):
                dadz = da[i] * dz[i]
                dsdw = -da[i] * dw[i]
                xi[i] = mu * (1.0 / a[i] - 1.0 / s[i]) - dadz / a[i] + dsdw / s[i]
                dz[i] = dadz
                dw[i] = dsdw
            ddy = _cho_solve(L, X.T @ (q * (r - xi)) - feas)
            xd = X @ ddy
            fp = 1.0
            fd = 1.0
            for i in range(m):
                dadz = dz[i]
                dsdw = dw[i]
                da[i] = q[i] * (xd[i] - r[i] + xi[i])
                dz[i] = (mu - dadz) / a[i] - z[i] - (z[i] / a[i]) * da[i]
                dw[i] = (mu - dsdw) / s[i] - w[i] + (w[i] / s[i]) * da[i]
                if da[i] < 0.0:
                    fp = min(fp, beta * a[i] / -da[i])
                elif da[i] > 0.0:
                    fp = min(fp, beta * s[i] / da[i])
                if dz[i] < 0.0:
                    fd = min(fd, beta * z[i] / -dz[i])
                if dw[i] < 0.0:
                    fd = min(fd, beta * w[i] / -dw[i])
        gap = 0.0
        sw = 0.0
        for i in range(m):
            a[i] += fp * da[i]
            s[i] -= fp * da[i]
            z[i] += fd * dz[i]
            w[i] += fd * dw[i]
            gap += a[i] * z[i] + s[i] * w[i]
            sw += w[i]
        dy = dy + fd * ddy
        lower = sw - np.dot(rhs_b, dy) - const
    converged = gap <= tol * (1.0 + abs(lower))
    return -dy, a, gap, it, converged


@njit(cache=True, nogil=True)
def _independent_rows(X, order, p):
    """Greedily pick ``p`` linearly independent rows of X in the given order."""
    basis = np.zeros((p, X.shape[1]))
    chosen = np.empty(p, dtype=np.int64)
    k = 0
    for i in order:
        v = X[i].copy()
        nv0 = np.sqrt(np.dot(v, v))
        if nv0 == 0.0:
            continue
        for _ in range(2):
            for j in range(k):
                v -= np.dot(basis[j], v) * basis[j]
        nv = np.sqrt(np.dot(v, v))
        if nv > 1e-9 * nv0:
            basis[k] = v / nv
            chosen[k] = i
            k += 1
            if k == p:
                break
    return chosen[:k]


def _crossover(X, y, tau, is_pen, b_ipm, a):
    """Move from the interior solution to an optimal vertex.

    Rows whose dual value is strictly inside (0, 1) have zero residual at
    every optimum; they come first. Remaining rows are ranked by their
    residual, with penalty pseudo-rows first among near-ties so that a flat
    optimal face resolves toward the sparser solution.
    Returns ``(b_vertex, basis, n_interior)``; ``b_vertex`` and ``basis``
    are None when no full basis exists.
    """
    m, p = X.shape
    interior = np.minimum(a, 1.0 - a) > 1e-4
    r = np.abs(y - X @ b_ipm)
    scale = 1.0 + float(np.max(np.abs(y)))
    tiny = r <= 1e-7 * scale
    # sort keys: interior first, then tiny-residual penalty rows, then |r|
    key_r = np.where(interior, -1.0, r)
    key_pen = np.where(tiny & is_pen, 0, 1)
    order = np.lexsort((key_r, key_pen, ~interior))
    chosen = _independent_rows(X, order, p)
    n_interior = int(interior.sum())
    if len(chosen) < p:
        return None, None, n_interior
    b = _basic_solution(X, y, is_pen, chosen)
    if b is None:
        return None, None, n_interior
    return b, chosen, n_interior


def _basic_solution(X, y, is_pen, basis):
    try:
        b = np.linalg.solve(X[basis], y[basis])
    except np.linalg.LinAlgError:
        return None
    # penalty rows in the basis pin their coordinate at exactly zero
    for i in basis:
        if is_pen[i]:
            b[int(np.flatnonzero(X[i])[0])] = 0.0
    return b


def _scale_of(X):
    return 1.0 + float(np.max(np.abs(X))) if X.size else 1.0


def _polish(X, y, tau, is_pen, basis, max_pivots=None):
    """Exact simplex pivots from a vertex until its optimality is certified.

    At a vertex with basis rows B (zero residual) the objective is minimal
    iff the multipliers u solving ``X_B' u = X_N' psi_N`` satisfy
    ``-tau_k <= u_k <= 1 - tau_k``. A violated bound gives a descent edge
    that releases row k; an exact line search along it picks the entering
    row (Barrodale-Roberts step). Returns ``(b, basis, certified)``.
    """
    m, p = X.shape
    basis = np.array(basis, dtype=np.int64)
    b = _basic_solution(X, y, is_pen, basis)
    if b is None:
        return None, basis, False
    scale = 1.0 + float(np.max(np.abs(X)))
    eps = 1e-10 * scale
    max_pivots = 20 * (m + p) if max_pivots is None else max_pivots
    stalled = 0
    for _ in range(max_pivots + 1):
        in_basis = np.zeros(m, dtype=bool)
        in_basis[basis] = True
        r = y - X @ b
        r[basis] = 0.0
        psi = tau - (r < 0)
        psi[in_basis] = 0.0
        try:
            XBt_inv = np.linalg.inv(X[basis].T)
        except np.linalg.LinAlgError:
            return b, basis, False
        u = XBt_inv @ (X.T @ psi)
        tb = tau[basis]
        # directional derivatives for raising (s=+1) or lowering row k's residual
        d_up = u + tb
        d_dn = 1.0 - tb - u
        worst = min(d_up.min(), d_dn.min())
        if worst >= -eps:
            return b, basis, True
        if d_up.min() <= d_dn.min():
            k, sgn, slope = int(np.argmin(d_up)), 1.0, float(d_up.min())
        else:
            k, sgn, slope = int(np.argmin(d_dn)), -1.0, float(d_dn.min())
        # edge direction: X_B d = -sgn e_k, so r_k grows as t * sgn
        e = np.zeros(p)
        e[k] = -sgn
        d = np.linalg.solve(X[basis], e)
        xd = X @ d
        cand = np.flatnonzero(~in_basis & (np.abs(xd) > 1e-14 * scale))
        # residual of row i along the edge: r_i - t * xd_i; breakpoint where it hits 0
        t = r[cand] / xd[cand]
        keep = t >= -1e-14
        cand, t = cand[keep], np.maximum(t[keep], 0.0)
        if len(cand) == 0:
            return b, basis, False          # unbounded edge; should not happen
        order = np.argsort(t, kind="stable")
        enter = None
        for j in order:
            slope += abs(xd[cand[j]])
            if slope >= -eps:
                enter = int(cand[j])
                step = float(t[j])
                break
        if enter is None:
            return b, basis, False
        # zero-length pivots on a degenerate vertex can cycle; give up early
        stalled = stalled + 1 if step <= 1e-14 else 0
        if stalled > p + 10:
            return b, basis, False
        basis[k] = enter
        b_new = _basic_solution(X, y, is_pen, basis)
        if b_new is None:
            return b, basis, False
        b = b_new
    return b, basis, False


def _pin_and_resolve(problem, X, y, is_pen, b_ipm, tol, max_iter):
    """Fix penalized coordinates sitting at their kink to 0 and re-solve the rest.

    Returns the full-length coefficient vector, or None when nothing can be
    pinned.
    """
    scale = 1.0 + float(np.max(np.abs(y)))
    pen_idx = np.flatnonzero(problem.penalty > 0) if problem.penalty is not None else []
    pinned = np.zeros(problem.p, dtype=bool)
    for j in pen_idx:
        if abs(2.0 * problem.penalty[j] * b_ipm[j]) <= 1e-7 * scale:
            pinned[j] = True
    if not pinned.any():
        return None
    free = ~pinned
    b = np.zeros(problem.p)
    if free.any():
        sub = PinballProblem(problem.X[:, free], problem.y, problem.tau, problem.weight,
                             problem.penalty[free])
        b[free] = solve(sub, tol, max_iter).coefficients
    return b


def solve(problem: PinballProblem, tol: float = 1e-8, max_iter: int = 200) -> PinballSolution:
    """Minimize the (penalized) weighted check loss of ``problem``.

    The interior-point iterate is moved to an optimal vertex when one within
    the certified duality gap is found, which makes penalized coefficients
    exact zeros.
    """
    if not isinstance(problem, PinballProblem):
        raise InvalidProblemError("expected a PinballProblem")
    X, y, tau, is_pen = problem.augmented()
    p = problem.p
    b_ipm, a, gap, it, converged = _interior_point(X, y, tau, tol, max_iter)
    f_ipm = _loss(X, y, tau, b_ipm)
    slack = max(1e-9 * (1.0 + abs(f_ipm)), gap if converged else 0.0)
    b_v, basis, n_interior = _crossover(X, y, tau, is_pen, b_ipm, a)
    # The gap certifies the interior point only if X'a = X'(1 - tau) holds;
    # when it does not, or the vertex is rejected, pivot to a certified vertex.
    drift = float(np.max(np.abs(X.T @ (a - (1.0 - tau))))) if len(a) else 0.0
    vertex_ok = b_v is not None and _loss(X, y, tau, b_v) <= f_ipm + slack
    certified = False
    if basis is not None and (not converged or not vertex_ok or drift > 1e-9 * _scale_of(X)):
        b_p, _, certified = _polish(X, y, tau, is_pen, basis)
        if certified:
            b_v, vertex_ok = b_p, True
    if not vertex_ok:
        b_v = None
    if b_v is None and is_pen.any():
        b_v = _pin_and_resolve(problem, X, y, is_pen, b_ipm, tol, max_iter)
        if b_v is not None and _loss(X, y, tau, b_v) > f_ipm + slack:
            b_v = None
    b, status = b_ipm, Status.OPTIMAL
    if b_v is not None:
        # a wide gap between two optimal points means a flat optimal face
        width = float(np.max(np.abs(b_v - b_ipm)))
        ipm_optimal = f_ipm <= _loss(X, y, tau, b_v) + slack
        if ipm_optimal and width > 1e-6 * (1.0 + float(np.max(np.abs(b_v)))):
            status = Status.DEGENERATE
        b = b_v
        if certified and not converged:
            converged = True
    elif n_interior < p:
        status = Status.DEGENERATE
    if not converged:
        status = Status.MAX_ITERATIONS
    return PinballSolution(b, pinball_objective(problem, b), status, it, gap)


def brute_force_oracle(problem: PinballProblem, max_subsets: int = 200_000) -> PinballSolution:
    """Exact optimum by enumerating every basic solution.

    A full-rank piecewise-linear convex objective attains its minimum where
    ``p`` of the row hyperplanes ``x_i' b = y_i`` (penalty rows included)
    intersect, so trying every nonsingular p-subset finds it. Meant for
    testing small problems only.
    """
    X, y, tau, _ = problem.augmented()
    m, p = X.shape
    r = int(np.linalg.matrix_rank(X))
    if math.comb(m, r) > max_subsets:
        raise OracleTooLargeError(
            f"{math.comb(m, r)} candidate bases (m={m}, rank={r}) exceeds the oracle limit")
    subsets = np.array(list(itertools.combinations(range(m), r)), dtype=int)
    A = X[subsets]
    rhs = y[subsets]
    if r == p:
        det = np.linalg.det(A)
        scale = np.prod(np.linalg.norm(A, axis=2), axis=1)
        ok = np.abs(det) > 1e-12 * np.maximum(scale, 1e-300)
        cand = np.linalg.solve(A[ok], rhs[ok][..., None])[..., 0]
    else:
        # rank-deficient design: the objective is constant along the null
        # space, so the minimum-norm point through r independent rows is a vertex
        ok = np.array([np.linalg.matrix_rank(a) == r for a in A], dtype=bool)
        cand = np.array([np.linalg.lstsq(a, b, rcond=None)[0]
                         for a, b in zip(A[ok], rhs[ok])]).reshape(-1, p)
    if not ok.any():
        raise InvalidProblemError("no basic solution exists")
    R = y[None, :] - cand @ X.T
    vals = np.sum(R * (tau - (R < 0)), axis=1)
    best = int(np.argmin(vals))
    b = cand[best]
    return PinballSolution(b, pinball_objective(problem, b), Status.OPTIMAL, len(cand), 0.0)


def kkt_residual(problem: PinballProblem, b, zero_tol: float = 1e-9) -> float:
    """Distance from zero to the subdifferential of the objective at ``b``.

    Rows (and penalized coordinates) sitting exactly at a kink contribute an
    interval; the best choice inside those intervals is found by bounded
    least squares.
    """
    from scipy.optimize import lsq_linear

    X, y, tau, _ = problem.augmented()
    b = np.asarray(b, dtype=float)
    r = y - X @ b
    scale = 1.0 + float(np.max(np.abs(y)))
    kink = np.abs(r) <= zero_tol * scale
    # gradient of sum rho(r) w.r.t. b is -X' psi(r) with psi = tau - 1{r<0}
    psi = tau - (r < 0)
    g0 = -X[~kink].T @ psi[~kink]
    if not kink.any():
        return float(np.linalg.norm(g0))
    # at a kink psi ranges over [tau - 1, tau]
    M = -X[kink].T
    lo, hi = tau[kink] - 1.0, tau[kink]
    res = lsq_linear(M, -g0, bounds=(lo, hi), lsmr_tol="auto", tol=1e-12)
    return float(np.linalg.norm(M @ res.x + g0))
