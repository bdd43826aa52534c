"""Monte Carlo harness for the two simulated examples.

Example 1 (estimation):
    y = sin(6 pi U) X1 + sin(2 pi U) X2 + 2 Z1 + Z2 + 0.5 Z3 + eps,
    U ~ U(0, 1); (X1, X2, Z1, Z2) standard normal with pairwise correlation
    2/3; Z3 ~ Bernoulli(0.4); U, the normal block and Z3 independent.

Example 2 (selection):
    y = sin(6 pi U) X1 + sin(2 pi U) X2 + Z' beta + eps,
    beta = (3, 1.5, 0, 0, 2, 0, 0, 0); (X1, X2, Z) standard normal with
    correlation 0.5^|i-j|.

Neither model has a baseline function. Every replication draws from its own
generator ``default_rng([seed, rep])``, so results do not depend on the order
or parallelism in which replications run.
"""
from __future__ import annotations

import csv
import math
import re
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import median_abs_deviation

from . import _composite
from .efficiency import ErrorDist, get_distribution
from .exceptions import SemiCQRError
from .model import Dataset, QuantileGrid
from .semi_cqr import fit_semi_cqr
from .semi_ls import fit_semi_ls, stage1_curves_ls, stage2_ls
from .semi_qr import fit_semi_qr
from .sparse_select import bic_select

__all__ = [
    "BETA1",
    "BETA2",
    "alpha_true",
    "gen_example1",
    "gen_example2",
    "z_second_moment",
    "ase",
    "rase",
    "gmse",
    "rgmse",
    "selection_metrics",
    "SimConfig",
    "BenchReport",
    "run_monte_carlo",
]

BETA1 = np.array([2.0, 1.0, 0.5])
BETA2 = np.array([3.0, 1.5, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0])
RHO1 = 2.0 / 3.0
P_Z3 = 0.4
# Default bandwidths. Example 2's stage-1 windows carry eight local
# z-coefficients, so a wider window keeps the local fits from absorbing noise
# that later looks like signal to BIC.
DEFAULT_H = {1: 0.128, 2: 0.2}


def alpha_true(u) -> np.ndarray:
    """True varying coefficients (alpha1, alpha2) as a (2, len(u)) array."""
    u = np.asarray(u, dtype=float)
    return np.vstack([np.sin(6 * np.pi * u), np.sin(2 * np.pi * u)])


def _dist(dist) -> ErrorDist:
    return dist if isinstance(dist, ErrorDist) else get_distribution(str(dist))


def gen_example1(n: int, dist, rng: np.random.Generator) -> Dataset:
    dist = _dist(dist)
    u = rng.random(n)
    # equicorrelated normals via one common factor
    common = rng.standard_normal((n, 1))
    w = math.sqrt(RHO1) * common + math.sqrt(1 - RHO1) * rng.standard_normal((n, 4))
    z3 = (rng.random(n) < P_Z3).astype(float)
    x = w[:, :2]
    z = np.column_stack([w[:, 2:], z3])
    eps = dist.sample(rng, n)
    y = np.einsum("ij,ji->i", x, alpha_true(u)) + z @ BETA1 + eps
    return Dataset(u, x, z, y, include_baseline=False)


def ar1_correlation(dim: int, rho: float = 0.5) -> np.ndarray:
    idx = np.arange(dim)
    return rho ** np.abs(idx[:, None] - idx[None, :])


def gen_example2(n: int, dist, rng: np.random.Generator) -> Dataset:
    dist = _dist(dist)
    u = rng.random(n)
    L = np.linalg.cholesky(ar1_correlation(10))
    w = rng.standard_normal((n, 10)) @ L.T
    x, z = w[:, :2], w[:, 2:]
    eps = dist.sample(rng, n)
    y = np.einsum("ij,ji->i", x, alpha_true(u)) + z @ BETA2 + eps
    return Dataset(u, x, z, y, include_baseline=False)


def z_second_moment(example: int) -> np.ndarray:
    """Population ``E(Z Z')`` for the example's linear covariates."""
    if example == 1:
        m = np.array([[1.0, RHO1, 0.0], [RHO1, 1.0, 0.0], [0.0, 0.0, P_Z3]])
        return m
    if example == 2:
        return ar1_correlation(10)[2:, 2:]
    raise ValueError("example must be 1 or 2")


# ----------------------------------------------------------------- metrics


def ase(fit_curves, true_curves) -> float:
    """``(1/n_grid) sum_m sum_k (a_hat_m(u_k) - a_m(u_k))^2``."""
    a = np.atleast_2d(np.asarray(fit_curves, dtype=float))
    b = np.atleast_2d(np.asarray(true_curves, dtype=float))
    if a.shape != b.shape:
        raise ValueError(f"curve arrays differ in shape: {a.shape} vs {b.shape}")
    return float(np.sum((a - b) ** 2) / a.shape[1])


def _ratio(num: float, den: float) -> float:
    if den == 0.0:
        return 1.0 if num == 0.0 else math.inf
    return num / den


def rase(ase_ls: float, ase_method: float) -> float:
    """Ratio ``ASE(LS) / ASE(method)``; 1 when both are zero."""
    return _ratio(ase_ls, ase_method)


def _check_psd(cov):
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ValueError("covariance must be square")
    if not np.allclose(cov, cov.T, atol=1e-12):
        raise ValueError("covariance must be symmetric")
    if np.linalg.eigvalsh(cov).min() < -1e-10:
        raise ValueError("covariance must be positive semidefinite")
    return cov


def gmse(beta_hat, beta_true, z_cov) -> float:
    cov = _check_psd(z_cov)
    d = np.asarray(beta_hat, dtype=float) - np.asarray(beta_true, dtype=float)
    return float(d @ cov @ d)


def rgmse(beta_hat, beta_ls_full, beta_true, z_cov) -> float:
    return _ratio(gmse(beta_hat, beta_true, z_cov), gmse(beta_ls_full, beta_true, z_cov))


def selection_metrics(betas, true_beta) -> dict:
    """Average correct/incorrect zeros and under/correct/over-fit proportions."""
    B = np.atleast_2d(np.asarray(betas, dtype=float))
    truth = np.asarray(true_beta, dtype=float) != 0
    est = B != 0
    C = np.sum(~est & ~truth, axis=1)
    IC = np.sum(~est & truth, axis=1)
    under = IC > 0
    correct = ~under & np.all(est == truth, axis=1)
    over = ~under & ~correct
    return {"C": float(C.mean()), "IC": float(IC.mean()), "U-fit": float(under.mean()),
            "C-fit": float(correct.mean()), "O-fit": float(over.mean())}


# ----------------------------------------------------------------- harness


_METHOD_RE = re.compile(r"^(LS|CQR(\d+)?|QR(0?\.\d+))$", re.IGNORECASE)


def parse_method(name: str, default_q: int):
    """``LS``, ``CQR`` / ``CQR9`` or ``QR0.25`` -> (kind, q, tau)."""
    m = _METHOD_RE.match(name.strip())
    if not m:
        raise ValueError(f"unknown method {name!r}; use LS, CQR, CQR<q> or QR<tau>")
    s = m.group(1).upper()
    if s == "LS":
        return "LS", 1, None
    if s.startswith("CQR"):
        return "CQR", int(m.group(2)) if m.group(2) else default_q, None
    tau = float(m.group(3))
    if not 0 < tau < 1:
        raise ValueError(f"quantile level must lie in (0, 1), got {tau}")
    return "QR", 1, tau


def _method_label(name, q):
    kind, qq, tau = parse_method(name, q)
    if kind == "CQR":
        return f"CQR{qq}"
    if kind == "QR":
        return f"QR{tau:g}"
    return "LS"


@dataclass(frozen=True)
class SimConfig:
    example: int = 1
    n: int = 200
    reps: int = 100
    dist: str = "normal"
    seed: int = 20240101
    h: float | None = None
    h1: float | None = None
    q: int = 9
    methods: tuple = ()
    lambda_grid: tuple | None = None
    n_grid: int = 200
    n_jobs: int = 1

    def __post_init__(self):
        if self.example not in (1, 2):
            raise ValueError("example must be 1 or 2")
        if self.n < 50:
            raise ValueError("n must be at least 50")
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if self.h is None:
            object.__setattr__(self, "h", DEFAULT_H[self.example])
        if not self.h > 0 or (self.h1 is not None and not self.h1 > 0):
            raise ValueError("bandwidths must be positive")
        if not 1 <= self.q <= 19:
            raise ValueError("q must lie in [1, 19]")
        _dist(self.dist)
        methods = tuple(self.methods) or (
            ("LS", "CQR", "QR0.25", "QR0.5", "QR0.75") if self.example == 1 else ("LS", "CQR"))
        labels = [_method_label(m, self.q) for m in methods]
        if "LS" not in labels:
            labels = ["LS"] + labels
        object.__setattr__(self, "methods", tuple(dict.fromkeys(labels)))

    @property
    def stage1_bandwidth(self) -> float:
        return self.h if self.h1 is None else self.h1


def _fit_example1(cfg: SimConfig, data: Dataset, method: str, grid):
    kind, q, tau = parse_method(method, cfg.q)
    h1 = cfg.stage1_bandwidth
    if kind == "LS":
        fit = fit_semi_ls(data, h1=h1, h3=cfg.h, grid=grid)
    elif kind == "CQR":
        fit = fit_semi_cqr(data, q, h1=h1, h3=cfg.h, grid=grid)
    else:
        fit = fit_semi_qr(data, tau, h1=h1, h3=cfg.h, grid=grid)
    return fit.beta, ase(fit.curves.alpha, alpha_true(grid))


def _select_example2(cfg: SimConfig, data: Dataset, method: str):
    """Returns ``(beta_selected, beta_unpenalized)`` for a one-step estimator."""
    kind, q, tau = parse_method(method, cfg.q)
    h1 = cfg.stage1_bandwidth
    lam = None if cfg.lambda_grid is None else np.asarray(cfg.lambda_grid, dtype=float)
    if kind == "LS":
        curves, _, _ = stage1_curves_ls(data, h1)
        beta0, _ = stage2_ls(data, curves)
    else:
        taus = QuantileGrid(q).taus if kind == "CQR" else np.array([tau])
        curves, _, _, _ = _composite.stage1(data, taus, h1, "epanechnikov")
        beta0, _ = _composite.stage2(data, curves, taus)
    res = bic_select(data, curves, beta0, q, lam, method=kind, tau=tau or 0.5)
    return res.beta, beta0


def _replicate(cfg: SimConfig, rep: int):
    rng = np.random.default_rng([cfg.seed, rep])
    out = {}
    if cfg.example == 1:
        data = gen_example1(cfg.n, cfg.dist, rng)
        grid = np.linspace(0.0, 1.0, cfg.n_grid)
        for m in cfg.methods:
            try:
                out[m] = _fit_example1(cfg, data, m, grid)
            except (SemiCQRError, ValueError, np.linalg.LinAlgError) as exc:
                out[m] = exc
    else:
        data = gen_example2(cfg.n, cfg.dist, rng)
        for m in cfg.methods:
            try:
                out[m] = _select_example2(cfg, data, m)
            except (SemiCQRError, ValueError, np.linalg.LinAlgError) as exc:
                out[m] = exc
    return out


@dataclass
class BenchReport:
    """Aggregated Monte Carlo results.

    ``metrics[method]`` maps metric names to floats or per-coefficient lists.
    Efficiency ratios are ``MSE(LS) / MSE(method)`` and ``ASE(LS) / ASE(method)``,
    so values above 1 favor the method. ``failures`` lists
    ``(rep, method, message)`` for replications that raised.
    """

    config: SimConfig
    metrics: dict
    failures: list = field(default_factory=list)
    betas: dict = field(default_factory=dict)

    def rows(self):
        """Flat ``(method, metric, index, value)`` records."""
        out = []
        for m, mets in self.metrics.items():
            for key, val in mets.items():
                if isinstance(val, (list, tuple, np.ndarray)):
                    for j, v in enumerate(val):
                        out.append((m, key, j + 1, float(v)))
                else:
                    out.append((m, key, 0, float(val)))
        return out

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["method", "metric", "index", "value"])
            for r in self.rows():
                w.writerow([r[0], r[1], r[2], repr(r[3])])

    def to_keyvalue(self) -> str:
        lines = [f"config.{k}={v}" for k, v in asdict(self.config).items()]
        for m, key, j, v in self.rows():
            name = f"{m}.{key}" + (f".{j}" if j else "")
            lines.append(f"{name}={v!r}")
        lines.append(f"failures={len(self.failures)}")
        for rep, m, msg in self.failures:
            lines.append(f"failure.{rep}.{m}={msg}")
        return "\n".join(lines) + "\n"

    def format_table(self) -> str:
        cfg = self.config
        head = (f"Example {cfg.example}: n={cfg.n}, reps={cfg.reps}, error={cfg.dist}, "
                f"h={cfg.h:g}, q={cfg.q}")
        lines = [head, ""]
        if cfg.example == 1:
            d2 = len(BETA1)
            lines.append("Bias (SD)")
            lines.append(f"{'method':<10}" + "".join(f"{'beta' + str(j + 1):>20}" for j in range(d2)))
            for m, mets in self.metrics.items():
                cells = "".join(f"{b:>+10.3f} ({s:.3f})" for b, s in zip(mets["bias"], mets["sd"]))
                lines.append(f"{m:<10}{cells}")
            lines += ["", "RMSE = MSE(LS) / MSE(method)"]
            for m, mets in self.metrics.items():
                if m == "LS":
                    continue
                lines.append(f"{m:<10}" + "".join(f"{v:>12.3f}" for v in mets["rmse"]))
            lines += ["", "RASE = ASE(LS) / ASE(method): mean (SD)"]
            for m, mets in self.metrics.items():
                if m == "LS":
                    continue
                lines.append(f"{m:<10}{mets['rase_mean']:>12.3f} ({mets['rase_sd']:.3f})")
        else:
            lines.append(f"{'method':<14}{'RGMSE med (MAD)':>20}{'C':>8}{'IC':>8}"
                         f"{'U-fit':>8}{'C-fit':>8}{'O-fit':>8}")
            for m, mets in self.metrics.items():
                lines.append(f"{'One-step ' + m:<14}{mets['rgmse_median']:>11.3f} "
                             f"({mets['rgmse_mad']:.3f}){mets['C']:>8.3f}{mets['IC']:>8.3f}"
                             f"{mets['U-fit']:>8.3f}{mets['C-fit']:>8.3f}{mets['O-fit']:>8.3f}")
        if self.failures:
            lines += ["", f"{len(self.failures)} failed method-replications"]
        return "\n".join(lines) + "\n"


def _aggregate_example1(cfg, results):
    metrics, betas = {}, {}
    ls_ok = {r for r, out in results.items() if not isinstance(out["LS"], Exception)}
    for m in cfg.methods:
        ok = sorted(r for r, out in results.items() if not isinstance(out[m], Exception))
        B = np.array([results[r][m][0] for r in ok]).reshape(len(ok), len(BETA1))
        betas[m] = B
        err = B - BETA1
        mse = np.mean(err ** 2, axis=0) if ok else np.full(len(BETA1), np.nan)
        mets = {
            "reps": float(len(ok)),
            "bias": err.mean(axis=0) if ok else np.full(len(BETA1), np.nan),
            "sd": B.std(axis=0, ddof=1) if len(ok) > 1 else np.zeros(len(BETA1)),
            "mse": mse,
            "ase_mean": float(np.mean([results[r][m][1] for r in ok])) if ok else math.nan,
        }
        paired = sorted(set(ok) & ls_ok)
        if m != "LS":
            ls_err = np.array([results[r]["LS"][0] for r in paired]).reshape(-1, len(BETA1)) - BETA1
            me_err = np.array([results[r][m][0] for r in paired]).reshape(-1, len(BETA1)) - BETA1
            if paired:
                mse_ls, mse_m = np.mean(ls_err ** 2, axis=0), np.mean(me_err ** 2, axis=0)
                mets["rmse"] = np.array([_ratio(a, b) for a, b in zip(mse_ls, mse_m)])
            else:
                mets["rmse"] = np.full(len(BETA1), np.nan)
            ratios = np.array([rase(results[r]["LS"][1], results[r][m][1]) for r in paired])
            mets["rase_mean"] = float(ratios.mean()) if len(ratios) else math.nan
            mets["rase_sd"] = float(ratios.std(ddof=1)) if len(ratios) > 1 else 0.0
        metrics[m] = mets
    return metrics, betas


def _aggregate_example2(cfg, results):
    metrics, betas = {}, {}
    cov = z_second_moment(2)
    ls_ok = {r for r, out in results.items() if not isinstance(out["LS"], Exception)}
    for m in cfg.methods:
        ok = sorted(set(r for r, out in results.items()
                        if not isinstance(out[m], Exception)) & ls_ok)
        B = np.array([results[r][m][0] for r in ok]).reshape(len(ok), len(BETA2))
        betas[m] = B
        rg = np.array([rgmse(results[r][m][0], results[r]["LS"][1], BETA2, cov) for r in ok])
        mets = {"reps": float(len(ok))}
        mets["rgmse_median"] = float(np.median(rg)) if len(rg) else math.nan
        mets["rgmse_mad"] = float(median_abs_deviation(rg, scale="normal")) if len(rg) else math.nan
        mets.update(selection_metrics(B, BETA2) if len(ok) else
                    {k: math.nan for k in ("C", "IC", "U-fit", "C-fit", "O-fit")})
        metrics[m] = mets
    return metrics, betas


def run_monte_carlo(config: SimConfig, progress=None) -> BenchReport:
    """Run every replication and aggregate.

    ``progress`` is an optional callable receiving the number of finished
    replications.
    """
    from ._composite import map_points

    done = [0]

    def one(rep):
        res = _replicate(config, rep)
        done[0] += 1
        if progress is not None:
            progress(done[0])
        return res

    outs = map_points(one, range(config.reps), config.n_jobs)
    results = dict(enumerate(outs))
    failures = [(r, m, f"{type(v).__name__}: {v}") for r, out in results.items()
                for m, v in out.items() if isinstance(v, Exception)]
    if config.example == 1:
        metrics, betas = _aggregate_example1(config, results)
    else:
        metrics, betas = _aggregate_example2(config, results)
    return BenchReport(config, metrics, failures, betas)
