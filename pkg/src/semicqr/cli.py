"""Command-line interface: ``semicqr {fit,select,simulate,efficiency}``.

Exit codes: 0 success, 2 input error, 3 numerical failure.

Settings come from command-line flags, then an optional JSON ``--config``
file, then built-in defaults, in that order of precedence. Every effective
setting is echoed into ``metadata.txt``.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from .efficiency import BUILTIN_DISTRIBUTIONS, are_report, get_distribution
from .exceptions import DatasetError, InputError, InvalidBandwidthError, SemiCQRError
from .lp_core import check_loss
from .model import Dataset, QuantileGrid, default_grid
from .semi_cqr import fit_semi_cqr
from .semi_ls import fit_semi_ls
from .semi_qr import fit_semi_qr
from .sparse_select import bic_select

__all__ = [
    "main",
    "parse_roles",
    "read_table",
    "prepare_design",
    "cv_bandwidth",
    "fit_method",
    "mape",
]

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3

DEFAULTS = {
    "common": {"method": "cqr", "q": 9, "tau": 0.5, "h": None, "h1_factor": None,
               "h_grid": None, "folds": 5, "seed": 1, "train_rows": None,
               "standardize": True, "categorical": "", "reference": "",
               "baseline": True, "threads": 1, "n_grid": 200},
    "select": {"lambda_grid": None},
    "simulate": {"example": 1, "n": 200, "reps": 100, "dist": "normal", "seed": 20240101,
                 "h": None, "h1": None, "q": 9, "methods": "", "lambda_grid": None,
                 "full": False, "threads": 1},
    "efficiency": {"dist": ",".join(BUILTIN_DISTRIBUTIONS), "q": "1,5,9,19,99",
                   "h_ls": None, "tau": 0.5},
}


# ------------------------------------------------------------------ CSV input


def read_table(path):
    """Read a header-first CSV into ``(header, rows)``; rows keep their file line numbers."""
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise InputError(f"cannot open {path}: {exc.strerror}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError("empty file", line=1) from None
        except csv.Error as exc:
            raise InputError(str(exc), line=1) from None
        header = [h.strip() for h in header]
        if len(set(header)) != len(header) or any(not h for h in header):
            raise InputError("header has empty or duplicate column names", line=1)
        rows = []
        while True:
            try:
                rec = next(reader)
            except StopIteration:
                break
            except csv.Error as exc:
                raise InputError(str(exc), line=reader.line_num) from None
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise InputError(f"expected {len(header)} fields, found {len(rec)}",
                                 line=reader.line_num)
            rows.append((reader.line_num, [c.strip() for c in rec]))
    if not rows:
        raise InputError("no data rows", line=2)
    return header, rows


def parse_roles(spec: str, header):
    """Parse ``"u=col, x=a+b, z=rest, y=col"`` into a role dict.

    ``rest`` means every column not named in another role. ``x`` and ``z``
    may be omitted (empty); ``u`` and ``y`` are required.
    """
    roles = {}
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise InputError(f"role entry {part!r} is not of the form role=columns")
        key, val = (s.strip() for s in part.split("=", 1))
        key = key.lower()
        if key not in ("u", "x", "z", "y"):
            raise InputError(f"unknown role {key!r}; roles are u, x, z, y")
        if key in roles:
            raise InputError(f"role {key!r} declared twice")
        roles[key] = [c.strip() for c in val.split("+") if c.strip()] if val else []
    for need in ("u", "y"):
        if len(roles.get(need, [])) != 1:
            raise InputError(f"role {need!r} must name exactly one column")
    named = [c for k, cols in roles.items() for c in cols if c != "rest"]
    rest = [c for c in header if c not in named]
    for k in ("x", "z"):
        cols = roles.get(k, [])
        if "rest" in cols:
            if any(c == "rest" for kk in ("x", "z") if kk != k for c in roles.get(kk, [])):
                raise InputError("only one role may use 'rest'")
            cols = [c for c in cols if c != "rest"] + rest
        roles[k] = cols
    for k, cols in roles.items():
        for c in cols:
            if c not in header:
                raise InputError(f"column {c!r} (role {k}) is not in the header")
    used = [c for cols in roles.values() for c in cols]
    dup = {c for c in used if used.count(c) > 1}
    if dup:
        raise InputError(f"columns assigned to more than one role: {sorted(dup)}")
    return roles


def _parse_reference(spec: str):
    out = {}
    for part in (spec or "").split(","):
        part = part.strip()
        if part:
            if "=" not in part:
                raise InputError(f"reference entry {part!r} is not of the form column=level")
            k, v = part.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def _numeric(rows, j, name):
    out = np.empty(len(rows))
    for i, (line, rec) in enumerate(rows):
        try:
            out[i] = float(rec[j])
        except ValueError:
            raise InputError(f"column {name!r}: {rec[j]!r} is not a number", line=line) from None
        if not math.isfinite(out[i]):
            raise InputError(f"column {name!r}: non-finite value", line=line)
    return out


@dataclass
class Design:
    """Numeric design built from a table with train-only standardization."""

    u: np.ndarray
    x: np.ndarray
    z: np.ndarray
    y: np.ndarray
    x_names: list
    z_names: list
    train: np.ndarray               # boolean mask
    scaling: dict = field(default_factory=dict)   # column -> (mean, scale)
    dummies: dict = field(default_factory=dict)   # column -> (reference, levels)

    def dataset(self, mask, baseline=True) -> Dataset:
        return Dataset(self.u[mask], self.x[mask], self.z[mask], self.y[mask],
                       include_baseline=baseline)


def prepare_design(header, rows, roles, categorical=(), reference=None, train_rows=None,
                   standardize=True) -> Design:
    """Dummy-code categorical z columns and standardize numeric covariates.

    Categorical columns become k - 1 indicators named ``col=level``; the
    reference level is the first level in file order unless overridden.
    Means and scales come from the training rows only.
    """
    reference = reference or {}
    idx = {c: j for j, c in enumerate(header)}
    n = len(rows)
    ntr = n if train_rows is None else int(train_rows)
    if not 1 <= ntr <= n:
        raise InputError(f"train_rows must lie in 1..{n}")
    train = np.zeros(n, dtype=bool)
    train[:ntr] = True
    categorical = [c for c in categorical if c]
    for c in categorical:
        if c not in idx:
            raise InputError(f"categorical column {c!r} is not in the header")
        if c not in roles["z"]:
            raise InputError(f"categorical column {c!r} must have role z")
    for c in reference:
        if c not in categorical:
            raise InputError(f"reference given for non-categorical column {c!r}")
    u = _numeric(rows, idx[roles["u"][0]], roles["u"][0])
    y = _numeric(rows, idx[roles["y"][0]], roles["y"][0])
    scaling, dummies = {}, {}

    def scaled(col, values):
        if not standardize:
            return values
        m = float(values[train].mean())
        s = float(values[train].std(ddof=1)) if ntr > 1 else 0.0
        if not s > 0:
            raise InputError(f"column {col!r} is constant on the training rows "
                             "and cannot be standardized")
        scaling[col] = (m, s)
        return (values - m) / s

    xcols, xnames = [], []
    for c in roles["x"]:
        xcols.append(scaled(c, _numeric(rows, idx[c], c)))
        xnames.append(c)
    zcols, znames = [], []
    for c in roles["z"]:
        if c in categorical:
            vals = [rec[idx[c]] for _, rec in rows]
            levels = list(dict.fromkeys(vals))
            ref = reference.get(c, levels[0])
            if ref not in levels:
                raise InputError(f"reference level {ref!r} does not occur in column {c!r}")
            dummies[c] = (ref, levels)
            for lev in levels:
                if lev == ref:
                    continue
                col = np.array([v == lev for v in vals], dtype=float)
                if not col[train].any() or col[train].all():
                    raise InputError(f"indicator {c}={lev} is constant on the training rows")
                zcols.append(col)
                znames.append(f"{c}={lev}")
        else:
            zcols.append(scaled(c, _numeric(rows, idx[c], c)))
            znames.append(c)
    x = np.column_stack(xcols) if xcols else np.zeros((n, 0))
    z = np.column_stack(zcols) if zcols else np.zeros((n, 0))
    return Design(u, x, z, y, xnames, znames, train, scaling, dummies)


# ------------------------------------------------------------- fitting helpers


def fit_method(data: Dataset, method: str, h: float, h1=None, q=9, tau=0.5, grid=None,
               n_jobs=1):
    method = method.lower()
    h1 = h if h1 is None else h1
    if method == "ls":
        return fit_semi_ls(data, h1=h1, h3=h, grid=grid, n_jobs=n_jobs)
    if method == "qr":
        return fit_semi_qr(data, tau, h1=h1, h3=h, grid=grid, n_jobs=n_jobs)
    if method == "cqr":
        return fit_semi_cqr(data, q, h1=h1, h3=h, grid=grid, n_jobs=n_jobs)
    raise InputError(f"unknown method {method!r}; choose ls, qr or cqr")


def _prediction_loss(fit, data: Dataset, method, q, tau) -> float:
    """Mean out-of-sample loss: squared (LS), check (QR) or composite check (CQR)."""
    vals = fit.curves.evaluate(data.u, extrapolate="clamp")
    if vals.ndim == 1:
        vals = vals[:, None]
    K = fit.curves.q
    lin = (np.einsum("ij,ji->i", data.x, vals[K:]) if data.d1 else 0.0) + (
        data.z @ fit.beta if data.d2 else 0.0)
    method = method.lower()
    if method == "ls":
        r = data.y - vals[0] - lin
        return float(np.mean(r * r))
    taus = QuantileGrid(q).taus if method == "cqr" else np.array([tau])
    r = data.y[None, :] - vals[:K] - lin
    return float(np.mean(np.sum(check_loss(r, taus[:, None]), axis=0)))


def cv_bandwidth(data: Dataset, method: str, h_grid, fold_count: int = 5, seed: int = 1,
                 q: int = 9, tau: float = 0.5, h1_factor=None, n_jobs=1):
    """K-fold cross-validated bandwidth.

    Folds are contiguous blocks of a seeded random permutation. The score is
    the mean out-of-fold squared loss (LS) or check loss (QR, CQR). A
    bandwidth for which any fold fails is skipped; ties go to the larger h.
    Returns ``(h, scores)`` with ``scores[h]`` NaN for skipped values.
    """
    h_grid = sorted({float(h) for h in h_grid})
    if not h_grid:
        raise InputError("bandwidth grid is empty")
    if any(not h > 0 for h in h_grid):
        raise InvalidBandwidthError("bandwidths must be positive")
    if fold_count < 2 or fold_count > data.n:
        raise InputError(f"fold count must lie in 2..{data.n}")
    perm = np.random.default_rng(seed).permutation(data.n)
    folds = np.array_split(perm, fold_count)
    scores = {}
    for h in h_grid:
        total, ok = 0.0, True
        for f in folds:
            mask = np.ones(data.n, dtype=bool)
            mask[f] = False
            tr, te = data.subset(np.flatnonzero(mask)), data.subset(f)
            try:
                h1 = None if h1_factor is None else h * h1_factor
                fit = fit_method(tr, method, h, h1, q, tau,
                                 grid=default_grid(tr.u, 101), n_jobs=n_jobs)
                total += _prediction_loss(fit, te, method, q, tau) * len(f)
            except (SemiCQRError, np.linalg.LinAlgError):
                ok = False
                break
        scores[h] = total / data.n if ok else math.nan
    valid = [h for h in h_grid if not math.isnan(scores[h])]
    if not valid:
        raise SemiCQRError("every bandwidth in the grid failed in some fold")
    best = min(scores[h] for h in valid)
    tie = 1e-12 * (1 + abs(best))
    chosen = max(h for h in valid if scores[h] <= best + tie)
    return chosen, scores


def mape(y, yhat) -> float:
    """Median absolute prediction error."""
    return float(np.median(np.abs(np.asarray(y, float) - np.asarray(yhat, float))))


# ------------------------------------------------------------------- settings


def _parse_float_list(text, name):
    if text is None:
        return None
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    try:
        return [float(v) for v in str(text).replace(";", ",").split(",") if v.strip()]
    except ValueError:
        raise InputError(f"{name} must be a comma-separated list of numbers") from None


def _settings(args, section):
    """Merge flags > config file > defaults."""
    cfg = {}
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except OSError as exc:
            raise InputError(f"cannot read config {args.config}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise InputError(f"config {args.config}: {exc.msg}", line=exc.lineno) from None
        if not isinstance(cfg, dict):
            raise InputError("config file must hold a JSON object")
    defaults = {}
    if section in ("fit", "select"):
        defaults.update(DEFAULTS["common"])
    defaults.update(DEFAULTS.get(section, {}))
    unknown = set(cfg) - set(defaults) - {"input", "roles", "out"}
    if unknown:
        raise InputError(f"unknown config keys: {sorted(unknown)}")
    out = {}
    for key in set(defaults) | {"input", "roles", "out"}:
        flag = getattr(args, key, None)
        if flag is not None:
            out[key] = flag
        elif key in cfg:
            out[key] = cfg[key]
        else:
            out[key] = defaults.get(key)
    return out


def _write_kv(path, items):
    with open(path, "w") as fh:
        for k, v in items:
            fh.write(f"{k}={v}\n")


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


def _out_dir(path):
    if not path:
        raise InputError("an output directory (--out) is required")
    os.makedirs(path, exist_ok=True)
    return path


# -------------------------------------------------------------------- commands


def _load(s):
    if not s.get("input"):
        raise InputError("an input CSV (--input) is required")
    if not s.get("roles"):
        raise InputError("column roles (--roles) are required")
    header, rows = read_table(s["input"])
    roles = parse_roles(s["roles"], header)
    cat = [c.strip() for c in str(s["categorical"] or "").split(",") if c.strip()]
    design = prepare_design(header, rows, roles, cat, _parse_reference(s["reference"]),
                            s["train_rows"], bool(s["standardize"]))
    data = design.dataset(design.train, bool(s["baseline"]))
    return design, data


def _bandwidth(s, data):
    method = s["method"].lower()
    if s["h"] is not None:
        h = float(s["h"])
        if not h > 0:
            raise InvalidBandwidthError("bandwidth must be positive")
        return h, {}
    grid = _parse_float_list(s["h_grid"], "h_grid")
    if grid is None:
        span = float(data.u.max() - data.u.min())
        grid = [span * f for f in (0.1, 0.15, 0.2, 0.25, 0.3, 0.4)]
    h1_factor = None if s["h1_factor"] is None else float(s["h1_factor"])
    return cv_bandwidth(data, method, grid, int(s["folds"]), int(s["seed"]), int(s["q"]),
                        float(s["tau"]), h1_factor, int(s["threads"]))


def _curves_rows(fit):
    c = fit.curves
    return [[float(c.grid[i]), float(c.alpha0[i])] + [float(v) for v in c.alpha[:, i]]
            for i in range(len(c.grid))]


def _test_report(design, fit):
    test = ~design.train
    if not test.any():
        return []
    u = design.u[test]
    lo, hi = float(fit.curves.grid.min()), float(fit.curves.grid.max())
    clamped = int(np.sum((u < lo) | (u > hi)))
    yhat = fit.predict(u, design.x[test], design.z[test], extrapolate="clamp")
    return [("n_test", int(test.sum())), ("mape", mape(design.y[test], yhat)),
            ("test_points_clamped", clamped)]


def _common_metadata(s, design, h, cv_scores):
    items = [(f"setting.{k}", s[k]) for k in sorted(s)]
    items.append(("h_used", h))
    for hh, sc in sorted(cv_scores.items()):
        items.append((f"cv_score.{hh!r}", sc))
    for c, (m, sd) in design.scaling.items():
        items += [(f"standardize.{c}.mean", repr(m)), (f"standardize.{c}.scale", repr(sd))]
    for c, (ref, levels) in design.dummies.items():
        items += [(f"dummy.{c}.reference", ref), (f"dummy.{c}.levels", "|".join(levels))]
    items += [("x_columns", "|".join(design.x_names)), ("z_columns", "|".join(design.z_names)),
              ("n_train", int(design.train.sum()))]
    return items


def cmd_fit(args) -> int:
    s = _settings(args, "fit")
    out = _out_dir(s["out"])
    design, data = _load(s)
    h, scores = _bandwidth(s, data)
    grid = default_grid(data.u, int(s["n_grid"]))
    fit = fit_method(data, s["method"], h, None if s["h1_factor"] is None else h * float(s["h1_factor"]),
                     int(s["q"]), float(s["tau"]), grid, int(s["threads"]))
    _write_csv(os.path.join(out, "beta.csv"), ["variable", "beta"],
               [[nm, float(b)] for nm, b in zip(design.z_names, fit.beta)])
    _write_csv(os.path.join(out, "curves.csv"),
               ["grid", "alpha0"] + [f"alpha_{j + 1}" for j in range(data.d1)], _curves_rows(fit))
    report = [("method", fit.method), ("q", fit.q), ("h_stage1", fit.h_stage1),
              ("h_stage3", fit.h_stage3)] + [(f"objective_{k}", v) for k, v in fit.objectives.items()]
    report += _test_report(design, fit)
    _write_csv(os.path.join(out, "report.csv"), ["metric", "value"], report)
    _write_kv(os.path.join(out, "metadata.txt"), _common_metadata(s, design, h, scores))
    for k, v in report:
        print(f"{k}={v}")
    return EXIT_OK


def cmd_select(args) -> int:
    s = _settings(args, "select")
    out = _out_dir(s["out"])
    design, data = _load(s)
    if data.d2 == 0:
        raise InputError("variable selection needs at least one z column")
    h, scores = _bandwidth(s, data)
    grid = default_grid(data.u, int(s["n_grid"]))
    method = s["method"].lower()
    h1 = None if s["h1_factor"] is None else h * float(s["h1_factor"])
    fit = fit_method(data, method, h, h1, int(s["q"]), float(s["tau"]), grid, int(s["threads"]))
    lam = _parse_float_list(s["lambda_grid"], "lambda_grid")
    sel = bic_select(data, fit.stage1_curves, fit.beta, int(s["q"]), lam, method=method.upper(),
                     tau=float(s["tau"]), n_jobs=int(s["threads"]))
    # final curves: local refit given the selected parametric part
    if method == "ls":
        from .semi_ls import stage3_ls
        curves, _ = stage3_ls(data, sel.beta, h, grid=grid, n_jobs=int(s["threads"]))
    else:
        from ._composite import stage3
        taus = QuantileGrid(int(s["q"])).taus if method == "cqr" else np.array([float(s["tau"])])
        curves, _ = stage3(data, sel.beta, taus, h, "epanechnikov", grid, int(s["threads"]))
    from dataclasses import replace
    final = replace(fit, curves=curves, beta=sel.beta)
    _write_csv(os.path.join(out, "beta.csv"), ["variable", "beta", "unpenalized"],
               [[nm, float(b), float(b0)] for nm, b, b0 in zip(design.z_names, sel.beta, fit.beta)])
    _write_csv(os.path.join(out, "curves.csv"),
               ["grid", "alpha0"] + [f"alpha_{j + 1}" for j in range(data.d1)], _curves_rows(final))
    _write_csv(os.path.join(out, "path.csv"),
               ["lambda", "df", "loss", "bic"] + design.z_names,
               [[p.lam, p.df, p.loss, p.bic] + [float(v) for v in p.beta] for p in sel.path])
    report = [("method", fit.method), ("q", fit.q), ("h", h), ("lambda", sel.lam),
              ("df", sel.df), ("bic", sel.bic), ("loss_clamped", int(sel.loss_clamped)),
              ("selected", "|".join(design.z_names[j] for j in sel.selected))]
    report += _test_report(design, final)
    _write_csv(os.path.join(out, "report.csv"), ["metric", "value"], report)
    _write_kv(os.path.join(out, "metadata.txt"), _common_metadata(s, design, h, scores))
    for k, v in report:
        print(f"{k}={v}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    from .simbench import SimConfig, run_monte_carlo

    s = _settings(args, "simulate")
    out = _out_dir(s["out"])
    reps = 400 if s["full"] else int(s["reps"])
    methods = tuple(m.strip() for m in str(s["methods"] or "").split(",") if m.strip())
    lam = _parse_float_list(s["lambda_grid"], "lambda_grid")
    try:
        cfg = SimConfig(example=int(s["example"]), n=int(s["n"]), reps=reps, dist=str(s["dist"]),
                        seed=int(s["seed"]), h=None if s["h"] is None else float(s["h"]),
                        h1=None if s["h1"] is None else float(s["h1"]), q=int(s["q"]),
                        methods=methods, lambda_grid=None if lam is None else tuple(lam),
                        n_jobs=int(s["threads"]))
    except ValueError as exc:
        raise InputError(str(exc)) from None
    report = run_monte_carlo(cfg)
    report.to_csv(os.path.join(out, "report.csv"))
    with open(os.path.join(out, "report.txt"), "w") as fh:
        fh.write(report.to_keyvalue())
    table = report.format_table()
    with open(os.path.join(out, "tables.txt"), "w") as fh:
        fh.write(table)
    _write_kv(os.path.join(out, "metadata.txt"), [(f"setting.{k}", s[k]) for k in sorted(s)])
    print(table, end="")
    return EXIT_OK


def cmd_efficiency(args) -> int:
    from .efficiency import bandwidth_qr

    s = _settings(args, "efficiency")
    names = [d.strip() for d in str(s["dist"]).split(",") if d.strip()]
    try:
        dists = [get_distribution(nm) for nm in names]
    except ValueError as exc:
        raise InputError(str(exc)) from None
    try:
        qs = [int(v) for v in str(s["q"]).split(",") if v.strip()]
    except ValueError:
        raise InputError("q must be a comma-separated list of integers") from None
    if not qs or any(q < 1 for q in qs):
        raise InputError("q values must be positive integers")
    rows = []
    for d in dists:
        for r in are_report(d, qs):
            rows.append([r.distribution, r.q, r.r1, r.r2, r.are_curves, r.are_beta,
                         r.bandwidth_ratio])
    header = ["distribution", "q", "r1", "r2", "are_curves", "are_beta", "h_cqr_over_h_ls"]
    if s.get("out"):
        out = _out_dir(s["out"])
        _write_csv(os.path.join(out, "efficiency.csv"), header, rows)
        extra = []
        if s["h_ls"] is not None:
            for d in dists:
                for variant in ("printed", "squared"):
                    extra.append((f"h_qr.{d.name}.{variant}",
                                  bandwidth_qr(float(s["h_ls"]), d, float(s["tau"]), variant)))
        _write_kv(os.path.join(out, "metadata.txt"),
                  [(f"setting.{k}", s[k]) for k in sorted(s)] + extra)
    print(f"{'distribution':<12}{'q':>5}{'R1':>12}{'R2':>12}{'ARE curves':>12}{'ARE beta':>12}")
    for r in rows:
        print(f"{r[0]:<12}{r[1]:>5}{r[2]:>12.5f}{r[3]:>12.5f}{r[4]:>12.5f}{r[5]:>12.5f}")
    return EXIT_OK


# ---------------------------------------------------------------------- parser


def _bool(text):
    t = str(text).lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def build_parser():
    p = argparse.ArgumentParser(prog="semicqr", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def data_args(sp):
        sp.add_argument("--input", help="CSV file with a header row")
        sp.add_argument("--roles", help='column roles, e.g. "u=age, x=a+b, z=rest, y=resp"')
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--config", help="JSON file of settings (flags take precedence)")
        sp.add_argument("--method", choices=["ls", "qr", "cqr"])
        sp.add_argument("--q", type=int, help="number of quantile levels for cqr")
        sp.add_argument("--tau", type=float, help="quantile level for qr")
        sp.add_argument("--h", type=float, help="bandwidth (skips cross-validation)")
        sp.add_argument("--h1-factor", dest="h1_factor", type=float,
                        help="stage-1 bandwidth as a multiple of h (default 1)")
        sp.add_argument("--h-grid", dest="h_grid", help="comma-separated CV bandwidth grid")
        sp.add_argument("--folds", type=int, help="cross-validation folds")
        sp.add_argument("--seed", type=int, help="seed for fold assignment")
        sp.add_argument("--train-rows", dest="train_rows", type=int,
                        help="use the first N rows for fitting, the rest for testing")
        sp.add_argument("--standardize", type=_bool, help="standardize numeric covariates")
        sp.add_argument("--categorical", help="comma-separated categorical z columns")
        sp.add_argument("--reference", help='reference levels, e.g. "smoke=3,vit=3"')
        sp.add_argument("--baseline", type=_bool, help="include an intercept function")
        sp.add_argument("--threads", type=int, help="worker threads")
        sp.add_argument("--n-grid", dest="n_grid", type=int, help="output grid size")

    f = sub.add_parser("fit", help="fit semi-LS / semi-QR / semi-CQR")
    data_args(f)
    f.set_defaults(func=cmd_fit)

    s = sub.add_parser("select", help="one-step sparse estimation with BIC")
    data_args(s)
    s.add_argument("--lambda-grid", dest="lambda_grid", help="comma-separated lambda values")
    s.set_defaults(func=cmd_select)

    m = sub.add_parser("simulate", help="Monte Carlo reproduction of the simulated examples")
    m.add_argument("--example", type=int, choices=[1, 2])
    m.add_argument("--n", type=int)
    m.add_argument("--reps", type=int)
    m.add_argument("--full", action="store_const", const=True, help="400 replications")
    m.add_argument("--dist", help=f"error distribution ({', '.join(BUILTIN_DISTRIBUTIONS)})")
    m.add_argument("--seed", type=int)
    m.add_argument("--h", type=float)
    m.add_argument("--h1", type=float)
    m.add_argument("--q", type=int)
    m.add_argument("--methods", help="comma-separated, e.g. LS,CQR,QR0.25")
    m.add_argument("--lambda-grid", dest="lambda_grid")
    m.add_argument("--threads", type=int)
    m.add_argument("--out")
    m.add_argument("--config")
    m.set_defaults(func=cmd_simulate)

    e = sub.add_parser("efficiency", help="R1, R2 and ARE tables")
    e.add_argument("--dist", help="comma-separated distribution names")
    e.add_argument("--q", help="comma-separated q values")
    e.add_argument("--h-ls", dest="h_ls", type=float, help="LS bandwidth for conversions")
    e.add_argument("--tau", type=float)
    e.add_argument("--out")
    e.add_argument("--config")
    e.set_defaults(func=cmd_efficiency)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        return args.func(args)
    except (InputError, DatasetError, InvalidBandwidthError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SemiCQRError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
