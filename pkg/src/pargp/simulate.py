"""Synthetic GP data and the two simulation studies (CV versus ML, shell width)."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np
from scipy.linalg.lapack import dpotrf

from .cvloss import cv_loss_fields
from .covariance import cov_matrix
from .errors import NotPositiveDefinite
from .estimate import make_grid, ml_values
from .kriging import JITTER, build_system, krige
from .model import (CovParams, CovParamsFull, Observations, Rect, Role, child_rng,
                    split_roles)

Design = Literal["lhs", "space_filling", "uniform"]
FIELD_MAX_N = 20000
MAXIMIN_SWEEPS = 20


@dataclass(frozen=True)
class SimConfig:
    n: int
    domain: Rect = Rect(0.0, 1.0, 0.0, 1.0, True, True)
    xi: CovParamsFull = CovParamsFull(1.0, 0.1, 0.05)
    design: Design = "lhs"
    seed: int = 0
    replicates: int = 1

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if self.replicates < 1:
            raise ValueError(f"replicates must be >= 1, got {self.replicates}")
        if self.design not in ("lhs", "space_filling", "uniform"):
            raise ValueError(f"unknown design {self.design!r}")


def _to_rect(u: np.ndarray, rect: Rect) -> np.ndarray:
    return np.column_stack([rect.xmin + u[:, 0] * rect.width, rect.ymin + u[:, 1] * rect.height])


def _lhs(n: int, rng: np.random.Generator) -> np.ndarray:
    u = np.empty((n, 2))
    for k in range(2):
        u[:, k] = (rng.permutation(n) + rng.uniform(size=n)) / n
    return u


def maximin_improve(pts: np.ndarray, rect: Rect, rng: np.random.Generator,
                    sweeps: int = MAXIMIN_SWEEPS) -> np.ndarray:
    """Greedy point exchange raising the minimum pairwise distance.

    Each sweep makes ``n`` proposals. A proposal moves the point with the
    smallest nearest-neighbour distance to a uniform location in ``rect`` and
    is kept only if the design's minimum distance strictly increases.
    """
    pts = np.array(pts, dtype=float)
    n = pts.shape[0]
    if n < 2:
        return pts
    diff = pts[:, None, :] - pts[None, :, :]
    D = np.sqrt(np.sum(diff * diff, axis=-1))
    np.fill_diagonal(D, np.inf)
    nn = D.min(axis=1)
    for _ in range(sweeps * n):
        i = int(np.argmin(nn))
        cur = nn[i]
        p = _to_rect(rng.uniform(size=(1, 2)), rect)[0]
        d = np.sqrt(np.sum((pts - p) ** 2, axis=1))
        d[i] = np.inf
        nn_new = nn.copy()
        via_i = np.flatnonzero(D[:, i] == nn)
        via_i = via_i[via_i != i]
        if via_i.size:
            rows = D[via_i].copy()
            rows[:, i] = np.inf
            nn_new[via_i] = rows.min(axis=1)
        nn_new = np.minimum(nn_new, d)
        nn_new[i] = d.min()
        if nn_new.min() > cur:
            pts[i] = p
            D[i, :] = d
            D[:, i] = d
            nn = nn_new
    return pts


def design_points(n: int, rect: Rect, design: Design, rng: np.random.Generator) -> np.ndarray:
    if design == "uniform":
        return _to_rect(rng.uniform(size=(n, 2)), rect)
    pts = _to_rect(_lhs(n, rng), rect)
    if design == "space_filling":
        pts = maximin_improve(pts, rect, rng)
    return pts


def sample_design(config: SimConfig) -> np.ndarray:
    """Seeded sampling locations (n x 2) inside ``config.domain``."""
    return design_points(config.n, config.domain, config.design, child_rng(config.seed, 0))


def _field_factor(locs: np.ndarray, xi: CovParamsFull) -> np.ndarray:
    K = cov_matrix(locs, xi.theta)
    K *= xi.sigma2
    K.flat[:: K.shape[0] + 1] += xi.tau
    c, info = dpotrf(K.T, lower=1, clean=1, overwrite_a=1)
    if info != 0:
        K = cov_matrix(locs, xi.theta)
        K *= xi.sigma2
        K.flat[:: K.shape[0] + 1] += xi.tau + JITTER * xi.sigma2
        c, info = dpotrf(K.T, lower=1, clean=1, overwrite_a=1)
        if info != 0:
            raise NotPositiveDefinite(f"field covariance of {locs.shape[0]} points is not positive definite")
    return c


def simulate_field(locs, xi: CovParamsFull, seed: int | np.random.Generator,
                   replicates: int | None = None) -> np.ndarray:
    """Draws of ``y ~ N(0, sigma2 Sigma(theta) + tau I)`` as ``L z``.

    Returns a vector, or a ``(replicates, n)`` array when ``replicates`` is
    given. Without a nugget, coincident locations receive identical values.
    """
    locs = np.asarray(locs, dtype=float).reshape(-1, 2)
    n = locs.shape[0]
    if n > FIELD_MAX_N:
        raise ValueError(f"dense field simulation limited to {FIELD_MAX_N} locations, got {n}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    r = 1 if replicates is None else replicates
    uniq, inverse = np.unique(locs, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    if xi.tau == 0 and uniq.shape[0] < n:
        L = _field_factor(uniq, xi)
        z = rng.standard_normal((uniq.shape[0], r))
        y = (L @ z)[inverse]
    else:
        L = _field_factor(locs, xi)
        z = rng.standard_normal((n, r))
        y = L @ z
    y = np.ascontiguousarray(y.T)
    return y[0] if replicates is None else y


# ----------------------------------------------------------------------------
# CV versus ML


@dataclass
class StudyResult:
    rows: list[dict]
    config: dict

    def column(self, estimator: str, key: str) -> np.ndarray:
        return np.array([r[key] for r in self.rows if r["estimator"] == estimator], dtype=float)

    @property
    def estimators(self) -> list[str]:
        seen = []
        for r in self.rows:
            if r["estimator"] not in seen:
                seen.append(r["estimator"])
        return seen

    def summary(self) -> list[dict]:
        out = []
        for est in self.estimators:
            row = {"estimator": est}
            for key in ("theta", "lambda", "test_rmspe"):
                v = self.column(est, key)
                q1, med, q3 = np.quantile(v, [0.25, 0.5, 0.75])
                row.update({f"{key}_q25": q1, f"{key}_median": med, f"{key}_q75": q3})
            out.append(row)
        return out

    def to_csv(self) -> str:
        return _rows_csv(self.rows, ["replicate", "estimator", "theta", "lambda", "test_rmspe"])

    def summary_csv(self) -> str:
        rows = self.summary()
        return _rows_csv(rows, list(rows[0].keys()) if rows else ["estimator"])


def _rows_csv(rows: Sequence[dict], cols: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([repr(r[c]) if isinstance(r[c], float) else r[c] for c in cols])
    return buf.getvalue()


def _rmspe(pred: np.ndarray, obs: np.ndarray) -> float:
    r = pred - obs
    return math.sqrt(float(r @ r) / r.size)


def run_cv_ml_study(replicates: int = 400, seed: int = 0, n: int = 3000,
                    fractions: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3),
                    xi: CovParamsFull = CovParamsFull(1.0, 0.1, 0.05), grid: int = 15,
                    pooled: Sequence[int] = (4, 16), fresh_locations: bool = False,
                    ml_pool_validation: bool = False) -> StudyResult:
    """CV and ML grid-search estimates on simulated fields, with test RMSPEs.

    Per replicate: ``n`` LHS locations in the unit square, a random
    train/validation/test split, ``max(pooled)`` replicate fields (locations
    shared unless ``fresh_locations``; then only the base field is used for the
    pooled variants' locations too). ``CV`` and ``ML`` use the first field;
    ``CV(R)`` sums CV losses over the first ``R`` fields. ML is fitted with
    sigma2 fixed to its true value, on training data only unless
    ``ml_pool_validation``. Test predictions use training plus validation data
    of the first field for every estimator and for the true parameters.
    """
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    grid_set = make_grid(xi.theta, xi.tau / xi.sigma2, grid)
    cands = grid_set.candidates
    cands_full = [CovParamsFull(xi.sigma2, c.lam * xi.sigma2, c.theta) for c in cands]
    truth = xi.to_prediction_params()
    r_max = max([1, *pooled])
    unit = Rect(0.0, 1.0, 0.0, 1.0, True, True)
    rows: list[dict] = []
    for rep in range(replicates):
        rng = child_rng(seed, rep)
        locs = design_points(n, unit, "lhs", rng)
        roles = split_roles(n, fractions, int(rng.integers(2 ** 62)))
        if fresh_locations:
            fields = simulate_field(locs, xi, rng, replicates=1)
            extra = []
            for k in range(1, r_max):
                lk = design_points(n, unit, "lhs", rng)
                extra.append((lk, simulate_field(lk, xi, rng)))
        else:
            fields = simulate_field(locs, xi, rng, replicates=r_max)
        tr = roles == int(Role.TRAIN)
        va = roles == int(Role.VALIDATION)
        te = roles == int(Role.TEST)

        if fresh_locations:
            losses = np.empty((len(cands), r_max))
            for k, c in enumerate(cands):
                losses[k, 0] = cv_loss_fields(locs[tr], fields[:1, tr], locs[va], fields[:1, va], c)[0]
                for j, (lk, yk) in enumerate(extra, start=1):
                    losses[k, j] = cv_loss_fields(lk[tr], yk[None, tr], lk[va], yk[None, va], c)[0]
        else:
            losses = np.array([cv_loss_fields(locs[tr], fields[:, tr], locs[va], fields[:, va], c)
                               for c in cands])
        cum = np.cumsum(losses, axis=1)

        ml_mask = tr | va if ml_pool_validation else tr
        ml_idx = int(np.argmin(ml_values(Observations(locs[ml_mask], fields[0, ml_mask]), cands_full)))

        pred_mask = tr | va
        system_data = Observations(locs[pred_mask], fields[0, pred_mask])

        def test_rmspe(p: CovParams) -> float:
            return _rmspe(krige(build_system(system_data, p), locs[te]), fields[0, te])

        picks = [("CV", int(np.argmin(cum[:, 0])))]
        picks += [(f"CV({R})", int(np.argmin(cum[:, R - 1]))) for R in pooled if R <= r_max]
        picks.append(("ML", ml_idx))
        for name, k in picks:
            c = cands[k]
            rows.append({"replicate": rep, "estimator": name, "theta": c.theta, "lambda": c.lam,
                         "test_rmspe": test_rmspe(c)})
        rows.append({"replicate": rep, "estimator": "truth", "theta": truth.theta, "lambda": truth.lam,
                     "test_rmspe": test_rmspe(truth)})
    config = {"replicates": replicates, "seed": seed, "n": n, "fractions": list(fractions),
              "xi": xi.to_dict(), "grid": grid, "pooled": list(pooled),
              "fresh_locations": fresh_locations, "ml_pool_validation": ml_pool_validation}
    return StudyResult(rows, config)


# ----------------------------------------------------------------------------
# shell width / screening


@dataclass
class ScreeningResult:
    rows: list[dict]  # n, lambda, delta, replicate, ape (nan when the region is empty)
    config: dict

    def ape(self, n: int, lam: float, delta: float) -> np.ndarray:
        return np.array([r["ape"] for r in self.rows
                         if r["n"] == n and r["lambda"] == lam and r["delta"] == delta], dtype=float)

    def summary(self) -> list[dict]:
        out = []
        for n in self.config["n_values"]:
            for lam in self.config["lambda_values"]:
                for delta in self.config["delta_values"]:
                    a = self.ape(n, lam, delta)
                    ok = a[~np.isnan(a)]
                    if ok.size:
                        q1, med, q3 = np.quantile(ok, [0.25, 0.5, 0.75])
                    else:
                        q1 = med = q3 = math.nan
                    out.append({"n": n, "lambda": lam, "delta": delta, "count": int(ok.size),
                                "empty": int(a.size - ok.size), "q25": q1, "median": med, "q75": q3})
        return out

    def median(self, n: int, lam: float, delta: float) -> float:
        a = self.ape(n, lam, delta)
        a = a[~np.isnan(a)]
        return float(np.median(a)) if a.size else math.nan

    def to_csv(self) -> str:
        return _rows_csv(self.rows, ["n", "lambda", "delta", "replicate", "ape"])

    def summary_csv(self) -> str:
        return _rows_csv(self.summary(), ["n", "lambda", "delta", "count", "empty", "q25", "median", "q75"])


def run_screening_study(n_values: Sequence[int] = (50, 200),
                        delta_values: Sequence[float] = (0.0, 0.01, 0.02, 0.05, 0.1, 1.0),
                        lambda_values: Sequence[float] = (0.1, 0.5), replicates: int = 4000,
                        seed: int = 0, theta: float = 0.2, s0: tuple[float, float] = (0.99, 0.99),
                        design: Design = "space_filling", include_s0: bool = False) -> ScreeningResult:
    """Absolute prediction error at a corner location of ``[0,1]^2`` inside ``[0,2]^2``.

    Per ``n`` and replicate one design is drawn and one set of standard normal
    variates is shared by all ``lambda`` values, so cells differ only by
    ``lambda`` and ``delta``. Values, including the one at ``s0``, follow the
    observation model with sigma2 = 1 and tau = lambda. ``s0`` is predicted with
    the true parameters from the points in the sub-domain and its shell.
    """
    domain = Rect(0.0, 2.0, 0.0, 2.0, True, True)
    sub = Rect(0.0, 1.0, 0.0, 1.0, True, True)
    s0 = np.asarray(s0, dtype=float).reshape(1, 2)
    rows = []
    for ni, n in enumerate(n_values):
        for rep in range(replicates):
            rng = child_rng(seed, ni, rep)
            pts = design_points(n, domain, design, rng)
            allp = np.vstack([pts, s0])
            z = rng.standard_normal(n + 1)
            for lam in lambda_values:
                xi = CovParamsFull(1.0, lam, theta)
                y = _field_factor(allp, xi) @ z
                y0 = y[-1]
                for delta in delta_values:
                    inside = sub.mask(pts, delta)
                    locs, vals = pts[inside], y[:-1][inside]
                    if include_s0:
                        locs = np.vstack([locs, s0])
                        vals = np.append(vals, y0)
                    if locs.shape[0] == 0:
                        ape = math.nan
                    else:
                        system = build_system(Observations(locs, vals), CovParams(lam, theta))
                        ape = abs(y0 - float(krige(system, s0)[0]))
                    rows.append({"n": n, "lambda": lam, "delta": delta, "replicate": rep, "ape": ape})
    config = {"n_values": list(n_values), "delta_values": list(delta_values),
              "lambda_values": list(lambda_values), "replicates": replicates, "seed": seed,
              "theta": theta, "s0": s0[0].tolist(), "design": design, "include_s0": include_s0}
    return ScreeningResult(rows, config)
