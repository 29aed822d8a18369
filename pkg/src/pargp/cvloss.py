"""Hold-out CV loss (sum of squared prediction errors) and its subset approximation."""
from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve

from .covariance import cross_cov_matrix
from .errors import AllSubsetsEmpty
from .kriging import build_system, krige
from .model import CovParams, Observations
from .partition import SubsetData
from .threads import single_blas_thread


def cv_loss(train: Observations, validation: Observations, params: CovParams) -> float:
    """Sum of squared errors of kriging ``validation`` from ``train``."""
    if len(train) == 0 or len(validation) == 0:
        raise ValueError("cv_loss needs non-empty training and validation data")
    pred = krige(build_system(train, params), validation.locs)
    r = pred - validation.values
    return float(r @ r)


def cv_loss_fields(train_locs, train_values, val_locs, val_values, params: CovParams) -> np.ndarray:
    """Per-field CV losses for replicate fields observed at shared locations.

    ``train_values`` and ``val_values`` have one row per replicate field; one
    factorisation serves all of them.
    """
    tv = np.atleast_2d(np.asarray(train_values, dtype=float))
    vv = np.atleast_2d(np.asarray(val_values, dtype=float))
    system = build_system(Observations(train_locs, tv[0]), params)
    alpha = cho_solve((system.chol, True), tv.T, check_finite=False)
    val_locs = np.asarray(val_locs, dtype=float).reshape(-1, 2)
    out = np.zeros(tv.shape[0])
    step = max(1, (1 << 22) // max(system.n, 1))
    for p0 in range(0, val_locs.shape[0], step):
        C = cross_cov_matrix(system.train_locs, val_locs[p0:p0 + step], params.theta)
        r = C @ alpha - vv[:, p0:p0 + step].T
        out += np.sum(r * r, axis=0)
    return out


def pooled_cv_loss(train_locs, train_values, val_locs, val_values, params: CovParams) -> float:
    """CV loss summed over replicate fields (see :func:`cv_loss_fields`)."""
    return float(cv_loss_fields(train_locs, train_values, val_locs, val_values, params).sum())


@dataclass(frozen=True)
class SubsetResult:
    index: int
    sspe: float
    n_v: int
    wall_time: float = 0.0
    skipped: bool = False  # no validation data

    def to_dict(self) -> dict:
        return {"index": self.index, "sspe": self.sspe, "n_v": self.n_v,
                "wall_time": self.wall_time, "skipped": self.skipped}


@dataclass(frozen=True)
class CvReport:
    params: CovParams
    subset_results: tuple[SubsetResult, ...]
    global_sspe: float
    global_rmspe: float
    local_rmspe: np.ndarray = field(repr=False)

    @classmethod
    def from_results(cls, params: CovParams, results) -> "CvReport":
        results = tuple(sorted(results, key=lambda r: r.index))
        n_v = sum(r.n_v for r in results)
        if n_v == 0:
            raise AllSubsetsEmpty("no subset has validation data")
        total = 0.0
        for r in results:  # ascending subset index, fixed for determinism
            total += r.sspe
        local = np.array([math.sqrt(r.sspe / r.n_v) if r.n_v > 0 else math.nan for r in results])
        local.setflags(write=False)
        return cls(params, results, total, math.sqrt(total / n_v), local)

    @property
    def n_v(self) -> int:
        return sum(r.n_v for r in self.subset_results)

    def same_values(self, other: "CvReport") -> bool:
        """Bit-for-bit equality of every numeric field except timings."""
        return (self.params == other.params
                and [(r.index, r.sspe, r.n_v, r.skipped) for r in self.subset_results]
                == [(r.index, r.sspe, r.n_v, r.skipped) for r in other.subset_results]
                and self.global_sspe == other.global_sspe
                and self.global_rmspe == other.global_rmspe
                and np.array_equal(self.local_rmspe, other.local_rmspe, equal_nan=True))

    def to_dict(self, timings: bool = True) -> dict:
        rows = []
        for r in self.subset_results:
            d = r.to_dict()
            if not timings:
                d.pop("wall_time")
            rows.append(d)
        return {"params": self.params.to_dict(), "global_sspe": self.global_sspe,
                "global_rmspe": self.global_rmspe, "n_v": self.n_v,
                "local_rmspe": [None if math.isnan(v) else v for v in self.local_rmspe.tolist()],
                "subsets": rows}

    def to_json(self, timings: bool = True) -> str:
        return json.dumps(self.to_dict(timings), indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "n_v", "sspe", "local_rmspe", "wall_time"])
        for r, loc in zip(self.subset_results, self.local_rmspe.tolist()):
            w.writerow([r.index, r.n_v, repr(r.sspe), "" if math.isnan(loc) else repr(loc), f"{r.wall_time:.6f}"])
        return buf.getvalue()


def subset_sspe(subset: SubsetData, params: CovParams) -> SubsetResult:
    """Local SSPE of one subset; the unit of work shared by every evaluation path."""
    t0 = time.perf_counter()
    if subset.n_v == 0:
        return SubsetResult(subset.index, 0.0, 0, time.perf_counter() - t0, skipped=True)
    if subset.n_t == 0:
        r = subset.validation.values  # zero-mean prior prediction
        sspe = float(r @ r)
    else:
        sspe = cv_loss(subset.train, subset.validation, params)
    return SubsetResult(subset.index, sspe, subset.n_v, time.perf_counter() - t0)


def tilde_cv(subsets: list[SubsetData], params: CovParams) -> CvReport:
    """Sequential evaluation of the subset-approximated CV loss."""
    if not any(s.n_v > 0 for s in subsets):
        raise AllSubsetsEmpty("no subset has validation data")
    with single_blas_thread():
        results = [subset_sspe(s, params) for s in subsets]
    return CvReport.from_results(params, results)
