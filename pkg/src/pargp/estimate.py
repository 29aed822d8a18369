"""Covariance parameter search: candidate designs, CV and ML selection, diagnostics."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cvloss import CvReport
from .errors import PargpError, TooLargeForExactML
from .kriging import neg2_log_likelihood
from .model import CovParams, CovParamsFull, Dataset, Observations, child_rng, split_roles
from .parallel import EvalFailure, EvalPlan, SubsetPool, evaluate_parallel
from .partition import PartitionConfig, SubsetData, assign_subsets, recursive_partition

ML_MAX_N = 20000


@dataclass(frozen=True)
class CandidateSet:
    candidates: tuple[CovParams, ...]
    design: dict

    def __len__(self) -> int:
        return len(self.candidates)

    def __iter__(self):
        return iter(self.candidates)

    @classmethod
    def from_params(cls, params: Sequence[CovParams]) -> "CandidateSet":
        return cls(tuple(params), {"kind": "explicit", "n": len(params)})


def make_grid(theta_center: float, lambda_center: float, n_per_axis: int) -> CandidateSet:
    """Geometric grid on ``[c/2, 2c]`` per axis, theta outer and lambda inner."""
    if theta_center <= 0 or lambda_center <= 0:
        raise ValueError("grid centres must be positive")
    if n_per_axis < 2:
        raise ValueError(f"n_per_axis must be >= 2, got {n_per_axis}")
    steps = 2.0 ** np.linspace(-1.0, 1.0, n_per_axis)  # exact centre and endpoints
    thetas = theta_center * steps
    lams = lambda_center * steps
    cands = tuple(CovParams(float(l), float(t)) for t in thetas for l in lams)
    design = {"kind": "grid", "n_theta": n_per_axis, "n_lambda": n_per_axis,
              "theta_range": [float(thetas[0]), float(thetas[-1])],
              "lambda_range": [float(lams[0]), float(lams[-1])]}
    return CandidateSet(cands, design)


def lhs_unit(n: int, dims: int, rng: np.random.Generator) -> np.ndarray:
    """Latin hypercube on the unit cube: one uniform draw per stratum, strata paired by permutation."""
    u = np.empty((n, dims))
    for k in range(dims):
        u[:, k] = (rng.permutation(n) + rng.uniform(size=n)) / n
    return u


def make_lhs(n: int, theta_range: tuple[float, float], lambda_range: tuple[float, float],
             seed: int) -> CandidateSet:
    """Latin hypercube design with log-scale strata on both axes."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    (t0, t1), (l0, l1) = theta_range, lambda_range
    if not (0 < t0 < t1 and 0 < l0 < l1):
        raise ValueError("LHS ranges must be positive, increasing intervals")
    u = lhs_unit(n, 2, np.random.default_rng(seed))
    thetas = np.exp(np.log(t0) + u[:, 0] * (np.log(t1) - np.log(t0)))
    lams = np.exp(np.log(l0) + u[:, 1] * (np.log(l1) - np.log(l0)))
    cands = tuple(CovParams(float(l), float(t)) for t, l in zip(thetas, lams))
    return CandidateSet(cands, {"kind": "lhs", "n": n, "theta_range": [t0, t1],
                                "lambda_range": [l0, l1], "seed": seed})


@dataclass
class FitResult:
    candidates: CandidateSet
    reports: list[CvReport]          # ascending global RMSPE, ties by candidate order
    order: list[int]                 # candidate index of each entry in ``reports``
    local_winners: list[int | None]  # per subset: candidate index with the smallest local RMSPE
    failed: list[EvalFailure] = field(default_factory=list)

    @property
    def best(self) -> CovParams:
        return self.reports[0].params

    @property
    def best_index(self) -> int:
        return self.order[0]

    def report_for(self, candidate: int) -> CvReport | None:
        for i, r in zip(self.order, self.reports):
            if i == candidate:
                return r
        return None

    def local_wins(self) -> np.ndarray:
        wins = np.zeros(len(self.candidates), dtype=int)
        for w in self.local_winners:
            if w is not None:
                wins[w] += 1
        return wins

    def to_csv(self) -> str:
        wins = self.local_wins()
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["rank", "candidate", "theta", "lambda", "global_rmspe", "n_local_wins"])
        for rank, (i, r) in enumerate(zip(self.order, self.reports), start=1):
            w.writerow([rank, i, repr(r.params.theta), repr(r.params.lam), repr(r.global_rmspe), int(wins[i])])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"design": self.candidates.design,
                "candidates": [c.to_dict() for c in self.candidates],
                "best": self.best.to_dict(), "best_index": self.best_index,
                "order": self.order,
                "global_rmspe": [r.global_rmspe for r in self.reports],
                "local_winners": self.local_winners,
                "failed": [f.to_dict() for f in self.failed]}


def rank_reports(reports: Sequence[CvReport | EvalFailure]):
    ok = [(i, r) for i, r in enumerate(reports) if isinstance(r, CvReport)]
    failed = [r for r in reports if isinstance(r, EvalFailure)]
    ranked = sorted(ok, key=lambda t: (t[1].global_rmspe, t[0]))
    return ranked, failed


def local_argmin(ranked: Sequence[tuple[int, CvReport]]) -> list[int | None]:
    if not ranked:
        return []
    by_index = sorted(ranked, key=lambda t: t[0])
    n_sub = len(by_index[0][1].local_rmspe)
    winners: list[int | None] = []
    for j in range(n_sub):
        best, best_val = None, math.inf
        for i, rep in by_index:  # strict < keeps the earliest candidate on ties
            v = rep.local_rmspe[j]
            if not math.isnan(v) and v < best_val:
                best, best_val = i, v
        winners.append(best)
    return winners


def fit_grid(subsets: Sequence[SubsetData], candidates: CandidateSet, workers: int = 1,
             backend: str = "process") -> FitResult:
    """Evaluate every candidate with the subset CV loss and rank by global RMSPE."""
    trace = evaluate_parallel(EvalPlan(tuple(subsets), candidates.candidates, workers, backend))
    ranked, failed = rank_reports(trace.reports)
    if not ranked:
        raise PargpError(f"all {len(candidates)} candidates failed to evaluate")
    return FitResult(candidates, [r for _, r in ranked], [i for i, _ in ranked], local_argmin(ranked), failed)


def ml_values(train: Observations, candidates_full: Sequence[CovParamsFull]) -> np.ndarray:
    """-2 log-likelihood per candidate (``inf`` where the factorisation failed)."""
    if len(train) < 1:
        raise ValueError("ML needs training data")
    if len(train) > ML_MAX_N:
        raise TooLargeForExactML(f"n_T={len(train)} exceeds the dense-likelihood guard {ML_MAX_N}")
    out = np.empty(len(candidates_full))
    for k, xi in enumerate(candidates_full):
        try:
            out[k] = neg2_log_likelihood(train, xi)
        except PargpError:
            out[k] = math.inf
    return out


def fit_ml(train: Observations, candidates_full: Sequence[CovParamsFull]) -> CovParamsFull:
    """Candidate minimising the -2 log-likelihood; ties go to the earlier candidate."""
    vals = ml_values(train, candidates_full)
    if not np.isfinite(vals).any():
        raise PargpError("likelihood failed for every candidate")
    return candidates_full[int(np.argmin(vals))]


@dataclass
class LocalReport:
    rows: list[dict]
    n_distinct_winners: int

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = ["subset", "winner", "winner_theta", "winner_lambda", "winner_local_rmspe", "best_local_rmspe"]
        w.writerow(cols)
        for r in self.rows:
            w.writerow(["" if r[c] is None else (repr(r[c]) if isinstance(r[c], float) else r[c]) for c in cols])
        return buf.getvalue()


def local_rmspe_report(fit: FitResult) -> LocalReport:
    best = fit.reports[0]
    rows = []
    for j, win in enumerate(fit.local_winners):
        sub = best.subset_results[j].index
        if win is None:
            rows.append({"subset": sub, "winner": None, "winner_theta": None, "winner_lambda": None,
                         "winner_local_rmspe": None, "best_local_rmspe": None})
            continue
        rep = fit.report_for(win)
        rows.append({"subset": sub, "winner": win, "winner_theta": rep.params.theta,
                     "winner_lambda": rep.params.lam, "winner_local_rmspe": float(rep.local_rmspe[j]),
                     "best_local_rmspe": float(best.local_rmspe[j])})
    distinct = len({w for w in fit.local_winners if w is not None})
    return LocalReport(rows, distinct)


def aggregation_levels(n_subsets: int, step: int = 8) -> list[int]:
    """``N, N/step, N/step**2, ...`` down to 1 (1 always included)."""
    levels = []
    lvl = n_subsets
    while lvl > 1:
        levels.append(lvl)
        if lvl % step:
            break
        lvl //= step
    levels.append(1)
    return sorted(set(levels), reverse=True)


@dataclass
class CompareResult:
    params_pair: tuple[CovParams, CovParams]
    repeats: int
    levels: dict[int, np.ndarray]     # level -> proportion of repeats favouring the first parameters, per group
    global_rmspe: np.ndarray          # (repeats, 2)

    @property
    def global_proportion(self) -> float:
        return float(self.levels[1][0])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["level", "group", "proportion_first"])
        for lvl in sorted(self.levels, reverse=True):
            for g, p in enumerate(self.levels[lvl].tolist(), start=1):
                w.writerow([lvl, g, "" if math.isnan(p) else repr(p)])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"params_pair": [p.to_dict() for p in self.params_pair], "repeats": self.repeats,
                "levels": {str(k): [None if math.isnan(x) else x for x in v.tolist()]
                           for k, v in self.levels.items()},
                "global_rmspe": self.global_rmspe.tolist()}


def resample_compare(data: Dataset, partition_config: PartitionConfig,
                     params_pair: tuple[CovParams, CovParams], repeats: int,
                     fractions: tuple[float, float, float], seed: int,
                     workers: int = 1, level_step: int = 8) -> CompareResult:
    """Share of random train/validation/test re-splits in which the first parameters win.

    The partition rectangles are built once from the first split and kept fixed,
    so a group denotes the same region in every repeat. Groups are pooled up the
    split tree; a group favours the first parameters when its pooled RMSPE is
    strictly smaller.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    seeds = [int(child_rng(seed, r).integers(2 ** 62)) for r in range(repeats)]
    n = len(data)
    first = data.with_roles(split_roles(n, fractions, seeds[0]), seeds[0])
    part = recursive_partition(first, partition_config)
    levels = aggregation_levels(part.n_subsets, level_step)
    wins = {L: np.zeros(L) for L in levels}
    valid = {L: np.zeros(L) for L in levels}
    glob = np.empty((repeats, 2))
    for r in range(repeats):
        d = first if r == 0 else data.with_roles(split_roles(n, fractions, seeds[r]), seeds[r])
        subsets = assign_subsets(d, part)
        with SubsetPool(subsets, workers) as pool:
            reps = [pool.evaluate(p) for p in params_pair]
        for rep in reps:
            if isinstance(rep, EvalFailure):
                raise PargpError(f"evaluation failed on subset {rep.subset_index}: {rep.message}")
        sspe = np.array([[s.sspe for s in rep.subset_results] for rep in reps])
        n_v = np.array([s.n_v for s in reps[0].subset_results])
        glob[r] = [reps[0].global_rmspe, reps[1].global_rmspe]
        for L in levels:
            for g, members in enumerate(part.groups(L)):
                pos = [m - 1 for m in members]
                nv = n_v[pos].sum()
                if nv == 0:
                    continue
                e1, e2 = np.sqrt(sspe[:, pos].sum(axis=1) / nv)
                valid[L][g] += 1
                wins[L][g] += e1 < e2
    props = {}
    for L in levels:
        with np.errstate(invalid="ignore", divide="ignore"):
            props[L] = np.where(valid[L] > 0, wins[L] / np.maximum(valid[L], 1), np.nan)
    return CompareResult(tuple(params_pair), repeats, props, glob)
