"""Strong and weak scaling of the subset CV evaluation, and kernel backend timings."""
from __future__ import annotations

import csv
import io
import os
import time
from dataclasses import dataclass, field, replace
from typing import Literal, Sequence

import numpy as np

from .covariance import available_backends, load_backend
from .model import CovParams, CovParamsFull, Dataset, Rect, child_rng, split_roles
from .parallel import SubsetPool
from .partition import PartitionConfig, SubsetData, assign_subsets, recursive_partition
from .simulate import design_points, simulate_field

COLUMNS = ["mode", "series", "N", "delta", "workers", "wall_seconds", "speedup"]


@dataclass
class BenchmarkResult:
    rows: list[dict]
    config: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in self.rows:
            w.writerow([r[c] if not isinstance(r[c], float) else f"{r[c]:.6g}" for c in COLUMNS])
        return buf.getvalue()

    def find(self, **kw) -> list[dict]:
        return [r for r in self.rows if all(r[k] == v for k, v in kw.items())]


def machine_units() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


def bench_dataset(n: int, train_fraction: float, validation_fraction: float, seed: int,
                  values: Literal["iid", "gp"] = "iid", xi: CovParamsFull = CovParamsFull(1.0, 0.1, 0.05)) -> Dataset:
    """Uniform-LHS locations on the unit square with a seeded role split.

    Evaluation cost does not depend on the responses, so by default they are
    i.i.d. standard normal; ``values="gp"`` draws an exact GP field instead.
    """
    rng = child_rng(seed, 1)
    unit = Rect(0.0, 1.0, 0.0, 1.0, True, True)
    locs = design_points(n, unit, "lhs", rng)
    y = simulate_field(locs, xi, rng) if values == "gp" else rng.standard_normal(n)
    roles = split_roles(n, (train_fraction, validation_fraction, 1 - train_fraction - validation_fraction),
                        int(rng.integers(2 ** 62)))
    return Dataset(locs, y, roles, unit, seed)


def time_evaluation(subsets: Sequence[SubsetData], workers: int, params: CovParams,
                    backend: str = "process", repeats: int = 1) -> float:
    """Best-of-``repeats`` wall time of one subset-CV evaluation; pool start-up excluded."""
    best = float("inf")
    with SubsetPool(subsets, workers, backend) as pool:
        for _ in range(repeats):
            t0 = time.perf_counter()
            pool.evaluate(params)
            best = min(best, time.perf_counter() - t0)
    return best


def strong_scaling(n: int = 20000, train_fraction: float = 0.9, n_subsets: Sequence[int] = (1, 2, 4, 8),
                   deltas: Sequence[float] = (0.0, 0.05, 0.1, 0.2), max_workers: int | None = None,
                   params: CovParams = CovParams(0.1, 0.05), seed: int = 0, backend: str = "process",
                   values: Literal["iid", "gp"] = "iid", repeats: int = 1) -> BenchmarkResult:
    """Fixed dataset, growing number of subsets; speedup relative to ``N = 1``.

    Uses ``workers = min(N_nonempty, max_workers)``, where subsets without
    validation data are ignored.
    """
    max_workers = max_workers or machine_units()
    data = bench_dataset(n, train_fraction, 1 - train_fraction, seed, values)
    rows = []
    base = None
    for delta in deltas:
        for N in n_subsets:
            q = int(round(np.log2(N)))
            if 2 ** q != N:
                raise ValueError(f"number of subsets must be a power of two, got {N}")
            if N == 1 and base is not None:
                rows.append({"mode": "strong", "series": "partition", "N": 1, "delta": delta,
                             "workers": 1, "wall_seconds": base, "speedup": 1.0})
                continue
            subsets = [s for s in assign_subsets(data, recursive_partition(data, PartitionConfig(q, delta)))
                       if s.n_v > 0]
            w = min(len(subsets), max_workers)
            t = time_evaluation(subsets, w, params, backend, repeats)
            if N == 1:
                base = t
            rows.append({"mode": "strong", "series": "partition", "N": N, "delta": delta, "workers": w,
                         "wall_seconds": t, "speedup": base / t})
    return BenchmarkResult(rows, {"mode": "strong", "n": n, "train_fraction": train_fraction,
                                  "n_subsets": list(n_subsets), "deltas": list(deltas),
                                  "max_workers": max_workers, "params": params.to_dict(), "seed": seed,
                                  "backend": backend, "values": values})


def weak_scaling(subset_size: int = 9766, workers: Sequence[int] = (1, 2, 4),
                 series: Literal["replicate", "partition"] = "replicate", delta: float = 0.0,
                 shell_cap: int | None = None, params: CovParams = CovParams(0.1, 0.05), seed: int = 0,
                 backend: str = "process", repeats: int = 1) -> BenchmarkResult:
    """Problem size growing with the number of workers.

    ``replicate``: ``W`` identical copies of one subset (80/10/10 split of
    ``subset_size`` points). ``partition``: a dataset of ``W * subset_size``
    points divided into ``W`` subsets. The speedup is ``W * t_ref / t_W``,
    with ``t_ref`` the single-worker time of the fastest subset.
    """
    rows = []
    for W in workers:
        if series == "replicate":
            one = bench_dataset(subset_size, 0.8, 0.1, seed)
            base_sub = assign_subsets(one, recursive_partition(one, PartitionConfig(0)))[0]
            subsets = [replace(base_sub, index=i) for i in range(1, W + 1)]
            ref = subsets[:1]
        else:
            q = int(round(np.log2(W)))
            if 2 ** q != W:
                raise ValueError(f"partition series needs power-of-two worker counts, got {W}")
            data = bench_dataset(W * subset_size, 0.8, 0.1, seed)
            subsets = [s for s in assign_subsets(data, recursive_partition(
                data, PartitionConfig(q, delta, shell_cap, seed=seed))) if s.n_v > 0]
            ref = subsets
        t_ref = min(time_evaluation([s], 1, params, backend, repeats) for s in ref)
        t = t_ref if (W == 1 and len(subsets) == 1) else time_evaluation(subsets, W, params, backend, repeats)
        rows.append({"mode": "weak", "series": series, "N": len(subsets), "delta": delta, "workers": W,
                     "wall_seconds": t, "speedup": W * t_ref / t, "reference_seconds": t_ref})
    return BenchmarkResult(rows, {"mode": "weak", "subset_size": subset_size, "workers": list(workers),
                                  "series": series, "delta": delta, "shell_cap": shell_cap,
                                  "params": params.to_dict(), "seed": seed, "backend": backend})


def benchmark_scaling(mode: Literal["strong", "weak"], **config) -> BenchmarkResult:
    if mode == "strong":
        return strong_scaling(**config)
    if mode == "weak":
        return weak_scaling(**config)
    raise ValueError(f"unknown benchmark mode {mode!r}")


def benchmark_kernels(sizes: Sequence[int] = (500, 1000, 2000, 4000), theta: float = 0.05,
                      repeats: int = 3, seed: int = 0) -> list[dict]:
    """Covariance assembly time per kernel backend (compiled versus numpy)."""
    rng = np.random.default_rng(seed)
    rows = []
    for n in sizes:
        pts = rng.uniform(size=(n, 2))
        x, y = np.ascontiguousarray(pts[:, 0]), np.ascontiguousarray(pts[:, 1])
        tx, ty = x[: max(1, n // 4)].copy(), y[: max(1, n // 4)].copy()
        ref = None
        for name in available_backends():
            mod = load_backend(name)
            t_mat = t_cross = float("inf")
            for _ in range(repeats):
                t0 = time.perf_counter()
                K = mod.exp_cov_matrix(x, y, theta)
                t_mat = min(t_mat, time.perf_counter() - t0)
                t0 = time.perf_counter()
                mod.exp_cross_cov(x, y, tx, ty, theta)
                t_cross = min(t_cross, time.perf_counter() - t0)
            if ref is None:
                ref = K
            rows.append({"backend": name, "n": n, "cov_matrix_seconds": t_mat,
                         "cross_cov_seconds": t_cross,
                         "max_abs_diff": float(np.max(np.abs(K - ref)))})
            del K
    return rows
