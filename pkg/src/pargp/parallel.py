"""Parallel evaluation of the subset CV loss over a sequence of parameters.

Subsets are handed to workers once, when the pool starts. For every
parameter value the coordinator sends one ``(lambda, theta)`` pair to each
worker and receives one ``(index, sspe, n_v)`` record per subset back; the
global loss is reduced by the coordinator in ascending subset index. Since
each subset's computation is pure and single-threaded, reports do not depend
on the number of workers or on the backend.
"""
from __future__ import annotations

import heapq
import json
import multiprocessing as mp
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal, Sequence

from .cvloss import CvReport, SubsetResult, subset_sspe
from .errors import AllSubsetsEmpty
from .model import CovParams
from .partition import SubsetData
from .threads import single_blas_thread

Backend = Literal["process", "thread", "serial"]


def default_workers() -> int:
    env = os.environ.get("PARGP_WORKERS", "").strip()
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def subset_cost(subset: SubsetData) -> float:
    """Load-balancing proxy: cubic in the training size, zero when nothing is validated."""
    return float(subset.n_t) ** 3 if subset.n_v > 0 else 0.0


def schedule(subsets: Sequence[SubsetData], workers: int) -> list[list[int]]:
    """Assign subset positions to workers.

    One subset per worker when ``workers >= N``; otherwise greedy
    longest-processing-time on :func:`subset_cost`. Each worker's list is in
    ascending position order.
    """
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    n = len(subsets)
    if workers >= n:
        return [[i] for i in range(n)]
    order = sorted(range(n), key=lambda i: (-subset_cost(subsets[i]), i))
    heap = [(0.0, w) for w in range(workers)]
    out: list[list[int]] = [[] for _ in range(workers)]
    for i in order:
        load, w = heapq.heappop(heap)
        out[w].append(i)
        heapq.heappush(heap, (load + subset_cost(subsets[i]), w))
    return [sorted(a) for a in out]


@dataclass(frozen=True)
class EvalPlan:
    subsets: tuple[SubsetData, ...]
    param_sequence: tuple[CovParams, ...]
    workers: int = 1
    backend: Backend = "process"

    def __post_init__(self):
        object.__setattr__(self, "subsets", tuple(self.subsets))
        object.__setattr__(self, "param_sequence", tuple(self.param_sequence))
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        if not self.param_sequence:
            raise ValueError("param_sequence is empty")
        if self.backend not in ("process", "thread", "serial"):
            raise ValueError(f"unknown backend {self.backend!r}")


@dataclass(frozen=True)
class EvalFailure:
    """A parameter value whose evaluation failed on some subset."""

    params: CovParams
    subset_index: int
    error: str
    message: str

    def to_dict(self) -> dict:
        return {"params": self.params.to_dict(), "subset_index": self.subset_index,
                "error": self.error, "message": self.message}


@dataclass
class EvalTrace:
    reports: list  # CvReport or EvalFailure, in param_sequence order
    per_worker_busy_time: list[float]
    total_wall_time: float
    workers: int
    backend: str
    assignment: list[list[int]]
    messages_down: int = 0
    records_up: int = 0
    host_workers: int = field(default_factory=lambda: os.cpu_count() or 1)

    @property
    def failures(self) -> list[EvalFailure]:
        return [r for r in self.reports if isinstance(r, EvalFailure)]

    def to_dict(self, timings: bool = True) -> dict:
        d = {"workers": self.workers, "backend": self.backend, "host_workers": self.host_workers,
             "assignment": [[int(i) for i in a] for a in self.assignment],
             "messages_down": self.messages_down, "records_up": self.records_up,
             "reports": [r.to_dict(timings) if isinstance(r, CvReport) else {"failure": r.to_dict()}
                         for r in self.reports]}
        if timings:
            d["per_worker_busy_time"] = self.per_worker_busy_time
            d["total_wall_time"] = self.total_wall_time
        return d

    def to_json(self, timings: bool = True) -> str:
        return json.dumps(self.to_dict(timings), indent=2)


def _run_assigned(subsets, params):
    """Evaluate a worker's subsets for one parameter value; stop at the first failure."""
    records = []
    for s in subsets:
        try:
            r = subset_sspe(s, params)
        except Exception as exc:
            records.append(("error", s.index, type(exc).__name__, str(exc)))
            break
        records.append(("ok", r.index, r.sspe, r.n_v, r.wall_time, r.skipped))
    return records


def _worker_main(conn, subsets):
    with single_blas_thread():
        while True:
            msg = conn.recv()
            if msg is None:
                break
            t0 = time.perf_counter()
            records = _run_assigned(subsets, CovParams(*msg))
            conn.send((records, time.perf_counter() - t0))
    conn.close()


def _collect(params, records_per_worker):
    results = []
    errors = []
    for records in records_per_worker:
        for rec in records:
            if rec[0] == "error":
                errors.append(rec[1:])
            else:
                _, idx, sspe, n_v, wall, skipped = rec
                results.append(SubsetResult(idx, sspe, n_v, wall, skipped))
    if errors:
        idx, err, msg = min(errors)  # lowest failing index, whatever the assignment
        return EvalFailure(params, idx, err, msg)
    return CvReport.from_results(params, results)


class SubsetPool:
    """Workers holding their assigned subsets for the lifetime of the pool.

    Use as a context manager; :meth:`evaluate` may be called any number of
    times with different parameters.
    """

    def __init__(self, subsets: Sequence[SubsetData], workers: int = 1, backend: Backend = "process",
                 start_method: str | None = None):
        self.subsets = tuple(subsets)
        if not any(s.n_v > 0 for s in self.subsets):
            raise AllSubsetsEmpty("no subset has validation data")
        if workers == 1 or len(self.subsets) == 1:
            backend = "serial"
        self.backend = backend
        self.assignment = schedule(self.subsets, 1 if backend == "serial" else workers)
        self.workers = len(self.assignment)
        self.busy = [0.0] * self.workers
        self.messages_down = 0
        self.records_up = 0
        self._start_method = start_method
        self._conns = []
        self._procs = []
        self._executor = None

    def _assigned(self, w):
        return [self.subsets[i] for i in self.assignment[w]]

    def __enter__(self):
        if self.backend == "process":
            ctx = mp.get_context(self._start_method)
            for w in range(self.workers):
                parent, child = ctx.Pipe()
                p = ctx.Process(target=_worker_main, args=(child, self._assigned(w)), daemon=True)
                p.start()
                child.close()
                self._conns.append(parent)
                self._procs.append(p)
        elif self.backend == "thread":
            self._executor = ThreadPoolExecutor(max_workers=self.workers)
        return self

    def __exit__(self, *exc):
        self.close()

    def close(self):
        for c in self._conns:
            try:
                c.send(None)
                c.close()
            except (OSError, BrokenPipeError):
                pass
        for p in self._procs:
            p.join(timeout=10)
            if p.is_alive():
                p.terminate()
        self._conns, self._procs = [], []
        if self._executor is not None:
            self._executor.shutdown()
            self._executor = None

    def evaluate(self, params: CovParams):
        msg = (params.lam, params.theta)
        if self.backend == "process":
            for c in self._conns:
                c.send(msg)
            self.messages_down += len(self._conns)
            gathered = []
            for w, c in enumerate(self._conns):
                try:
                    records, busy = c.recv()
                except EOFError:
                    raise RuntimeError(f"worker {w} died while evaluating {params}") from None
                self.busy[w] += busy
                gathered.append(records)
        elif self.backend == "thread":
            def job(w):
                t0 = time.perf_counter()
                return _run_assigned(self._assigned(w), CovParams(*msg)), time.perf_counter() - t0

            self.messages_down += self.workers
            with single_blas_thread():
                outs = list(self._executor.map(job, range(self.workers)))
            gathered = []
            for w, (records, busy) in enumerate(outs):
                self.busy[w] += busy
                gathered.append(records)
        else:
            t0 = time.perf_counter()
            with single_blas_thread():
                gathered = [_run_assigned(self._assigned(0), params)]
            self.busy[0] += time.perf_counter() - t0
            self.messages_down += 1
        self.records_up += sum(len(r) for r in gathered)
        return _collect(params, gathered)


def evaluate_parallel(plan: EvalPlan, start_method: str | None = None) -> EvalTrace:
    """Evaluate the subset CV loss for every parameter in ``plan.param_sequence``."""
    t0 = time.perf_counter()
    with SubsetPool(plan.subsets, plan.workers, plan.backend, start_method) as pool:
        reports = [pool.evaluate(p) for p in plan.param_sequence]
    return EvalTrace(reports, list(pool.busy), time.perf_counter() - t0, pool.workers, pool.backend,
                     pool.assignment, pool.messages_down, pool.records_up)
