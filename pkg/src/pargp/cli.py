"""Command-line interface.

Every command reads its inputs, writes its outputs into ``--out`` and records
a ``manifest.json`` naming the sha256 of every input and output file. Outputs
are a pure function of the inputs, flags and ``--seed``; only fields named
``timings`` (and ``wall_*`` columns) change between runs.

Exit codes: 0 success, 2 usage or configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .benchmark import benchmark_kernels, strong_scaling, weak_scaling
from .errors import PargpError
from .estimate import local_rmspe_report, fit_grid, make_grid, make_lhs, resample_compare
from .io import (fmt, read_dataset, read_json, read_points, sha256_file, write_dataset, write_json,
                 write_text)
from .kriging import build_system, krige
from .model import CovParams, CovParamsFull, Dataset, Rect, Role, split_roles
from .parallel import EvalFailure, EvalPlan, default_workers, evaluate_parallel
from .partition import Partition, PartitionConfig, assign_subsets, predict_local, recursive_partition
from .simulate import SimConfig, run_cv_ml_study, run_screening_study, sample_design, simulate_field


class UsageError(Exception):
    """Invalid flag or configuration value (exit code 2)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ----------------------------------------------------------------------------
# argument parsing


def _add_common(p, seed=True, workers=False):
    p.add_argument("--out", default=".", help="output directory (created if missing)")
    p.add_argument("--config", help="JSON file whose keys override the flags")
    if seed:
        p.add_argument("--seed", type=int, default=0)
    if workers:
        p.add_argument("--workers", type=int, default=None,
                       help="worker pool cap (default: $PARGP_WORKERS or all cores)")
        p.add_argument("--backend", choices=["process", "thread", "serial"], default="process")


def _add_domain(p):
    p.add_argument("--domain", type=float, nargs=4, metavar=("XMIN", "XMAX", "YMIN", "YMAX"),
                   help="domain rectangle (default: closed bounding box of the data)")


def _add_partition(p):
    p.add_argument("--partition", help="partition.json from the partition command")
    p.add_argument("--q", type=int, default=0, help="split depth; 2**q subsets")
    p.add_argument("--delta", type=float, default=0.0, help="shell width")
    p.add_argument("--shell-cap", type=int, default=None)
    p.add_argument("--balance-on", choices=["train", "train_and_validation"], default="train_and_validation")


def _add_zeta(p, required=True):
    p.add_argument("--theta", type=float, required=required)
    p.add_argument("--lambda", dest="lam", type=float, required=required)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="pargp", description="Parallel hold-out cross-validation for GP covariance models.")
    ap.add_argument("--version", action="version", version=f"pargp {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate a GP dataset")
    _add_common(p)
    p.add_argument("--n", type=int, required=True)
    _add_zeta(p)
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--design", choices=["lhs", "space_filling", "uniform"], default="lhs")
    p.add_argument("--domain", type=float, nargs=4, default=[0.0, 1.0, 0.0, 1.0],
                   metavar=("XMIN", "XMAX", "YMIN", "YMAX"))
    p.add_argument("--fractions", type=float, nargs=3, default=None, metavar=("TRAIN", "VALIDATION", "TEST"),
                   help="also assign roles")

    p = sub.add_parser("split", help="assign train/validation/test roles")
    _add_common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--fractions", type=float, nargs=3, default=[0.8, 0.1, 0.1],
                   metavar=("TRAIN", "VALIDATION", "TEST"))

    p = sub.add_parser("partition", help="partition the domain and stage per-subset files")
    _add_common(p)
    p.add_argument("--data", required=True)
    _add_domain(p)
    _add_partition(p)

    p = sub.add_parser("evaluate", help="subset CV loss at one parameter value")
    _add_common(p, workers=True)
    p.add_argument("--data", required=True)
    _add_domain(p)
    _add_partition(p)
    _add_zeta(p)

    p = sub.add_parser("fit", help="grid or LHS search over (theta, lambda)")
    _add_common(p, workers=True)
    p.add_argument("--data", required=True)
    _add_domain(p)
    _add_partition(p)
    p.add_argument("--grid", type=int, default=None, help="points per axis of a geometric grid")
    p.add_argument("--lhs", type=int, default=None, help="number of Latin hypercube candidates")
    p.add_argument("--theta-center", type=float, default=0.05)
    p.add_argument("--lambda-center", type=float, default=0.1)
    p.add_argument("--theta-range", type=float, nargs=2, default=[0.01, 0.5])
    p.add_argument("--lambda-range", type=float, nargs=2, default=[0.01, 1.0])

    p = sub.add_parser("predict", help="kriging predictions at new locations")
    _add_common(p, seed=False)
    p.add_argument("--data", required=True)
    p.add_argument("--at", required=True, help="CSV with columns x,y")
    _add_domain(p)
    p.add_argument("--partition", help="predict from each location's sub-domain and shell")
    _add_zeta(p)

    p = sub.add_parser("benchmark", help="strong/weak scaling and kernel timings")
    _add_common(p, workers=False)
    p.add_argument("--mode", choices=["strong", "weak", "kernels"], required=True)
    p.add_argument("--n", type=int, default=20000)
    p.add_argument("--train-fraction", type=float, default=0.9)
    p.add_argument("--subsets", type=int, nargs="+", default=[1, 2, 4, 8])
    p.add_argument("--deltas", type=float, nargs="+", default=[0.0, 0.05, 0.1, 0.2])
    p.add_argument("--workers", type=int, nargs="+", default=None,
                   help="strong: single pool cap; weak: worker counts (default 1 2 4)")
    p.add_argument("--subset-size", type=int, default=9766)
    p.add_argument("--series", choices=["replicate", "partition"], default="replicate")
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--shell-cap", type=int, default=None)
    p.add_argument("--values", choices=["iid", "gp"], default="iid")
    p.add_argument("--sizes", type=int, nargs="+", default=[500, 1000, 2000, 4000])
    p.add_argument("--repeats", type=int, default=1)
    _add_zeta(p, required=False)
    p.set_defaults(theta=0.05, lam=0.1)

    p = sub.add_parser("compare", help="resampled local comparison of two parameter values")
    _add_common(p, workers=True)
    p.add_argument("--data", required=True)
    _add_domain(p)
    p.add_argument("--q", type=int, default=0)
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--shell-cap", type=int, default=None)
    p.add_argument("--balance-on", choices=["train", "train_and_validation"], default="train_and_validation")
    p.add_argument("--first", type=float, nargs=2, required=True, metavar=("THETA", "LAMBDA"))
    p.add_argument("--second", type=float, nargs=2, required=True, metavar=("THETA", "LAMBDA"))
    p.add_argument("--repeats", type=int, default=100)
    p.add_argument("--fractions", type=float, nargs=3, default=[0.8, 0.1, 0.1],
                   metavar=("TRAIN", "VALIDATION", "TEST"))
    p.add_argument("--level-step", type=int, default=8)

    p = sub.add_parser("study", help="simulation studies: screening effect, CV versus ML")
    _add_common(p)
    p.add_argument("--kind", choices=["screening", "cvml"], required=True)
    p.add_argument("--replicates", type=int, default=None)
    p.add_argument("--n", type=int, nargs="+", default=None)
    p.add_argument("--deltas", type=float, nargs="+", default=[0.0, 0.01, 0.02, 0.05, 0.1, 1.0])
    p.add_argument("--lambdas", type=float, nargs="+", default=[0.1, 0.5])
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--grid", type=int, default=15)
    p.add_argument("--pooled", type=int, nargs="*", default=[4, 16])
    return ap


def apply_config(args: argparse.Namespace) -> argparse.Namespace:
    """Overlay ``--config`` JSON keys (flag names, ``-`` or ``_``) onto parsed flags."""
    if not getattr(args, "config", None):
        return args
    try:
        cfg = read_json(args.config)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {args.config}: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    for key, value in cfg.items():
        dest = {"lambda": "lam"}.get(key, key.replace("-", "_"))
        if dest in ("command", "config") or not hasattr(args, dest):
            raise UsageError(f"config key {key!r} is not an option of '{args.command}'")
        setattr(args, dest, value)
    return args


# ----------------------------------------------------------------------------
# helpers


def _positive(name, value, allow_zero=False):
    if value is None or not math.isfinite(value) or value < 0 or (value == 0 and not allow_zero):
        raise UsageError(f"--{name} must be {'non-negative' if allow_zero else 'positive'}, got {value}")


def _zeta(args) -> CovParams:
    _positive("theta", args.theta)
    _positive("lambda", args.lam, allow_zero=True)
    return CovParams(float(args.lam), float(args.theta))


def _fractions(values) -> tuple[float, float, float]:
    f = tuple(float(v) for v in values)
    if len(f) != 3 or any(not (0 <= v <= 1) for v in f) or sum(f) > 1 + 1e-12 or sum(f) <= 0:
        raise UsageError(f"--fractions must be three values in [0, 1] with 0 < sum <= 1, got {list(values)}")
    return f


def _workers(args) -> int:
    w = args.workers if args.workers is not None else default_workers()
    if w < 1:
        raise UsageError(f"--workers must be >= 1, got {w}")
    return w


def _domain(args, locs=None) -> Rect | None:
    if getattr(args, "domain", None) is None:
        return None
    try:
        return Rect(*map(float, args.domain), True, True)
    except ValueError as exc:
        raise UsageError(f"--domain: {exc}") from None


def _load(args) -> Dataset:
    return read_dataset(args.data, _domain(args))


def _partition_for(args, data: Dataset) -> tuple[Partition, list[str]]:
    if getattr(args, "partition", None):
        part = Partition.from_json(Path(args.partition).read_text(encoding="utf-8"))
        return part, [args.partition]
    if args.q < 0:
        raise UsageError(f"--q must be >= 0, got {args.q}")
    _positive("delta", args.delta, allow_zero=True)
    cfg = PartitionConfig(args.q, float(args.delta), args.shell_cap, args.balance_on, getattr(args, "seed", 0))
    return recursive_partition(data, cfg), []


class Run:
    """Output directory with a provenance manifest."""

    def __init__(self, args, inputs):
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.command = args.command
        self.args = {k: v for k, v in sorted(vars(args).items()) if k not in ("out", "command")}
        self.inputs = {str(p): sha256_file(p) for p in inputs if p}
        self.outputs: list[Path] = []

    def path(self, name: str) -> Path:
        p = self.out / name
        self.outputs.append(p)
        return p

    def text(self, name: str, text: str):
        write_text(self.path(name), text)

    def json(self, name: str, obj: dict, timings: dict | None = None):
        body = {"command": self.command, "inputs": self.inputs, **obj}
        if timings is not None:
            body["timings"] = timings
        write_json(self.path(name), body)

    def finish(self, extra: dict | None = None):
        write_json(self.out / "manifest.json", {
            "command": self.command, "version": __version__, "args": self.args, "inputs": self.inputs,
            "outputs": {p.name: sha256_file(p) for p in self.outputs}, **(extra or {})})


# ----------------------------------------------------------------------------
# commands


def cmd_simulate(args) -> int:
    if args.n is None or args.n < 1:
        raise UsageError(f"--n must be a positive integer, got {args.n}")
    _positive("sigma2", args.sigma2)
    zeta = _zeta(args)
    xi = CovParamsFull(float(args.sigma2), zeta.lam * float(args.sigma2), zeta.theta)
    domain = _domain(args)
    cfg = SimConfig(int(args.n), domain, xi, args.design, int(args.seed))
    locs = sample_design(cfg)
    values = simulate_field(locs, xi, cfg.seed + 1)
    roles = np.zeros(len(values), dtype=np.int8)
    if args.fractions is not None:
        roles = split_roles(len(values), _fractions(args.fractions), int(args.seed))
    data = Dataset(locs, values, roles, domain, int(args.seed))
    run = Run(args, [])
    write_dataset(run.path("data.csv"), data, with_role=args.fractions is not None)
    run.finish({"seed": args.seed, "xi": xi.to_dict(), "design": args.design, "domain": domain.to_dict(),
                "n": args.n})
    return 0


def cmd_split(args) -> int:
    f = _fractions(args.fractions)
    data = _load(args)
    if f[1] == 0 or f[0] == 0:
        warnings.warn(f"fractions {list(f)} leave no {'validation' if f[1] == 0 else 'training'} data; "
                      "cross-validation downstream will fail", stacklevel=1)
    roles = split_roles(len(data), f, int(args.seed))
    out = data.with_roles(roles, int(args.seed))
    run = Run(args, [args.data])
    write_dataset(run.path("split.csv"), out)
    run.finish({"counts": {r.label: c for r, c in out.counts().items()}})
    return 0


def cmd_partition(args) -> int:
    data = _load(args)
    part, extra_in = _partition_for(args, data)
    run = Run(args, [args.data, *extra_in])
    run.json("partition.json", part.to_dict())
    rows = []
    for s in assign_subsets(data, part):
        n_s = s.n_t + s.n_v
        rows.append({"subset": s.index, "n_train": s.n_t, "n_shell": s.shell_count, "n_validation": s.n_v})
        if n_s == 0:
            continue
        locs = np.vstack([s.train.locs, s.validation.locs])
        vals = np.concatenate([s.train.values, s.validation.values])
        roles = np.concatenate([np.full(s.n_t, int(Role.TRAIN)), np.full(s.n_v, int(Role.VALIDATION))])
        shell = np.concatenate([s.is_shell, np.zeros(s.n_v, dtype=bool)])
        write_dataset(run.path(f"subset_{s.index:04d}.csv"), Dataset(locs, vals, roles, data.domain),
                      extra={"is_shell": shell})
    cols = ["subset", "n_train", "n_shell", "n_validation"]
    run.text("subsets.csv", ",".join(cols) + "\n" + "".join(",".join(str(r[c]) for c in cols) + "\n" for r in rows))
    run.finish()
    return 0


def _failure_exit(run: Run, failure: EvalFailure) -> int:
    run.json("error.json", {"error": failure.error, "message": failure.message,
                            "subset": failure.subset_index, "params": failure.params.to_dict()})
    run.finish()
    _emit_error(failure.error, f"evaluation failed on subset {failure.subset_index} at "
                f"theta={failure.params.theta!r}, lambda={failure.params.lam!r}: {failure.message}", 3,
                subset=failure.subset_index, params=failure.params.to_dict())
    return 3


def cmd_evaluate(args) -> int:
    zeta = _zeta(args)
    data = _load(args)
    data.require_cv_roles()
    part, extra_in = _partition_for(args, data)
    subsets = assign_subsets(data, part)
    run = Run(args, [args.data, *extra_in])
    trace = evaluate_parallel(EvalPlan(subsets, (zeta,), _workers(args), args.backend))
    rep = trace.reports[0]
    if isinstance(rep, EvalFailure):
        return _failure_exit(run, rep)
    body = rep.to_dict(timings=False)
    body["partition"] = part.config.to_dict()
    run.json("report.json", body, timings={"total_wall_time": trace.total_wall_time,
                                           "per_worker_busy_time": trace.per_worker_busy_time,
                                           "workers": trace.workers})
    run.text("subsets.csv", rep.to_csv())
    run.finish()
    return 0


def cmd_fit(args) -> int:
    if (args.grid is None) == (args.lhs is None):
        raise UsageError("give exactly one of --grid or --lhs")
    if args.grid is not None:
        if args.grid < 1:
            raise UsageError(f"--grid must be >= 1, got {args.grid}")
        _positive("theta-center", args.theta_center)
        _positive("lambda-center", args.lambda_center)
        cands = make_grid(float(args.theta_center), float(args.lambda_center), int(args.grid))
    else:
        if args.lhs < 1:
            raise UsageError(f"--lhs must be >= 1, got {args.lhs}")
        try:
            cands = make_lhs(int(args.lhs), tuple(args.theta_range), tuple(args.lambda_range), int(args.seed))
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    data = _load(args)
    data.require_cv_roles()
    part, extra_in = _partition_for(args, data)
    subsets = assign_subsets(data, part)
    run = Run(args, [args.data, *extra_in])
    fit = fit_grid(subsets, cands, _workers(args), args.backend)
    body = fit.to_dict()
    body["n_evaluated"] = len(fit.reports) + len(fit.failed)
    body["partition"] = part.config.to_dict()
    run.json("fit.json", body)
    run.text("fit.csv", fit.to_csv())
    local = local_rmspe_report(fit)
    run.text("local.csv", local.to_csv())
    run.finish({"n_distinct_local_winners": local.n_distinct_winners})
    return 0


def cmd_predict(args) -> int:
    zeta = _zeta(args)
    data = _load(args)
    targets = read_points(args.at)
    inputs = [args.data, args.at]
    if args.partition:
        part = Partition.from_json(Path(args.partition).read_text(encoding="utf-8"))
        inputs.append(args.partition)
        pred = predict_local(data, part, zeta, targets)
    else:
        train = data.train
        if len(train) == 0:
            raise UsageError(f"{args.data} has no training rows")
        pred = krige(build_system(train, zeta), targets)
    run = Run(args, inputs)
    lines = ["x,y,prediction"] + [f"{fmt(x)},{fmt(y)},{fmt(p)}" for (x, y), p in zip(targets.tolist(), pred.tolist())]
    run.text("predictions.csv", "\n".join(lines) + "\n")
    run.finish()
    return 0


def cmd_benchmark(args) -> int:
    run = Run(args, [])
    zeta = _zeta(args)
    if args.mode == "kernels":
        rows = benchmark_kernels(tuple(args.sizes), zeta.theta, max(1, args.repeats), int(args.seed))
        cols = ["backend", "n", "cov_matrix_seconds", "cross_cov_seconds", "max_abs_diff"]
        run.text("kernels.csv", ",".join(cols) + "\n" + "".join(
            ",".join(f"{r[c]:.6g}" if isinstance(r[c], float) else str(r[c]) for c in cols) + "\n" for r in rows))
        run.finish()
        return 0
    if args.mode == "strong":
        cap = args.workers[0] if args.workers else None
        res = strong_scaling(int(args.n), float(args.train_fraction), tuple(args.subsets), tuple(args.deltas),
                             cap, zeta, int(args.seed), values=args.values, repeats=max(1, args.repeats))
    else:
        res = weak_scaling(int(args.subset_size), tuple(args.workers or (1, 2, 4)), args.series,
                           float(args.delta), args.shell_cap, zeta, int(args.seed), repeats=max(1, args.repeats))
    run.text("benchmark.csv", res.to_csv())
    run.json("benchmark.json", {"config": res.config}, timings={"rows": res.rows})
    run.finish()
    return 0


def cmd_compare(args) -> int:
    f = _fractions(args.fractions)
    pair = tuple(CovParams(float(lam), float(th)) for th, lam in (args.first, args.second))
    if args.repeats < 1:
        raise UsageError(f"--repeats must be >= 1, got {args.repeats}")
    data = _load(args)
    cfg = PartitionConfig(int(args.q), float(args.delta), args.shell_cap, args.balance_on, int(args.seed))
    res = resample_compare(data, cfg, pair, int(args.repeats), f, int(args.seed), _workers(args),
                           int(args.level_step))
    run = Run(args, [args.data])
    run.json("compare.json", res.to_dict())
    run.text("compare.csv", res.to_csv())
    run.finish({"global_proportion": res.global_proportion})
    return 0


def cmd_study(args) -> int:
    run = Run(args, [])
    if args.kind == "screening":
        kw = {"delta_values": tuple(args.deltas), "lambda_values": tuple(args.lambdas), "seed": int(args.seed)}
        if args.n:
            kw["n_values"] = tuple(args.n)
        if args.replicates:
            kw["replicates"] = int(args.replicates)
        if args.theta:
            kw["theta"] = float(args.theta)
        res = run_screening_study(**kw)
    else:
        kw = {"seed": int(args.seed), "grid": int(args.grid), "pooled": tuple(args.pooled)}
        if args.n:
            kw["n"] = int(args.n[0])
        if args.replicates:
            kw["replicates"] = int(args.replicates)
        res = run_cv_ml_study(**kw)
    run.text("rows.csv", res.to_csv())
    run.text("summary.csv", res.summary_csv())
    run.finish({"config": res.config})
    return 0


COMMANDS = {"simulate": cmd_simulate, "split": cmd_split, "partition": cmd_partition,
            "evaluate": cmd_evaluate, "fit": cmd_fit, "predict": cmd_predict,
            "benchmark": cmd_benchmark, "compare": cmd_compare, "study": cmd_study}


def _emit_error(kind: str, message: str, code: int, **extra):
    print(json.dumps({"error": kind, "message": message, "exit_code": code, **extra}), file=sys.stderr)


def main(argv=None) -> int:
    try:
        args = apply_config(build_parser().parse_args(argv))
        return COMMANDS[args.command](args)
    except UsageError as exc:
        _emit_error("UsageError", str(exc), 2)
        return 2
    except PargpError as exc:
        _emit_error(type(exc).__name__, str(exc), 3)
        return 3
    except (ValueError, KeyError, TypeError, OSError) as exc:
        _emit_error(type(exc).__name__, str(exc), 2)
        return 2


if __name__ == "__main__":
    sys.exit(main())
