import pytest

from pargp.benchmark import (bench_dataset, benchmark_kernels, benchmark_scaling, strong_scaling,
                             weak_scaling)
from pargp.model import Role


def test_bench_dataset_split():
    d = bench_dataset(1000, 0.8, 0.1, seed=0)
    c = d.counts()
    assert (c[Role.TRAIN], c[Role.VALIDATION], c[Role.TEST]) == (800, 100, 100)
    assert bench_dataset(1000, 0.8, 0.1, seed=0).values.tolist() == d.values.tolist()


def test_strong_rows():
    res = strong_scaling(n=300, n_subsets=(1, 2, 4), deltas=(0.0, 0.1), max_workers=2)
    assert len(res.rows) == 6
    assert all(r["workers"] <= 2 for r in res.rows)
    assert res.find(N=1, delta=0.1)[0]["speedup"] == 1.0
    with pytest.raises(ValueError):
        strong_scaling(n=100, n_subsets=(3,), deltas=(0.0,))


@pytest.mark.parametrize("series", ["replicate", "partition"])
def test_weak_rows(series):
    res = weak_scaling(subset_size=150, workers=(1, 2), series=series)
    assert [r["workers"] for r in res.rows] == [1, 2]
    assert res.rows[0]["N"] == 1 and res.rows[1]["N"] == 2
    assert res.to_csv().splitlines()[0] == "mode,series,N,delta,workers,wall_seconds,speedup"


def test_dispatch():
    with pytest.raises(ValueError):
        benchmark_scaling("diagonal")


def test_kernel_backends_agree():
    rows = benchmark_kernels(sizes=(200,), repeats=1)
    assert all(r["max_abs_diff"] <= 1e-15 for r in rows)
