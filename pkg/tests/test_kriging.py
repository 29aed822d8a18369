import numpy as np
import pytest

from oracles import gls_dense, krige_dense, neg2ll_dense, rel_err
from pargp.errors import NotPositiveDefinite, RankDeficient
from pargp.kriging import (build_system, gls_estimate, krige, neg2_log_likelihood, precision_matrix,
                           smoother_matrix)
from pargp.model import CovParams, CovParamsFull, Observations


def problem(seed, n=40):
    rng = np.random.default_rng(seed)
    return rng.uniform(size=(n, 2)), rng.standard_normal(n)


@pytest.mark.parametrize("seed", range(5))
def test_krige_matches_dense(seed):
    locs, y = problem(seed)
    targets = np.random.default_rng(100 + seed).uniform(size=(7, 2))
    pred = krige(build_system(Observations(locs, y), CovParams(0.1, 0.2)), targets)
    assert rel_err(pred, krige_dense(locs, y, targets, 0.1, 0.2)) <= 1e-8


def test_interpolates_without_nugget():
    locs, y = problem(0, 20)
    pred = krige(build_system(Observations(locs, y), CovParams(0.0, 0.1)), locs)
    assert np.allclose(pred, y, atol=1e-6)


def test_duplicate_sites_need_nugget():
    locs = np.array([[0.5, 0.5], [0.5, 0.5], [0.1, 0.1]])
    y = np.array([1.0, 1.0, 0.0])
    sysm = build_system(Observations(locs, y), CovParams(0.0, 0.1))
    assert sysm.regularized  # jitter retry succeeded
    assert krige(build_system(Observations(locs, y), CovParams(0.1, 0.1)), locs).shape == (3,)


def test_not_positive_definite_reported(monkeypatch):
    from pargp import kriging
    monkeypatch.setattr(kriging, "cov_matrix", lambda locs, theta, kernel: np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(NotPositiveDefinite):
        build_system(Observations(np.zeros((2, 2)), [1.0, 2.0]), CovParams(0.0, 0.1))


def test_empty_training_rejected():
    with pytest.raises(ValueError):
        build_system(Observations.empty(), CovParams(0.1, 0.1))


def test_krige_blocks(monkeypatch):
    from pargp import kriging
    locs, y = problem(1, 30)
    targets = np.random.default_rng(4).uniform(size=(50, 2))
    s = build_system(Observations(locs, y), CovParams(0.2, 0.1))
    full = krige(s, targets)
    monkeypatch.setattr(kriging, "_CROSS_BLOCK_ENTRIES", 64)
    assert np.allclose(krige(s, targets), full, rtol=1e-13, atol=1e-15)


@pytest.mark.parametrize("seed", range(4))
def test_likelihood_matches_dense(seed):
    locs, y = problem(seed, 30)
    xi = CovParamsFull(1.7, 0.2, 0.15)
    val = neg2_log_likelihood(Observations(locs, y), xi)
    assert rel_err(val, neg2ll_dense(locs, y, 1.7, 0.2, 0.15)) <= 1e-8


def test_likelihood_prefers_truth_scale():
    # a larger range of plausible sigma2 values brackets the truth
    rng = np.random.default_rng(0)
    locs = rng.uniform(size=(150, 2))
    from pargp.simulate import simulate_field
    y = simulate_field(locs, CovParamsFull(1.0, 0.1, 0.1), 1)
    vals = [neg2_log_likelihood(Observations(locs, y), CovParamsFull(s, 0.1 * s, 0.1)) for s in (0.1, 1.0, 10.0)]
    assert vals[1] < vals[0] and vals[1] < vals[2]


@pytest.mark.parametrize("seed", range(4))
def test_gls_matches_dense(seed):
    locs, y = problem(seed, 50)
    X = np.column_stack([np.ones(50), locs])
    beta = gls_estimate(Observations(locs, y), X, CovParams(0.3, 0.1))
    assert rel_err(beta, gls_dense(locs, y, X, 0.3, 0.1)) <= 1e-8


def test_gls_rank_deficient():
    locs, y = problem(0, 20)
    X = np.column_stack([np.ones(20), 2 * np.ones(20)])
    with pytest.raises(RankDeficient):
        gls_estimate(Observations(locs, y), X, CovParams(0.1, 0.1))


def test_gls_shape_checks():
    locs, y = problem(0, 5)
    with pytest.raises(ValueError):
        gls_estimate(Observations(locs, y), np.ones((4, 1)), CovParams(0.1, 0.1))
    with pytest.raises(ValueError):
        gls_estimate(Observations(locs, y), np.ones((5, 5)), CovParams(0.1, 0.1))


@pytest.mark.parametrize("lam", [0.01, 0.1, 1.0])
def test_precision_smoother_identity(lam):
    locs, _ = problem(3, 30)
    p = CovParams(lam, 0.2)
    Mi = precision_matrix(locs, p)
    H = smoother_matrix(locs, p)
    assert rel_err((np.eye(30) - H) / lam, Mi) <= 1e-8
