import math

import numpy as np
import pytest

from oracles import neg2ll_dense
from pargp.cvloss import CvReport, SubsetResult, tilde_cv
from pargp.errors import TooLargeForExactML
from pargp.estimate import (CandidateSet, aggregation_levels, fit_grid, fit_ml, local_argmin,
                            local_rmspe_report, make_grid, make_lhs, ml_values, rank_reports, resample_compare)
from pargp.model import CovParams, CovParamsFull, Observations
from pargp.parallel import EvalFailure
from pargp.partition import PartitionConfig, assign_subsets, recursive_partition

from conftest import make_dataset


@pytest.fixture(scope="module")
def subsets4():
    d = make_dataset(400, seed=8)
    return assign_subsets(d, recursive_partition(d, PartitionConfig(2, 0.05)))


class TestCandidates:
    def test_grid_size_order_and_centre(self):
        g = make_grid(0.05, 0.1, 15)
        assert len(g) == 225
        assert g.candidates[0] == CovParams(0.05, 0.025)
        assert g.candidates[1].theta == 0.025 and g.candidates[15].theta > 0.025  # theta outer
        assert g.candidates[7 * 15 + 7] == CovParams(0.1, 0.05)
        assert g.candidates[-1] == CovParams(0.2, 0.1)

    def test_grid_geometric(self):
        th = sorted({c.theta for c in make_grid(0.05, 0.1, 5)})
        ratios = np.diff(np.log(th))
        assert np.allclose(ratios, ratios[0])

    def test_lhs_strata_on_log_scale(self):
        c = make_lhs(20, (0.01, 1.0), (0.1, 10.0), seed=2)
        u = np.log([p.theta for p in c]) / np.log(100.0) + 1
        assert sorted(np.floor((u - 0.0) * 10).astype(int).tolist()) == [0, 0, 1, 1, 2, 2, 3, 3, 4, 4,
                                                                         5, 5, 6, 6, 7, 7, 8, 8, 9, 9]
        assert c == make_lhs(20, (0.01, 1.0), (0.1, 10.0), seed=2)

    def test_invalid(self):
        with pytest.raises(ValueError):
            make_grid(0.0, 0.1, 3)
        with pytest.raises(ValueError):
            make_lhs(5, (1.0, 0.1), (0.1, 1.0), 0)


def _report(params, sspes):
    return CvReport.from_results(params, [SubsetResult(i + 1, s, 2) for i, s in enumerate(sspes)])


class TestRanking:
    def test_rank_stable_and_failures(self):
        p = [CovParams(0.1, t) for t in (0.1, 0.2, 0.3, 0.4)]
        reps = [_report(p[0], [2, 2]), _report(p[1], [1, 1]), EvalFailure(p[2], 1, "X", "m"), _report(p[3], [1, 1])]
        ranked, failed = rank_reports(reps)
        assert [i for i, _ in ranked] == [1, 3, 0]
        assert [f.params for f in failed] == [p[2]]

    def test_local_argmin_ties_to_earlier(self):
        p = [CovParams(0.1, t) for t in (0.1, 0.2, 0.3)]
        ranked = [(2, _report(p[2], [1, 5])), (0, _report(p[0], [1, 3])), (1, _report(p[1], [4, 3]))]
        assert local_argmin(ranked) == [0, 0]

    def test_fit_grid_invariants(self, subsets4):
        cands = make_grid(0.05, 0.1, 3)
        fit = fit_grid(subsets4, cands, workers=2, backend="thread")
        g = [r.global_rmspe for r in fit.reports]
        assert g == sorted(g)
        assert fit.best == fit.reports[0].params
        for j, w in enumerate(fit.local_winners):
            win = fit.report_for(w).local_rmspe[j]
            assert all(win <= r.local_rmspe[j] for r in fit.reports)
        assert fit.local_wins().sum() == 4
        lines = fit.to_csv().splitlines()
        assert lines[0] == "rank,candidate,theta,lambda,global_rmspe,n_local_wins" and len(lines) == 10

    def test_duplicate_candidates(self, subsets4):
        p = CovParams(0.1, 0.05)
        fit = fit_grid(subsets4, CandidateSet.from_params([CovParams(0.3, 0.2), p, p]), 1)
        assert fit.order.index(1) < fit.order.index(2)
        assert 2 not in fit.local_winners

    def test_local_report(self, subsets4):
        fit = fit_grid(subsets4, make_grid(0.05, 0.1, 2), 1)
        rep = local_rmspe_report(fit)
        assert len(rep.rows) == 4 and 1 <= rep.n_distinct_winners <= 4
        assert rep.to_csv().startswith("subset,winner,")


class TestML:
    def test_values_match_dense(self):
        rng = np.random.default_rng(0)
        locs, y = rng.uniform(size=(25, 2)), rng.standard_normal(25)
        cands = [CovParamsFull(1.0, 0.1, 0.1), CovParamsFull(2.0, 0.2, 0.3)]
        vals = ml_values(Observations(locs, y), cands)
        for v, c in zip(vals, cands):
            assert v == pytest.approx(neg2ll_dense(locs, y, c.sigma2, c.tau, c.theta), rel=1e-8)
        assert fit_ml(Observations(locs, y), cands) == cands[int(np.argmin(vals))]

    def test_guard(self, monkeypatch):
        from pargp import estimate
        monkeypatch.setattr(estimate, "ML_MAX_N", 3)
        with pytest.raises(TooLargeForExactML):
            ml_values(Observations(np.zeros((4, 2)) + np.arange(4)[:, None], np.zeros(4)),
                      [CovParamsFull(1, 0.1, 0.1)])


def test_aggregation_levels():
    assert aggregation_levels(64) == [64, 8, 1]
    assert aggregation_levels(16) == [16, 2, 1]
    assert aggregation_levels(1) == [1]


def test_resample_compare():
    d = make_dataset(400, seed=3)
    pair = (CovParams(0.1, 0.05), CovParams(5.0, 0.05))
    res = resample_compare(d, PartitionConfig(3), pair, repeats=4, fractions=(0.6, 0.2, 0.2), seed=1)
    assert set(res.levels) == {8, 1}
    assert res.global_rmspe.shape == (4, 2)
    assert res.global_proportion == float(np.mean(res.global_rmspe[:, 0] < res.global_rmspe[:, 1]))
    again = resample_compare(d, PartitionConfig(3), pair, repeats=4, fractions=(0.6, 0.2, 0.2), seed=1)
    assert again.to_csv() == res.to_csv()
    assert all(0 <= v <= 1 for v in res.levels[8] if not math.isnan(v))


def test_tilde_cv_reference(subsets4):
    fit = fit_grid(subsets4, make_grid(0.05, 0.1, 2), 1)
    assert fit.reports[0].same_values(tilde_cv(subsets4, fit.best))
