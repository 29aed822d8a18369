import numpy as np
import pytest

from pargp.model import CovParamsFull, Rect, child_rng
from pargp.simulate import (SimConfig, design_points, maximin_improve, run_cv_ml_study, run_screening_study,
                            sample_design, simulate_field)

UNIT = Rect(0.0, 1.0, 0.0, 1.0, True, True)


def min_dist(p):
    d = np.sqrt(((p[:, None] - p[None]) ** 2).sum(-1))
    np.fill_diagonal(d, np.inf)
    return d.min()


class TestDesign:
    def test_lhs_one_point_per_stratum(self):
        p = design_points(50, UNIT, "lhs", np.random.default_rng(0))
        for k in range(2):
            assert sorted(np.floor(p[:, k] * 50).astype(int).tolist()) == list(range(50))

    def test_in_rect(self):
        r = Rect(0.0, 2.0, -1.0, 1.0, True, True)
        for design in ("lhs", "space_filling", "uniform"):
            p = design_points(40, r, design, np.random.default_rng(1))
            assert r.mask(p).all()

    def test_maximin_never_worse(self):
        rng = np.random.default_rng(2)
        p = rng.uniform(size=(60, 2))
        q = maximin_improve(p, UNIT, np.random.default_rng(3))
        assert min_dist(q) >= min_dist(p)

    def test_space_filling_beats_lhs(self):
        a = [min_dist(design_points(100, UNIT, "lhs", child_rng(0, k))) for k in range(5)]
        b = [min_dist(design_points(100, UNIT, "space_filling", child_rng(0, k))) for k in range(5)]
        assert np.median(b) > np.median(a)

    def test_sample_design_seeded(self):
        c = SimConfig(30, seed=4)
        assert np.array_equal(sample_design(c), sample_design(c))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SimConfig(0)
        with pytest.raises(ValueError):
            SimConfig(5, design="sobol")


class TestField:
    def test_deterministic(self):
        locs = np.random.default_rng(0).uniform(size=(50, 2))
        xi = CovParamsFull(1.0, 0.1, 0.05)
        assert np.array_equal(simulate_field(locs, xi, 3), simulate_field(locs, xi, 3))

    def test_marginal_variance(self):
        locs = np.array([[0.2, 0.3], [0.25, 0.3], [0.9, 0.9]])
        xi = CovParamsFull(2.0, 0.5, 0.1)
        y = simulate_field(locs, xi, 0, replicates=10000)
        assert y.shape == (10000, 3)
        assert np.allclose(y.var(axis=0), 2.5, rtol=0.10)

    def test_empirical_covariance(self):
        locs = np.array([[0.0, 0.0], [0.1, 0.0]])
        y = simulate_field(locs, CovParamsFull(1.0, 0.0, 0.1), 1, replicates=20000)
        assert np.corrcoef(y.T)[0, 1] == pytest.approx(np.exp(-1.0), abs=0.03)

    def test_coincident_sites_without_nugget(self):
        locs = np.array([[0.5, 0.5], [0.5, 0.5], [0.1, 0.2]])
        y = simulate_field(locs, CovParamsFull(1.0, 0.0, 0.2), 7, replicates=4)
        assert np.array_equal(y[:, 0], y[:, 1])

    def test_size_guard(self):
        from pargp import simulate
        with pytest.raises(ValueError):
            simulate_field(np.zeros((simulate.FIELD_MAX_N + 1, 2)), CovParamsFull(1, 0.1, 0.1), 0)


class TestScreening:
    def test_saturated_shell_is_unrestricted(self):
        res = run_screening_study(n_values=(40,), delta_values=(1.0, 5.0), lambda_values=(0.1,), replicates=20)
        assert np.array_equal(res.ape(40, 0.1, 1.0), res.ape(40, 0.1, 5.0))

    def test_interpolation_at_s0(self):
        res = run_screening_study(n_values=(30,), delta_values=(0.0, 0.1), lambda_values=(0.0,), replicates=10,
                                  include_s0=True)
        assert np.nanmax(res.ape(30, 0.0, 0.1)) < 1e-6

    def test_summary_and_csv(self):
        res = run_screening_study(n_values=(20,), delta_values=(0.0, 1.0), lambda_values=(0.1,), replicates=8)
        rows = res.summary()
        assert len(rows) == 2 and rows[1]["count"] == 8
        assert res.to_csv().startswith("n,lambda,delta,replicate,ape\n")

    @pytest.mark.slow
    def test_lambda_shift(self):
        """Relative APE curves agree across noise levels (n = 200, 500 replicates)."""
        deltas = (0.0, 0.01, 0.02, 0.05, 0.1, 1.0)
        res = run_screening_study(n_values=(200,), delta_values=deltas, lambda_values=(0.1, 0.5), replicates=500)
        for d in deltas:
            r1 = res.median(200, 0.1, d) / res.median(200, 0.1, 1.0)
            r5 = res.median(200, 0.5, d) / res.median(200, 0.5, 1.0)
            assert abs(r5 / r1 - 1) <= 0.15, (d, r1, r5)


def test_cv_ml_study_small():
    res = run_cv_ml_study(replicates=3, n=150, grid=3, pooled=(2,), seed=1)
    assert res.estimators == ["CV", "CV(2)", "ML", "truth"]
    assert len(res.rows) == 12
    truth = res.column("truth", "theta")
    assert np.all(truth == 0.05)
    assert res.summary_csv().splitlines()[0].startswith("estimator,theta_q25")
    again = run_cv_ml_study(replicates=3, n=150, grid=3, pooled=(2,), seed=1)
    assert again.to_csv() == res.to_csv()
