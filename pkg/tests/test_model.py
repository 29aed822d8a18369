import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import in_rect
from pargp.model import (CovParams, CovParamsFull, Dataset, Observation, Observations, Rect, Role,
                         child_rng, rescale_unit, split_roles)

from conftest import UNIT


class TestRole:
    def test_parse_aliases(self):
        assert Role.parse("Train") is Role.TRAIN
        assert Role.parse(" validation ") is Role.VALIDATION
        assert Role.parse("test") is Role.TEST
        assert Role.parse("unused") is Role.UNUSED

    def test_parse_rejects_unknown(self):
        with pytest.raises(ValueError, match="unknown role"):
            Role.parse("bogus")

    def test_label_round_trip(self):
        for r in Role:
            assert Role.parse(r.label) is r


class TestRect:
    def test_degenerate_rejected(self):
        with pytest.raises(ValueError):
            Rect(1.0, 1.0, 0.0, 1.0)

    @given(st.lists(st.tuples(st.floats(-0.5, 1.5), st.floats(-0.5, 1.5)), min_size=1, max_size=40),
           st.sampled_from([0.0, 0.01, 0.1]), st.booleans(), st.booleans())
    @settings(max_examples=60, deadline=None)
    def test_mask_matches_pointwise(self, pts, delta, cx, cy):
        r = Rect(0.2, 0.7, 0.1, 0.9, cx, cy)
        locs = np.array(pts)
        assert r.mask(locs, delta).tolist() == [in_rect(p, r, delta) for p in pts]

    def test_boundary_points(self):
        r = Rect(0.0, 1.0, 0.0, 1.0)
        locs = np.array([[0.0, 0.0], [1.0, 0.5], [0.5, 1.0]])
        assert r.mask(locs).tolist() == [True, False, False]
        assert r.closed().mask(locs).tolist() == [True, True, True]

    def test_split_children_tile_parent(self):
        left, right = UNIT.split(0, 0.4)
        assert not left.closed_x and right.closed_x
        assert left.closed_y and right.closed_y
        rng = np.random.default_rng(0)
        locs = np.vstack([rng.uniform(size=(200, 2)), [[0.4, 0.3], [1.0, 1.0], [0.0, 0.0]]])
        assert (left.mask(locs).astype(int) + right.mask(locs).astype(int) == 1).all()

    def test_split_outside_rejected(self):
        with pytest.raises(ValueError):
            UNIT.split(1, 1.0)

    def test_dict_round_trip(self):
        r = Rect(0.1, 0.3, -1.0, 2.0, True, False)
        assert Rect.from_dict(r.to_dict()) == r

    def test_bounding_widens_flat_axis(self):
        r = Rect.bounding(np.array([[0.5, 0.0], [0.5, 1.0]]))
        assert r.xmin < 0.5 < r.xmax and r.closed_x


class TestObservations:
    def test_read_only(self):
        obs = Observations([[0.0, 0.0]], [1.0])
        with pytest.raises(ValueError):
            obs.values[0] = 2.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            Observations([[0.0, 0.0], [1.0, 1.0]], [1.0])

    def test_from_list_and_empty(self):
        obs = Observations.from_list([Observation((0.1, 0.2), 3.0, Role.TRAIN)])
        assert len(obs) == 1 and obs.values[0] == 3.0
        assert len(Observations.from_list([])) == 0


class TestDataset:
    def test_outside_domain_rejected(self):
        with pytest.raises(ValueError, match="outside"):
            Dataset([[1.5, 0.5]], [0.0], [0], UNIT)

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            Dataset([[0.5, 0.5]], [np.nan], [0], UNIT)

    def test_role_views(self, small_data):
        c = small_data.counts()
        assert len(small_data.train) == c[Role.TRAIN] == 180
        assert len(small_data.validation) == c[Role.VALIDATION] == 60
        assert len(small_data.test) == c[Role.TEST] == 60

    def test_iteration(self, small_data):
        obs = small_data.observations
        assert len(obs) == len(small_data)
        assert obs[0].value == small_data.values[0]

    def test_require_cv_roles(self):
        d = Dataset([[0.5, 0.5]], [0.0], [0], UNIT)
        with pytest.raises(ValueError, match="n_V"):
            d.require_cv_roles()


class TestParams:
    def test_validation(self):
        with pytest.raises(ValueError):
            CovParams(-0.1, 0.1)
        with pytest.raises(ValueError):
            CovParams(0.1, 0.0)
        with pytest.raises(ValueError):
            CovParamsFull(0.0, 0.1, 0.1)

    def test_prediction_params(self):
        assert CovParamsFull(2.0, 0.5, 0.3).to_prediction_params() == CovParams(0.25, 0.3)


class TestSplitRoles:
    @pytest.mark.parametrize("n,fr,expected", [
        (1000, (0.8, 0.1, 0.1), (800, 100, 100, 0)),
        (10, (1 / 3, 1 / 3, 1 / 3), (4, 3, 3, 0)),
        (7, (0.5, 0.25, 0.0), (3, 2, 0, 2)),
        (5, (1.0, 0.0, 0.0), (5, 0, 0, 0)),
    ])
    def test_exact_counts(self, n, fr, expected):
        roles = split_roles(n, fr, seed=3)
        assert tuple(np.bincount(roles, minlength=4)) == expected

    def test_seeded(self):
        assert np.array_equal(split_roles(100, (0.5, 0.3, 0.2), 9), split_roles(100, (0.5, 0.3, 0.2), 9))
        assert not np.array_equal(split_roles(100, (0.5, 0.3, 0.2), 9), split_roles(100, (0.5, 0.3, 0.2), 10))

    def test_invalid(self):
        with pytest.raises(ValueError):
            split_roles(10, (0.8, 0.3, 0.1), 0)

    @given(st.integers(1, 500), st.floats(0, 1), st.floats(0, 1), st.integers(0, 2 ** 31))
    @settings(max_examples=60, deadline=None)
    def test_counts_close_to_fractions(self, n, a, b, seed):
        fr = (a, b * (1 - a), 0.0)
        roles = split_roles(n, fr, seed)
        counts = np.bincount(roles, minlength=4)
        for k in range(2):
            assert abs(counts[k] - n * fr[k]) < 1 + 1e-9


def test_child_rng_independent_of_order():
    a = child_rng(5, 1).standard_normal(3)
    child_rng(5, 2).standard_normal(10)
    assert np.array_equal(a, child_rng(5, 1).standard_normal(3))
    assert not np.array_equal(a, child_rng(5, 2).standard_normal(3))


def test_rescale_unit_per_axis():
    dom = Rect(10.0, 20.0, 0.0, 100.0, True, True)
    d = Dataset([[10.0, 0.0], [20.0, 100.0], [15.0, 25.0]], [1.0, 2.0, 3.0], [0, 1, 2], dom)
    u, amap = rescale_unit(d)
    assert np.allclose(u.locs, [[0, 0], [1, 1], [0.5, 0.25]])
    assert np.allclose(amap.inverse(u.locs), d.locs)
