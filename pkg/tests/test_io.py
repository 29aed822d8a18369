import hashlib

import numpy as np
import pytest

from pargp.io import fmt, read_dataset, read_json, read_points, sha256_file, write_dataset, write_json
from pargp.model import Dataset, Rect, Role

from conftest import make_dataset


def test_fmt_round_trips():
    rng = np.random.default_rng(0)
    for v in np.concatenate([rng.standard_normal(200), [0.1, 1 / 3, 1e-300, -2.5e17]]):
        assert float(fmt(v)) == v


def test_dataset_round_trip(tmp_path):
    d = make_dataset(50, seed=2)
    p = tmp_path / "d.csv"
    write_dataset(p, d)
    back = read_dataset(p, d.domain)
    assert np.array_equal(back.locs, d.locs) and np.array_equal(back.values, d.values)
    assert np.array_equal(back.roles, d.roles)
    assert p.read_text().splitlines()[0] == "x,y,value,role"


def test_missing_role_defaults_to_train(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("x,y,value\n0.1,0.2,3\n0.5,0.5,-1\n")
    d = read_dataset(p)
    assert d.counts()[Role.TRAIN] == 2
    assert d.domain.closed_x and d.domain.xmin == 0.1


def test_bad_header(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError, match="missing column"):
        read_dataset(p)
    with pytest.raises(ValueError, match="x,y"):
        read_points(p)


def test_extra_columns(tmp_path):
    d = Dataset([[0.1, 0.1], [0.2, 0.2]], [1.0, 2.0], [0, 1], Rect(0, 1, 0, 1, True, True))
    p = tmp_path / "s.csv"
    write_dataset(p, d, extra={"is_shell": np.array([True, False])})
    assert p.read_text().splitlines()[1].endswith(",train,1")


def test_json_nan_and_numpy(tmp_path):
    p = tmp_path / "r.json"
    write_json(p, {"a": float("nan"), "b": np.float64(1.5), "c": [np.int64(2)]})
    assert read_json(p) == {"a": None, "b": 1.5, "c": [2]}


def test_sha256(tmp_path):
    p = tmp_path / "f"
    p.write_bytes(b"abc")
    assert sha256_file(p) == hashlib.sha256(b"abc").hexdigest()
