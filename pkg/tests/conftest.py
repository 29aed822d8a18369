import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from pargp.model import Dataset, Rect, split_roles  # noqa: E402

UNIT = Rect(0.0, 1.0, 0.0, 1.0, True, True)


def make_dataset(n, seed=0, fractions=(0.6, 0.2, 0.2), domain=UNIT):
    rng = np.random.default_rng(seed)
    locs = np.column_stack([rng.uniform(domain.xmin, domain.xmax, n), rng.uniform(domain.ymin, domain.ymax, n)])
    values = rng.standard_normal(n)
    return Dataset(locs, values, split_roles(n, fractions, seed), domain, seed)


@pytest.fixture
def small_data():
    return make_dataset(300, seed=11)


# one line per acceptance criterion, printed after the run
ACCEPTANCE: dict[int, str] = {}


def record(number: int, ok: bool, detail: str) -> bool:
    ACCEPTANCE[number] = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(ACCEPTANCE[number])
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
