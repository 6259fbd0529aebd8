import json

import numpy as np
import pytest
from hypothesis import strategies as st

from pdfm import PersistenceDiagram
from pdfm.instances import (
    near_diagonal_pair,
    square_pair,
    three_point_flat,
    two_cluster_flat,
)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def square():
    return square_pair()


@pytest.fixture
def flat3():
    return three_point_flat()


@pytest.fixture
def two_cluster():
    return two_cluster_flat()


@pytest.fixture
def near_diag():
    return near_diagonal_pair()


@pytest.fixture
def write_dir(tmp_path):
    """Write diagrams as 01.json, 02.json, ... into a fresh directory."""

    def _write(diagrams, name="dgms"):
        d = tmp_path / name
        d.mkdir()
        for k, dgm in enumerate(diagrams, start=1):
            (d / f"{k:02d}.json").write_text(json.dumps(dgm.to_json()))
        return d

    return _write


@st.composite
def diagrams(draw, max_points=4, low=0.0, high=10.0):
    n = draw(st.integers(0, max_points))
    pts = []
    for _ in range(n):
        a = draw(st.floats(low, high, allow_nan=False, allow_infinity=False))
        gap = draw(st.floats(1e-3, high - low, allow_nan=False, allow_infinity=False))
        pts.append((a, a + gap))
    return PersistenceDiagram(np.array(pts).reshape(-1, 2))


def random_grouping(rng, dgms, p_new=0.4):
    """Random valid grouping: each point joins a compatible row or opens one."""
    from pdfm import Grouping

    L = len(dgms)
    rows = []
    for j, d in enumerate(dgms):
        for i in range(len(d)):
            free = [r for r in rows if r[j] == -1]
            if free and rng.uniform() > p_new:
                free[int(rng.integers(len(free)))][j] = i
            else:
                row = [-1] * L
                row[j] = i
                rows.append(row)
    order = rng.permutation(len(rows)) if rows else []
    return Grouping(dgms, [rows[k] for k in order])
