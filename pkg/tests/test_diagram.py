import io
import json
import math

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from pdfm import (
    DIAGONAL,
    DiagramParseError,
    DiagramValidationError,
    PersistenceDiagram,
    diagonal_projection,
    load_diagram,
    perp_norm,
    perpendicular,
    save_diagram,
)
from pdfm.diagram import PlanePoint, entry_distance_sq, load_diagram_dir


def test_projection_midpoint():
    np.testing.assert_array_equal(diagonal_projection((0, 2)), [1, 1])


def test_projection_of_sample_point():
    x = (1.5, 4.5)
    np.testing.assert_array_equal(diagonal_projection(x), [3, 3])
    assert perp_norm(x) == pytest.approx(1.5 * math.sqrt(2), abs=1e-12)


def test_projection_reconstructs_point(rng):
    pts = np.sort(rng.uniform(-5, 5, size=(50, 2)), axis=1)
    np.testing.assert_allclose(diagonal_projection(pts) + perpendicular(pts), pts, atol=1e-12, rtol=0)


def test_projection_is_nearest_diagonal_point(rng):
    for _ in range(20):
        b, d = np.sort(rng.uniform(0, 10, size=2))
        grid = np.linspace(-5, 15, 200001)
        dist = np.hypot(b - grid, d - grid)
        u = grid[np.argmin(dist)]
        assert diagonal_projection((b, d))[0] == pytest.approx(u, abs=1e-4)


def test_perp_norm_matches_line_minimization(rng):
    pts = np.sort(rng.uniform(0, 10, size=(100, 2)), axis=1)
    for b, d in pts:
        res = minimize_scalar(lambda u: math.hypot(b - u, d - u), bounds=(-1, 11),
                              method="bounded", options={"xatol": 1e-12})
        assert perp_norm((b, d)) == pytest.approx(res.fun, abs=1e-9)


def test_entry_distance_conventions():
    assert entry_distance_sq(DIAGONAL, DIAGONAL) == 0.0
    assert entry_distance_sq((0.0, 2.0), DIAGONAL) == pytest.approx(2.0)
    assert entry_distance_sq(DIAGONAL, (0.0, 2.0)) == pytest.approx(2.0)
    assert entry_distance_sq((1, 4), (3, 4)) == 4


@pytest.mark.parametrize("bad", [(2, 1), (3, 3), (0, math.inf), (math.nan, 1)])
def test_invalid_points_rejected(bad):
    with pytest.raises(DiagramValidationError):
        PersistenceDiagram([bad])


def test_multiset_equality_ignores_order():
    a = PersistenceDiagram([(0, 2), (1, 5), (0, 2)])
    b = PersistenceDiagram([(1, 5), (0, 2), (0, 2)])
    c = PersistenceDiagram([(1, 5), (0, 2)])
    assert a == b and hash(a) == hash(b)
    assert a != c


def test_diagram_is_read_only():
    d = PersistenceDiagram([(0, 2)])
    with pytest.raises(ValueError):
        d.points[0, 0] = 5.0


def test_load_empty():
    d = load_diagram(io.StringIO('{"points": []}'))
    assert len(d) == 0 and d == PersistenceDiagram.empty()


def test_load_single_point():
    d = load_diagram(io.StringIO('{"points": [[0, 2]]}'))
    assert list(d) == [PlanePoint(0.0, 2.0)]


def test_load_rejects_death_below_birth():
    with pytest.raises(DiagramValidationError, match="index 0"):
        load_diagram(io.StringIO('{"points": [[2, 1]]}'))


def test_load_rejects_nonfinite():
    with pytest.raises(DiagramValidationError, match="non-finite"):
        load_diagram(io.StringIO('{"points": [[0, 1], [0, Infinity]]}'))


@pytest.mark.parametrize("text,needle", [
    ("{not json", "malformed"),
    ('{"pts": []}', "points"),
    ('{"points": [[0, 1], [1]]}', "record 1"),
    ('{"points": [[0, "x"]]}', "record 0"),
])
def test_load_parse_errors(text, needle):
    with pytest.raises(DiagramParseError, match=needle):
        load_diagram(io.StringIO(text))


def test_round_trip_is_bit_exact(rng, tmp_path):
    pts = np.sort(rng.uniform(0, 1, size=(30, 2)), axis=1)
    d = PersistenceDiagram(pts)
    path = tmp_path / "d.json"
    save_diagram(d, path)
    back = load_diagram(path)
    assert back == d
    np.testing.assert_array_equal(back.points, d.points)


def test_directory_order_is_lexicographic(tmp_path):
    for name, pts in [("b.json", [[0, 3]]), ("a.json", [[0, 1]]), ("c.txt", [[0, 9]])]:
        (tmp_path / name).write_text(json.dumps({"points": pts}))
    loaded = load_diagram_dir(tmp_path)
    assert [n for n, _ in loaded] == ["a.json", "b.json"]
