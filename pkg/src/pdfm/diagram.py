"""Persistence diagrams, the diagonal, and their JSON form.

A diagram is a finite multiset of points ``(birth, death)`` with
``death > birth``.  The diagonal ``y = x`` is not stored; it acts as a
point of infinite multiplicity that absorbs unmatched points.  Distances
to it follow the usual convention ``|x - diag| = |x_perp|`` and
``|diag - diag| = 0``.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import IO, NamedTuple, Union

import numpy as np

from .errors import DiagramParseError, DiagramValidationError

SQRT2 = math.sqrt(2.0)


class PlanePoint(NamedTuple):
    """A point strictly above the diagonal."""

    birth: float
    death: float

    @classmethod
    def checked(cls, birth, death, index=None):
        b, d = float(birth), float(death)
        where = "" if index is None else f" at index {index}"
        if not (math.isfinite(b) and math.isfinite(d)):
            raise DiagramValidationError(f"non-finite coordinate{where}: ({birth}, {death})")
        if not d > b:
            raise DiagramValidationError(
                f"point{where} has death <= birth: ({birth}, {death})"
            )
        return cls(b, d)


class _Diagonal:
    """Singleton marker for the diagonal."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "DIAGONAL"

    def __reduce__(self):
        return (_Diagonal, ())


DIAGONAL = _Diagonal()
DiagramEntry = Union[PlanePoint, _Diagonal]


def is_diagonal(entry) -> bool:
    return entry is DIAGONAL


# -- diagonal geometry -------------------------------------------------------
# All helpers accept a single point or an (..., 2) array.

def diagonal_projection(x) -> np.ndarray:
    """Orthogonal projection onto the line ``y = x``."""
    x = np.asarray(x, dtype=float)
    mid = 0.5 * (x[..., 0] + x[..., 1])
    return np.stack([mid, mid], axis=-1)


def perpendicular(x) -> np.ndarray:
    """The component ``x - proj(x)``, orthogonal to the diagonal."""
    x = np.asarray(x, dtype=float)
    half = 0.5 * (x[..., 1] - x[..., 0])
    return np.stack([-half, half], axis=-1)


def perp_norm(x):
    """Distance to the diagonal, ``(death - birth) / sqrt(2)``."""
    x = np.asarray(x, dtype=float)
    return (x[..., 1] - x[..., 0]) / SQRT2


def perp_norm_sq(x):
    x = np.asarray(x, dtype=float)
    return 0.5 * (x[..., 1] - x[..., 0]) ** 2


def entry_distance_sq(a, b) -> float:
    """Squared distance between two diagram entries (points or DIAGONAL)."""
    if a is DIAGONAL and b is DIAGONAL:
        return 0.0
    if a is DIAGONAL:
        return float(perp_norm_sq(b))
    if b is DIAGONAL:
        return float(perp_norm_sq(a))
    return (a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2


# -- the diagram type --------------------------------------------------------

class PersistenceDiagram:
    """Immutable multiset of off-diagonal points.

    Storage order is kept (it fixes point indices for groupings and
    matchings) but equality and hashing ignore it.
    """

    __slots__ = ("_points",)

    def __init__(self, points=()):
        arr = np.array(points, dtype=float)
        if arr.size == 0:
            arr = np.zeros((0, 2))
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise DiagramValidationError(
                f"points must be an (n, 2) array, got shape {arr.shape}"
            )
        for i, (b, d) in enumerate(arr):
            PlanePoint.checked(b, d, index=i)
        arr.setflags(write=False)
        self._points = arr

    @classmethod
    def _trusted(cls, arr):
        # Skips validation; callers guarantee death > birth and finiteness.
        obj = cls.__new__(cls)
        arr = np.array(arr, dtype=float).reshape(-1, 2)
        arr.setflags(write=False)
        obj._points = arr
        return obj

    @classmethod
    def empty(cls):
        return cls._trusted(np.zeros((0, 2)))

    @property
    def points(self) -> np.ndarray:
        return self._points

    def __len__(self):
        return self._points.shape[0]

    def __iter__(self):
        for b, d in self._points:
            yield PlanePoint(float(b), float(d))

    def __getitem__(self, i) -> PlanePoint:
        b, d = self._points[i]
        return PlanePoint(float(b), float(d))

    def sorted_points(self) -> np.ndarray:
        if len(self) == 0:
            return self._points
        order = np.lexsort((self._points[:, 1], self._points[:, 0]))
        return self._points[order]

    def __eq__(self, other):
        if not isinstance(other, PersistenceDiagram):
            return NotImplemented
        return len(self) == len(other) and np.array_equal(
            self.sorted_points(), other.sorted_points()
        )

    def __hash__(self):
        return hash(self.sorted_points().tobytes())

    def allclose(self, other, atol=1e-9) -> bool:
        """Multiset comparison up to ``atol``, via the optimal matching."""
        if len(self) != len(other):
            return False
        a, b = self.sorted_points(), other.sorted_points()
        if np.allclose(a, b, rtol=0.0, atol=atol):
            return True
        from .wasserstein import w2_distance

        return w2_distance(self, other)[0] <= atol

    def __repr__(self):
        pts = ", ".join(f"({b:g}, {d:g})" for b, d in self._points)
        return f"PersistenceDiagram([{pts}])"

    def to_json(self) -> dict:
        return {"points": [[float(b), float(d)] for b, d in self._points]}

    @classmethod
    def from_json(cls, obj) -> "PersistenceDiagram":
        if not isinstance(obj, dict) or "points" not in obj:
            raise DiagramParseError('diagram JSON must be an object with a "points" array')
        raw = obj["points"]
        if not isinstance(raw, list):
            raise DiagramParseError('"points" must be an array')
        pts = []
        for i, rec in enumerate(raw):
            if (
                not isinstance(rec, (list, tuple))
                or len(rec) != 2
                or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in rec)
            ):
                raise DiagramParseError(f"record {i} is not a [birth, death] pair: {rec!r}")
            pts.append(PlanePoint.checked(rec[0], rec[1], index=i))
        return cls._trusted(np.array(pts, dtype=float).reshape(-1, 2))


def as_diagram(obj) -> PersistenceDiagram:
    if isinstance(obj, PersistenceDiagram):
        return obj
    return PersistenceDiagram(obj)


# -- serialization -----------------------------------------------------------

def _parse_constant(name):
    # json accepts NaN/Infinity by default; route them to validation instead.
    return float(name)


def load_diagram(source: Union[str, Path, IO[str]]) -> PersistenceDiagram:
    """Read a diagram from a path or text stream."""
    try:
        if hasattr(source, "read"):
            obj = json.load(source, parse_constant=_parse_constant)
        else:
            with open(source) as fh:
                obj = json.load(fh, parse_constant=_parse_constant)
    except json.JSONDecodeError as exc:
        raise DiagramParseError(f"malformed diagram JSON: {exc}") from exc
    return PersistenceDiagram.from_json(obj)


def save_diagram(diagram: PersistenceDiagram, target: Union[str, Path, IO[str]]) -> None:
    # json writes floats with repr(), which round-trips exactly.
    obj = diagram.to_json()
    if hasattr(target, "write"):
        json.dump(obj, target)
    else:
        with open(target, "w") as fh:
            json.dump(obj, fh)


def load_diagram_dir(directory) -> list[tuple[str, PersistenceDiagram]]:
    """Load every ``*.json`` in ``directory``, sorted by file name."""
    paths = sorted(Path(directory).glob("*.json"), key=lambda p: p.name)
    if not paths:
        raise DiagramValidationError(f"no *.json diagrams found in {directory}")
    out = []
    for p in paths:
        try:
            out.append((p.name, load_diagram(p)))
        except DiagramValidationError as exc:
            raise type(exc)(f"{p.name}: {exc}") from exc
    return out
