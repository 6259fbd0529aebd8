"""Groupings: multi-matchings of points across L diagrams.

A grouping is a K x L table whose column ``j`` lists every point of
diagram ``j`` once, padded with diagonal markers to K rows, where K is
the total number of points.  Internally each cell holds the point index
in its diagram, or ``-1`` for the diagonal.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional, Sequence

import numpy as np

from .diagram import (
    DIAGONAL,
    PersistenceDiagram,
    PlanePoint,
    diagonal_projection,
    entry_distance_sq,
    perp_norm,
    perp_norm_sq,
)
from .errors import DiagramParseError, DiagramValidationError

DIAG = -1


class Grouping:
    """K x L grouping of ``diagrams``.

    Parameters
    ----------
    diagrams : sequence of PersistenceDiagram
        The L columns' source diagrams.
    rows : array-like of int, shape (r, L)
        Point indices per column, ``-1`` for the diagonal.  All-diagonal
        rows are dropped and the table is re-padded with trivial rows up
        to ``K = sum(len(D_j))``.
    """

    __slots__ = ("diagrams", "index", "coords", "mask")

    def __init__(self, diagrams: Sequence[PersistenceDiagram], rows):
        diagrams = tuple(diagrams)
        if not diagrams:
            raise DiagramValidationError("a grouping needs at least one diagram")
        L = len(diagrams)
        idx = np.array(rows, dtype=int)
        if idx.size == 0:
            idx = np.zeros((0, L), dtype=int)
        if idx.ndim != 2 or idx.shape[1] != L:
            raise DiagramValidationError(f"grouping rows must have {L} columns, got shape {idx.shape}")
        idx = idx[(idx != DIAG).any(axis=1)]
        for j, d in enumerate(diagrams):
            col = idx[:, j]
            col = np.sort(col[col != DIAG])
            if not np.array_equal(col, np.arange(len(d))):
                raise DiagramValidationError(
                    f"column {j} must contain each of the {len(d)} points of its diagram exactly once"
                )
        K = sum(len(d) for d in diagrams)
        pad = np.full((K - idx.shape[0], L), DIAG, dtype=int)
        idx = np.vstack([idx, pad])
        idx.setflags(write=False)

        coords = np.full((K, L, 2), np.nan)
        for j, d in enumerate(diagrams):
            sel = idx[:, j] != DIAG
            coords[sel, j] = d.points[idx[sel, j]]
        coords.setflags(write=False)
        mask = idx != DIAG
        mask.setflags(write=False)

        self.diagrams = diagrams
        self.index = idx
        self.coords = coords
        self.mask = mask

    @property
    def K(self) -> int:
        return self.index.shape[0]

    @property
    def L(self) -> int:
        return self.index.shape[1]

    @property
    def row_counts(self) -> np.ndarray:
        """``s_i``: number of off-diagonal entries per row."""
        return self.mask.sum(axis=1)

    def nontrivial_rows(self) -> np.ndarray:
        return np.flatnonzero(self.row_counts > 0)

    def entry(self, i, j):
        if self.index[i, j] == DIAG:
            return DIAGONAL
        b, d = self.coords[i, j]
        return PlanePoint(float(b), float(d))

    def row_entries(self, i) -> list:
        return [self.entry(i, j) for j in range(self.L)]

    def canonical(self) -> tuple:
        """Hashable form, invariant under row permutation."""
        rows = self.index[self.nontrivial_rows()]
        return tuple(sorted(map(tuple, rows.tolist())))

    def __eq__(self, other):
        if not isinstance(other, Grouping):
            return NotImplemented
        return self.diagrams == other.diagrams and self.canonical() == other.canonical()

    def __hash__(self):
        return hash(self.canonical())

    def __repr__(self):
        return f"Grouping(K={self.K}, L={self.L}, rows={self.canonical()})"

    def permuted(self, order) -> "Grouping":
        return Grouping(self.diagrams, self.index[np.asarray(order)])

    def to_json(self, include_trivial=False) -> dict:
        rows = self.index if include_trivial else self.index[self.nontrivial_rows()]
        return {
            "L": self.L,
            "rows": [["diag" if v == DIAG else int(v) for v in row] for row in rows.tolist()],
        }

    @classmethod
    def from_json(cls, obj, diagrams) -> "Grouping":
        try:
            L = int(obj["L"])
            raw = obj["rows"]
        except (KeyError, TypeError, ValueError) as exc:
            raise DiagramParseError(f'grouping JSON needs "L" and "rows": {exc}') from exc
        if L != len(diagrams):
            raise DiagramValidationError(f"grouping has L={L} but {len(diagrams)} diagrams were given")
        rows = []
        for r, row in enumerate(raw):
            if not isinstance(row, list) or len(row) != L:
                raise DiagramParseError(f"grouping row {r} must list {L} entries: {row!r}")
            cells = []
            for v in row:
                if v == "diag":
                    cells.append(DIAG)
                elif isinstance(v, int) and not isinstance(v, bool) and v >= 0:
                    cells.append(v)
                else:
                    raise DiagramParseError(f"grouping row {r} has an invalid entry {v!r}")
            rows.append(cells)
        return cls(diagrams, rows)


def load_grouping(path, diagrams) -> Grouping:
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DiagramParseError(f"malformed grouping JSON: {exc}") from exc
    return Grouping.from_json(obj, diagrams)


def save_grouping(grouping: Grouping, path) -> None:
    with open(path, "w") as fh:
        json.dump(grouping.to_json(), fh)


# -- means -------------------------------------------------------------------

def mean_point(entries, L=None):
    """Mean of L entries, some of which may be the diagonal.

    With ``s`` off-diagonal entries averaging to ``q``, the mean is
    ``(s*q + (L-s)*proj(q)) / L``; with ``s == 0`` it is the diagonal.
    """
    entries = list(entries)
    if L is None:
        L = len(entries)
    if len(entries) != L:
        raise ValueError(f"mean_point expects exactly L={L} entries, got {len(entries)}")
    pts = np.array([e for e in entries if e is not DIAGONAL], dtype=float).reshape(-1, 2)
    s = len(pts)
    if s == 0:
        return DIAGONAL
    q = pts.mean(axis=0)
    m = (s * q + (L - s) * diagonal_projection(q)) / L
    return PlanePoint(float(m[0]), float(m[1]))


def row_means(coords, mask) -> np.ndarray:
    """Vectorized ``mean_point`` over rows; NaN rows for trivial selections."""
    K, L = mask.shape
    s = mask.sum(axis=1)
    total = np.where(mask[..., None], coords, 0.0).sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        q = total / s[:, None]
    means = (s[:, None] * q + (L - s)[:, None] * diagonal_projection(q)) / L
    means[s == 0] = np.nan
    return means


def mean_diagram(grouping: Grouping) -> PersistenceDiagram:
    """One point per nontrivial selection, placed at the selection's mean."""
    means = row_means(grouping.coords, grouping.mask)
    means = means[grouping.row_counts > 0]
    keep = means[:, 1] > means[:, 0]
    if not keep.all():
        warnings.warn(f"{int((~keep).sum())} row mean(s) fell on the diagonal and were dropped")
    return PersistenceDiagram._trusted(means[keep])


# -- variance ----------------------------------------------------------------

def _row_variance_definitional(coords_row, mask_row, L):
    pts = coords_row[mask_row]
    s = len(pts)
    if s == 0:
        return 0.0
    q = pts.mean(axis=0)
    m = (s * q + (L - s) * diagonal_projection(q)) / L
    terms = [float(np.dot(p - m, p - m)) for p in pts]
    terms.extend([float(perp_norm_sq(m))] * (L - s))
    return math.fsum(terms)


def variance_definitional(grouping: Grouping) -> float:
    """``(1/L) * sum_j sum_i |G_i^j - mean_i|^2`` with the diagonal convention."""
    L = grouping.L
    rows = [
        _row_variance_definitional(grouping.coords[i], grouping.mask[i], L)
        for i in range(grouping.K)
    ]
    return math.fsum(rows) / L


def _row_variance_closed_form(entries, L):
    pts = [e for e in entries if e is not DIAGONAL]
    s = len(pts)
    if s == 0:
        return 0.0
    pairwise = math.fsum(entry_distance_sq(a, b) for a, b in combinations(entries, 2))
    proj = [diagonal_projection(p) for p in pts]
    along = math.fsum(float(np.dot(a - b, a - b)) for a, b in combinations(proj, 2))
    return pairwise / L**2 + (L - s) / (L**2 * s) * along


def variance_closed_form(grouping: Grouping) -> float:
    """Variance from pairwise row distances plus a diagonal correction.

    ``V = (1/L^2) sum_i sum_{w<l} |G_i^w - G_i^l|^2
        + sum_i (L - s_i)/(L^2 s_i) sum_{w<l<=s_i} |proj(G_i^{j_w}) - proj(G_i^{j_l})|^2``
    """
    L = grouping.L
    return math.fsum(
        _row_variance_closed_form(grouping.row_entries(i), L) for i in range(grouping.K)
    )


# -- flatness ----------------------------------------------------------------

@dataclass(frozen=True)
class FlatnessReport:
    diameters: tuple[float, ...]
    d_inter: float
    d_diag: float
    feasible_interval: Optional[tuple[float, float]]
    witness_lambda: Optional[float]
    flat: bool
    reason: Optional[str] = None

    @property
    def d_max(self) -> float:
        return max(self.diameters, default=0.0)

    def to_json(self) -> dict:
        def num(v):
            return None if v is None or math.isinf(v) else v

        return {
            "flat": self.flat,
            "reason": self.reason,
            "diameters": list(self.diameters),
            "d_max": self.d_max,
            "d_inter": num(self.d_inter),
            "d_diag": num(self.d_diag),
            "feasible_interval": None
            if self.feasible_interval is None
            else [self.feasible_interval[0], num(self.feasible_interval[1])],
            "witness_lambda": self.witness_lambda,
        }


def check_flatness(grouping: Grouping) -> FlatnessReport:
    """Measure the three flatness conditions and find the feasible lambdas.

    Only off-diagonal entries enter the diameter and separation terms;
    trivial rows are ignored.  A nontrivial row that also holds a diagonal
    entry can never be flat.
    """
    nontrivial = grouping.nontrivial_rows()
    clusters = [grouping.coords[i][grouping.mask[i]] for i in nontrivial]

    diameters = []
    for pts in clusters:
        if len(pts) < 2:
            diameters.append(0.0)
        else:
            diff = pts[:, None, :] - pts[None, :, :]
            diameters.append(float(np.sqrt(np.einsum("ijk,ijk->ij", diff, diff).max())))

    d_inter = math.inf
    for a, b in combinations(range(len(clusters)), 2):
        diff = clusters[a][:, None, :] - clusters[b][None, :, :]
        d_inter = min(d_inter, float(np.sqrt(np.einsum("ijk,ijk->ij", diff, diff).min())))

    d_diag = math.inf
    if clusters:
        d_diag = float(perp_norm(np.vstack(clusters)).min())

    d_max = max(diameters, default=0.0)
    mixed = bool((grouping.row_counts[nontrivial] < grouping.L).any())
    hi = min(d_inter, d_diag)

    if mixed:
        return FlatnessReport(tuple(diameters), d_inter, d_diag, None, None, False, "mixed selection")
    if not d_max < hi:
        return FlatnessReport(
            tuple(diameters), d_inter, d_diag, None, None, False, "no separating lambda"
        )
    if math.isinf(hi):
        witness = 2.0 * d_max if d_max > 0 else 1.0
    else:
        witness = 0.5 * (d_max + hi)
    return FlatnessReport(tuple(diameters), d_inter, d_diag, (d_max, hi), witness, True)


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, a):
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if rb < ra:
            ra, rb = rb, ra
        self.parent[rb] = ra
        return True


def find_flat_grouping(diagrams) -> Optional[Grouping]:
    """Search for a flat grouping by single-linkage clustering.

    The pooled points are merged edge by edge in order of distance.  After
    each distinct threshold, a partition into ``k`` clusters holding one
    point of every diagram is turned into a grouping and tested.  Returns
    ``None`` if no threshold yields a flat grouping.
    """
    diagrams = tuple(diagrams)
    if not diagrams:
        raise DiagramValidationError("find_flat_grouping needs at least one diagram")
    k = len(diagrams[0])
    if any(len(d) != k for d in diagrams):
        return None
    L = len(diagrams)
    if k == 0:
        return Grouping(diagrams, np.zeros((0, L), dtype=int))

    labels = [(j, i) for j, d in enumerate(diagrams) for i in range(len(d))]
    pts = np.vstack([d.points for d in diagrams])
    n = len(pts)
    iu, ju = np.triu_indices(n, k=1)
    dist = np.hypot(pts[iu, 0] - pts[ju, 0], pts[iu, 1] - pts[ju, 1])
    order = np.argsort(dist, kind="stable")

    uf = _UnionFind(n)
    components = n
    tried = set()

    def attempt():
        groups = {}
        for p in range(n):
            groups.setdefault(uf.find(p), []).append(p)
        rows = []
        for members in groups.values():
            row = [DIAG] * L
            for p in members:
                j, i = labels[p]
                if row[j] != DIAG:
                    return None
                row[j] = i
            if DIAG in row:
                return None
            rows.append(row)
        key = tuple(sorted(map(tuple, rows)))
        if key in tried:
            return None
        tried.add(key)
        g = Grouping(diagrams, rows)
        return g if check_flatness(g).flat else None

    if components == k:
        g = attempt()
        if g is not None:
            return g
    pos = 0
    while pos < len(order) and components > k:
        thresh = dist[order[pos]]
        while pos < len(order) and dist[order[pos]] == thresh:
            e = order[pos]
            if uf.union(int(iu[e]), int(ju[e])):
                components -= 1
            pos += 1
        if components == k:
            g = attempt()
            if g is not None:
                return g
    return None
