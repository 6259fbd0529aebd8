"""Exact 2-Wasserstein distance between persistence diagrams.

The distance is the square root of the cheapest augmented bijection: every
point is either paired with a point of the other diagram (cost = squared
Euclidean distance) or sent to the diagonal (cost = squared distance to
the line ``y = x``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from .diagram import (
    DIAGONAL,
    PersistenceDiagram,
    diagonal_projection,
    entry_distance_sq,
    perp_norm_sq,
)
from .errors import CapExceededError, DiagramParseError, resolve_cap

DEFAULT_PAIR_CAP = 8

Pair = tuple[Optional[int], Optional[int]]


@dataclass(frozen=True)
class Matching:
    """An augmented bijection between ``source`` and ``target``.

    ``pairs`` holds index pairs ``(i, j)``; ``None`` on either side stands
    for the diagonal.  Diagonal-to-diagonal pairs are never stored.
    ``n_optima`` is filled in only when an exhaustive search has counted
    the optimal matchings.
    """

    source: PersistenceDiagram
    target: PersistenceDiagram
    pairs: tuple[Pair, ...]
    cost: float
    n_optima: Optional[int] = field(default=None, compare=False)

    def entry_pairs(self):
        for i, j in self.pairs:
            a = DIAGONAL if i is None else self.source[i]
            b = DIAGONAL if j is None else self.target[j]
            yield a, b

    def recompute_cost(self) -> float:
        return math.fsum(entry_distance_sq(a, b) for a, b in self.entry_pairs())

    @property
    def unique(self) -> Optional[bool]:
        return None if self.n_optima is None else self.n_optima == 1

    def target_of(self) -> dict[int, Optional[int]]:
        """Map source index -> target index (or None for the diagonal)."""
        return {i: j for i, j in self.pairs if i is not None}

    def reversed(self) -> "Matching":
        return Matching(
            self.target,
            self.source,
            tuple(sorted(((j, i) for i, j in self.pairs), key=_pair_key)),
            self.cost,
            self.n_optima,
        )

    def to_json(self) -> dict:
        def enc(entry):
            return "diag" if entry is DIAGONAL else ["p", entry.birth, entry.death]

        out = {
            "cost": self.cost,
            "distance": math.sqrt(self.cost),
            "pairs": [[enc(a), enc(b)] for a, b in self.entry_pairs()],
            "index_pairs": [[i, j] for i, j in self.pairs],
        }
        if self.n_optima is not None:
            out["n_optima"] = self.n_optima
        return out

    @classmethod
    def from_json(cls, obj, source, target) -> "Matching":
        try:
            pairs = tuple((p[0], p[1]) for p in obj["index_pairs"])
        except (KeyError, TypeError, IndexError) as exc:
            raise DiagramParseError(f"malformed matching JSON: {exc}") from exc
        m = cls(source, target, pairs, 0.0, obj.get("n_optima"))
        _check_bijection(m)
        return cls(source, target, pairs, m.recompute_cost(), obj.get("n_optima"))


def _pair_key(p):
    i, j = p
    return (i is None, -1 if i is None else i, j is None, -1 if j is None else j)


def _check_bijection(m: Matching):
    src = [i for i, _ in m.pairs if i is not None]
    tgt = [j for _, j in m.pairs if j is not None]
    if sorted(src) != list(range(len(m.source))) or sorted(tgt) != list(range(len(m.target))):
        raise DiagramParseError("matching does not cover every point exactly once")
    if any(i is None and j is None for i, j in m.pairs):
        raise DiagramParseError("matching contains a diagonal-diagonal pair")


def _make_matching(d1, d2, pairs, n_optima=None) -> Matching:
    pairs = tuple(sorted(pairs, key=_pair_key))
    m = Matching(d1, d2, pairs, 0.0, n_optima)
    return Matching(d1, d2, pairs, m.recompute_cost(), n_optima)


def augmented_cost_matrix(d1: PersistenceDiagram, d2: PersistenceDiagram) -> np.ndarray:
    """The ``(m+n) x (m+n)`` squared-cost matrix of the diagonal reduction.

    Rows are the points of ``d1`` followed by ``n`` diagonal slots; columns
    are the points of ``d2`` followed by ``m`` diagonal slots.  Point ``i``
    may only use diagonal slot ``i`` (and likewise for columns), which
    removes spurious ties among the slots.
    """
    x, y = d1.points, d2.points
    m, n = len(x), len(y)
    c = np.full((m + n, m + n), np.inf)
    if m and n:
        diff = x[:, None, :] - y[None, :, :]
        c[:m, :n] = np.einsum("ijk,ijk->ij", diff, diff)
    c[np.arange(m), n + np.arange(m)] = perp_norm_sq(x)
    c[m + np.arange(n), np.arange(n)] = perp_norm_sq(y)
    c[m:, n:] = 0.0
    return c


def w2_distance(d1, d2, check_ties=False, cap=None) -> tuple[float, Matching]:
    """Exact W2 distance and a deterministic optimal matching.

    Parameters
    ----------
    d1, d2 : PersistenceDiagram
    check_ties : bool
        When set and the instance is within the brute-force cap, the
        returned matching carries ``n_optima`` from exhaustive search.
    """
    d1, d2 = _as_diagram(d1), _as_diagram(d2)
    m, n = len(d1), len(d2)
    if m + n == 0:
        return 0.0, Matching(d1, d2, (), 0.0, 1 if check_ties else None)
    rows, cols = linear_sum_assignment(augmented_cost_matrix(d1, d2))
    pairs = []
    for r, c in zip(rows, cols):
        i = int(r) if r < m else None
        j = int(c) if c < n else None
        if i is None and j is None:
            continue
        pairs.append((i, j))
    n_optima = None
    if check_ties and m + n <= resolve_cap(cap, DEFAULT_PAIR_CAP):
        n_optima = brute_force_w2(d1, d2, cap=m + n)[1].n_optima
    match = _make_matching(d1, d2, pairs, n_optima)
    return math.sqrt(match.cost), match


def w2_squared(d1, d2) -> float:
    return w2_distance(d1, d2)[1].cost


def total_persistence(d) -> float:
    """``W2(D, empty)``: root of the summed squared distances to the diagonal."""
    d = _as_diagram(d)
    return math.sqrt(math.fsum(perp_norm_sq(d.points).tolist()))


def brute_force_w2(d1, d2, cap=None, tol=1e-12) -> tuple[float, Matching]:
    """Exhaustive minimum over all augmented bijections.

    Each point of ``d1`` goes either to a distinct point of ``d2`` or to the
    diagonal; leftover points of ``d2`` go to the diagonal.  The returned
    matching is the first optimum in enumeration order and records how many
    matchings attain the minimum (within ``tol``).
    """
    d1, d2 = _as_diagram(d1), _as_diagram(d2)
    m, n = len(d1), len(d2)
    limit = resolve_cap(cap, DEFAULT_PAIR_CAP)
    if m + n > limit:
        raise CapExceededError("brute_force_w2", m + n, limit)

    x = [tuple(p) for p in d1]
    y = [tuple(p) for p in d2]
    xd = [entry_distance_sq(p, DIAGONAL) for p in x]
    yd = [entry_distance_sq(p, DIAGONAL) for p in y]

    costs = []  # (cost, assignment)
    assign = [None] * m
    used = [False] * n

    def rec(i):
        if i == m:
            terms = []
            for a in range(m):
                b = assign[a]
                terms.append(xd[a] if b is None else entry_distance_sq(x[a], y[b]))
            terms.extend(yd[b] for b in range(n) if not used[b])
            costs.append((math.fsum(terms), tuple(assign)))
            return
        for b in range(n):
            if not used[b]:
                used[b] = True
                assign[i] = b
                rec(i + 1)
                used[b] = False
        assign[i] = None
        rec(i + 1)

    rec(0)
    best = min(c for c, _ in costs)
    optima = [a for c, a in costs if c <= best + tol * max(1.0, best)]
    chosen = optima[0]
    pairs = [(i, chosen[i]) for i in range(m)]
    hit = {b for b in chosen if b is not None}
    pairs.extend((None, b) for b in range(n) if b not in hit)
    match = _make_matching(d1, d2, pairs, len(optima))
    return math.sqrt(match.cost), match


def geodesic(d1, d2, matching: Matching, t: float) -> PersistenceDiagram:
    """Point at time ``t`` on the geodesic induced by ``matching``.

    Points matched to the diagonal slide along their own perpendicular;
    points landing exactly on the diagonal are dropped.
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"geodesic parameter t must lie in [0, 1], got {t}")
    d1, d2 = _as_diagram(d1), _as_diagram(d2)
    x, y = d1.points, d2.points
    out = []
    for i, j in matching.pairs:
        a = x[i] if i is not None else diagonal_projection(y[j])
        b = y[j] if j is not None else diagonal_projection(x[i])
        p = (1.0 - t) * a + t * b
        if p[1] > p[0]:
            out.append(p)
    return PersistenceDiagram._trusted(np.array(out).reshape(-1, 2))


def _as_diagram(d) -> PersistenceDiagram:
    return d if isinstance(d, PersistenceDiagram) else PersistenceDiagram(d)


__all__ = [
    "Matching",
    "augmented_cost_matrix",
    "brute_force_w2",
    "geodesic",
    "total_persistence",
    "w2_distance",
    "w2_squared",
]
