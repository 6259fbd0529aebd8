"""Fréchet means of finitely many persistence diagrams.

Three routes are provided:

* ``turner_mean`` -- the alternating (k-means style) local search: match the
  current candidate to every diagram, read off the induced grouping,
  replace the candidate by the grouping's mean, repeat.
* ``brute_force_optimal_grouping`` -- exhaustive enumeration of groupings
  for tiny inputs, used as an oracle.
* ``certify_unique_mean`` -- the mean of a flat grouping, which is the
  unique minimizer whenever one exists.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence, Union

import numpy as np

from .diagram import PersistenceDiagram
from .errors import CAP_ENV_VAR, CapExceededError, DiagramValidationError, resolve_cap
from .grouping import (
    DIAG,
    FlatnessReport,
    Grouping,
    check_flatness,
    find_flat_grouping,
    mean_diagram,
    row_means,
    variance_definitional,
)
from .wasserstein import w2_distance

DEFAULT_GROUPING_CAP = 9
MAX_BRUTE_DIAGRAMS = 3


@dataclass
class FrechetResult:
    mean: PersistenceDiagram
    grouping: Grouping
    variance: float
    iterations: int
    converged: bool
    unique_certified: bool
    init_descriptor: str
    variance_history: list[float] = field(default_factory=list)
    tie_detected: Optional[bool] = None

    def to_json(self) -> dict:
        return {
            "mean": self.mean.to_json(),
            "grouping": self.grouping.to_json(),
            "variance": self.variance,
            "iterations": self.iterations,
            "converged": self.converged,
            "unique_certified": self.unique_certified,
            "init": self.init_descriptor,
            "variance_history": list(self.variance_history),
            "tie_detected": self.tie_detected,
        }


def frechet_function(candidate, diagrams) -> float:
    """Average squared W2 distance from ``candidate`` to ``diagrams``."""
    diagrams = list(diagrams)
    if not diagrams:
        raise ValueError("frechet_function needs at least one diagram")
    return math.fsum(w2_distance(candidate, d)[1].cost for d in diagrams) / len(diagrams)


def induced_grouping(candidate: PersistenceDiagram, diagrams, check_ties=False):
    """Grouping read off from optimal matchings ``candidate -> D_j``.

    Each candidate point opens a row holding its partner in every diagram;
    points matched to the candidate's diagonal get rows of their own.
    Returns the grouping and, when ``check_ties`` is set, whether any of
    the matchings was non-unique (``None`` when that could not be checked).
    """
    L = len(diagrams)
    rows = [[DIAG] * L for _ in range(len(candidate))]
    tie = False if check_ties else None
    for j, d in enumerate(diagrams):
        _, match = w2_distance(candidate, d, check_ties=check_ties)
        if check_ties:
            if match.n_optima is None:
                tie = None if tie is False else tie
            elif match.n_optima > 1:
                tie = True
        for a, b in match.pairs:
            if b is None:
                continue
            if a is None:
                row = [DIAG] * L
                row[j] = b
                rows.append(row)
            else:
                rows[a][j] = b
    return Grouping(diagrams, rows), tie


def _resolve_init(diagrams, init, rng):
    if init is None:
        return diagrams[0], "diagram 0"
    if isinstance(init, PersistenceDiagram):
        return init, "given diagram"
    if isinstance(init, str) and init == "random":
        rng = np.random.default_rng(rng)
        k = int(rng.integers(len(diagrams)))
        return diagrams[k], f"random: diagram {k}"
    k = int(init)
    if not 0 <= k < len(diagrams):
        raise DiagramValidationError(f"init index {k} out of range for {len(diagrams)} diagrams")
    return diagrams[k], f"diagram {k}"


def turner_mean(
    diagrams: Sequence[PersistenceDiagram],
    init: Union[None, int, str, PersistenceDiagram] = None,
    max_iters: int = 100,
    seed=None,
    check_ties: bool = False,
) -> FrechetResult:
    """Alternating local search for a Fréchet mean.

    Stops as soon as a grouping repeats; grouping repetition is an exact
    fixed point, so no numerical tolerance is involved.  The variance of
    the successive groupings never increases.

    Parameters
    ----------
    init : int, "random", PersistenceDiagram or None
        Starting candidate.  An integer picks that (0-based) input
        diagram; "random" picks one using ``seed``.
    """
    diagrams = tuple(diagrams)
    if not diagrams:
        raise DiagramValidationError("turner_mean needs at least one diagram")
    candidate, descriptor = _resolve_init(diagrams, init, seed)

    seen = set()
    history = []
    tie = False if check_ties else None
    converged = False
    while True:
        grouping, step_tie = induced_grouping(candidate, diagrams, check_ties=check_ties)
        if check_ties:
            if step_tie is None and tie is False:
                tie = None
            elif step_tie:
                tie = True
        history.append(variance_definitional(grouping))
        key = grouping.canonical()
        if key in seen:
            converged = True
            break
        seen.add(key)
        if len(seen) >= max_iters:
            break
        candidate = mean_diagram(grouping)
    iterations = len(seen)

    return FrechetResult(
        mean=mean_diagram(grouping),
        grouping=grouping,
        variance=history[-1],
        iterations=iterations,
        converged=converged,
        unique_certified=check_flatness(grouping).flat,
        init_descriptor=descriptor,
        variance_history=history,
        tie_detected=tie,
    )


# -- exhaustive oracle -------------------------------------------------------

def _row_variance(coords, L):
    """Variance contribution of one row given its off-diagonal points."""
    mask = np.zeros((1, L), dtype=bool)
    mask[0, : len(coords)] = True
    c = np.full((1, L, 2), np.nan)
    c[0, : len(coords)] = coords
    m = row_means(c, mask)[0]
    d = coords - m
    perp = 0.5 * (m[1] - m[0])
    return math.fsum(np.einsum("ij,ij->i", d, d).tolist()) + (L - len(coords)) * 2.0 * perp * perp


def _check_brute_size(diagrams, cap):
    total = sum(len(d) for d in diagrams)
    limit = resolve_cap(cap, DEFAULT_GROUPING_CAP)
    if total > limit:
        raise CapExceededError("brute_force_optimal_grouping", total, limit)
    if len(diagrams) > MAX_BRUTE_DIAGRAMS and cap is None and not os.environ.get(CAP_ENV_VAR):
        raise CapExceededError("brute_force_optimal_grouping", len(diagrams), MAX_BRUTE_DIAGRAMS, "diagrams")


def _enumerate_partitions(diagrams):
    """Yield every grouping as a list of rows (lists of (j, i) labels).

    Points are placed one at a time, either opening a new row or joining an
    existing row that has no point from the same diagram yet.  Each set
    partition is produced exactly once.
    """
    labels = [(j, i) for j, d in enumerate(diagrams) for i in range(len(d))]
    rows: list[list[tuple[int, int]]] = []
    used: list[set] = []

    def rec(p):
        if p == len(labels):
            yield [list(r) for r in rows]
            return
        j, i = labels[p]
        for r in range(len(rows)):
            if j not in used[r]:
                rows[r].append((j, i))
                used[r].add(j)
                yield from rec(p + 1)
                rows[r].pop()
                used[r].discard(j)
        rows.append([(j, i)])
        used.append({j})
        yield from rec(p + 1)
        rows.pop()
        used.pop()

    yield from rec(0)


def _rows_to_index(rows, L):
    out = []
    for r in rows:
        row = [DIAG] * L
        for j, i in r:
            row[j] = i
        out.append(row)
    return out


def enumerate_groupings(diagrams, cap=None) -> Iterator[Grouping]:
    """Every grouping of ``diagrams``, one per row-permutation class."""
    diagrams = tuple(diagrams)
    _check_brute_size(diagrams, cap)
    L = len(diagrams)
    for rows in _enumerate_partitions(diagrams):
        yield Grouping(diagrams, _rows_to_index(rows, L))


def brute_force_optimal_grouping(diagrams, cap=None, tol=1e-12):
    """Exhaustive minimum-variance grouping.

    Returns
    -------
    grouping : Grouping
        First optimum in enumeration order.
    variance : float
        The Fréchet variance.
    n_optima : int
        Number of distinct groupings (up to row order) within ``tol``.
    """
    diagrams = tuple(diagrams)
    if not diagrams:
        raise DiagramValidationError("brute_force_optimal_grouping needs at least one diagram")
    _check_brute_size(diagrams, cap)
    L = len(diagrams)
    cache: dict[tuple, float] = {}

    def row_var(row):
        key = tuple(row)
        v = cache.get(key)
        if v is None:
            pts = np.array([diagrams[j].points[i] for j, i in row])
            v = _row_variance(pts, L)
            cache[key] = v
        return v

    scored = []
    for rows in _enumerate_partitions(diagrams):
        v = math.fsum(row_var(r) for r in rows) / L
        scored.append((v, rows))
    best = min(v for v, _ in scored)
    optima = [rows for v, rows in scored if v <= best + tol * max(1.0, best)]
    grouping = Grouping(diagrams, _rows_to_index(optima[0], L))
    return grouping, variance_definitional(grouping), len(optima)


# -- uniqueness --------------------------------------------------------------

def certify_unique_mean(diagrams) -> Optional[tuple[PersistenceDiagram, FlatnessReport]]:
    """Mean of a flat grouping plus its flatness report, or ``None``.

    ``None`` means no flat grouping was found; uniqueness is then
    undetermined, not refuted.
    """
    g = find_flat_grouping(diagrams)
    if g is None:
        return None
    return mean_diagram(g), check_flatness(g)
