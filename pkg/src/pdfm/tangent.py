"""Tangent-cone numerics at a persistence diagram.

A tangent vector at a base diagram ``z`` is a 2-vector attached to each
point of ``z`` plus any number of vectors sprouting from the diagonal
(perpendicular to it).  Log maps are built from the deterministic optimal
matching, and inner products pair components that sit at the same place:
point vectors by base index, diagonal vectors only when their attachment
points on the diagonal coincide.  For configurations whose optimal
matchings stay inside clusters this aligned form is exact; elsewhere it is
the value along the chosen geodesics, which is what ``comparison_cosine``
exists to cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .diagram import PersistenceDiagram, diagonal_projection, perpendicular
from .errors import DiagramValidationError
from .grouping import Grouping
from .wasserstein import Matching, w2_distance, w2_squared

ATTACH_TOL = 1e-12


@dataclass(frozen=True)
class TangentVector:
    """A tangent vector at ``base``.

    ``point_vectors[i]`` is attached to ``base.points[i]``.  Each row of
    ``diagonal_vectors`` sprouts from the diagonal point in the same row
    of ``attachments`` and is perpendicular to the diagonal.
    """

    base: PersistenceDiagram
    point_vectors: np.ndarray
    diagonal_vectors: np.ndarray
    attachments: np.ndarray

    def __post_init__(self):
        pv = np.asarray(self.point_vectors, dtype=float).reshape(-1, 2)
        dv = np.asarray(self.diagonal_vectors, dtype=float).reshape(-1, 2)
        at = np.asarray(self.attachments, dtype=float).reshape(-1, 2)
        if len(pv) != len(self.base):
            raise DiagramValidationError(
                f"need one point vector per base point ({len(self.base)}), got {len(pv)}"
            )
        if len(dv) != len(at):
            raise DiagramValidationError("each diagonal vector needs an attachment point")
        along = dv @ np.array([1.0, 1.0])
        scale = max(1.0, float(np.abs(dv).max(initial=0.0)))
        if np.any(np.abs(along) > 1e-12 * scale):
            raise DiagramValidationError("diagonal vectors must be perpendicular to the diagonal")
        for name, arr in (("point_vectors", pv), ("diagonal_vectors", dv), ("attachments", at)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def norm_sq(self) -> float:
        return math.fsum(
            np.einsum("ij,ij->i", self.point_vectors, self.point_vectors).tolist()
            + np.einsum("ij,ij->i", self.diagonal_vectors, self.diagonal_vectors).tolist()
        )

    @property
    def norm(self) -> float:
        return math.sqrt(self.norm_sq)

    def scaled(self, c: float) -> "TangentVector":
        if c < 0 and len(self.diagonal_vectors):
            raise DiagramValidationError("diagonal components cannot be reversed")
        return TangentVector(self.base, c * self.point_vectors, c * self.diagonal_vectors, self.attachments)

    def opposite(self) -> Optional["TangentVector"]:
        """The negated vector, or ``None`` if it is not a tangent direction.

        Reversing a vector that sprouts from the diagonal would push a
        point below the diagonal, so only vectors without nonzero diagonal
        parts have an opposite.
        """
        if np.any(np.abs(self.diagonal_vectors) > 0):
            return None
        return TangentVector(self.base, -self.point_vectors, self.diagonal_vectors, self.attachments)

    def in_hilbert_subcone(self) -> bool:
        return self.opposite() is not None

    def exp(self, t: float) -> PersistenceDiagram:
        """Diagram reached by moving along the vector for time ``t``.

        Points reaching or crossing the diagonal are dropped.
        """
        pts = self.base.points + t * self.point_vectors
        sprouts = self.attachments + t * self.diagonal_vectors
        allp = np.vstack([pts, sprouts])
        return PersistenceDiagram._trusted(allp[allp[:, 1] > allp[:, 0]])


@dataclass(frozen=True)
class LogVector(TangentVector):
    """A tangent vector produced by ``log_map``, with the matching used."""

    matching: Optional[Matching] = None


def log_map(base, target) -> LogVector:
    """Initial velocity of the geodesic from ``base`` to ``target``.

    Uses the deterministic optimal matching.  Base points matched to the
    diagonal point at their own projection; target points matched to the
    base's diagonal sprout from their projection.
    """
    base = _as_diagram(base)
    target = _as_diagram(target)
    _, match = w2_distance(base, target)
    pv = np.zeros((len(base), 2))
    dv, at = [], []
    x, y = base.points, target.points
    for i, j in match.pairs:
        if i is not None and j is not None:
            pv[i] = y[j] - x[i]
        elif i is not None:
            pv[i] = -perpendicular(x[i])
        else:
            dv.append(perpendicular(y[j]))
            at.append(diagonal_projection(y[j]))
    return LogVector(base, pv, np.array(dv).reshape(-1, 2), np.array(at).reshape(-1, 2), match)


def _check_same_base(u: TangentVector, v: TangentVector):
    if u.base is v.base:
        return
    if len(u.base) != len(v.base) or not np.array_equal(u.base.points, v.base.points):
        raise DiagramValidationError("tangent vectors live at different base diagrams")


def _diagonal_inner(u: TangentVector, v: TangentVector) -> float:
    """Best pairing of diagonal sprouts that share an attachment point."""
    if not len(u.diagonal_vectors) or not len(v.diagonal_vectors):
        return 0.0
    gap = u.attachments[:, None, :] - v.attachments[None, :, :]
    same = np.abs(gap).max(axis=2) <= ATTACH_TOL
    if not same.any():
        return 0.0
    gain = np.where(same, u.diagonal_vectors @ v.diagonal_vectors.T, 0.0)
    rows, cols = linear_sum_assignment(gain, maximize=True)
    return math.fsum(gain[rows, cols].tolist())


def inner_product(u: TangentVector, v: TangentVector) -> float:
    """Aligned inner product ``|u||v| cos(angle)`` of two tangent vectors."""
    _check_same_base(u, v)
    point_part = np.einsum("ij,ij->i", u.point_vectors, v.point_vectors).tolist()
    return math.fsum(point_part + [_diagonal_inner(u, v)])


def cosine(u: TangentVector, v: TangentVector) -> float:
    nu, nv = u.norm, v.norm
    if nu == 0 or nv == 0:
        raise ZeroDivisionError("the angle to the zero tangent vector is undefined")
    return min(1.0, max(-1.0, inner_product(u, v) / (nu * nv)))


def cone_metric(u: TangentVector, v: TangentVector) -> float:
    """Law-of-cosines distance between two tangent vectors."""
    _check_same_base(u, v)
    if _same_components(u, v):
        return 0.0
    nu, nv = u.norm, v.norm
    if nu == 0 or nv == 0:
        return max(nu, nv)
    inner = min(nu * nv, max(-nu * nv, inner_product(u, v)))
    return math.sqrt(max(u.norm_sq + v.norm_sq - 2.0 * inner, 0.0))


def _same_components(u: TangentVector, v: TangentVector) -> bool:
    return (
        np.array_equal(u.point_vectors, v.point_vectors)
        and np.array_equal(u.diagonal_vectors, v.diagonal_vectors)
        and np.array_equal(u.attachments, v.attachments)
    )


def zero_vector(base) -> TangentVector:
    base = _as_diagram(base)
    return TangentVector(base, np.zeros((len(base), 2)), np.zeros((0, 2)), np.zeros((0, 2)))


def average(vectors: Sequence[TangentVector], weights=None) -> TangentVector:
    """Weighted component-wise mean of tangent vectors at one base.

    Diagonal sprouts at the same attachment point are summed into one.
    """
    vectors = list(vectors)
    if not vectors:
        raise ValueError("average of no vectors")
    for v in vectors[1:]:
        _check_same_base(vectors[0], v)
    w = np.full(len(vectors), 1.0 / len(vectors)) if weights is None else np.asarray(weights, float)
    if np.any(w < 0):
        raise DiagramValidationError("weights must be nonnegative")
    pv = sum(wi * v.point_vectors for wi, v in zip(w, vectors))
    merged: list[list] = []
    for wi, v in zip(w, vectors):
        for vec, att in zip(v.diagonal_vectors, v.attachments):
            for slot in merged:
                if np.abs(slot[1] - att).max() <= ATTACH_TOL:
                    slot[0] = slot[0] + wi * vec
                    break
            else:
                merged.append([wi * vec, att])
    dv = np.array([m[0] for m in merged]).reshape(-1, 2)
    at = np.array([m[1] for m in merged]).reshape(-1, 2)
    return TangentVector(vectors[0].base, pv, dv, at)


def comparison_cosine(u: TangentVector, v: TangentVector, t: float, s: float) -> float:
    """Cosine of the comparison angle at the base between ``exp(u, t)`` and ``exp(v, s)``.

    Its limit as ``t, s -> 0`` is the Alexandrov angle; distances are
    computed by the full matcher, independent of any alignment.
    """
    _check_same_base(u, v)
    z = u.base
    a, b = u.exp(t), v.exp(s)
    da, db = w2_squared(z, a), w2_squared(z, b)
    dab = w2_squared(a, b)
    return (da + db - dab) / (2.0 * math.sqrt(da * db))


def hugging(base, y, x) -> float:
    """Hugging function at ``base`` with respect to ``y``, evaluated at ``x``.

    ``1 - (C^2(log x, log y) - W2^2(x, y)) / W2^2(y, base)``
    """
    base, y, x = _as_diagram(base), _as_diagram(y), _as_diagram(x)
    d_yz = w2_squared(y, base)
    if d_yz == 0.0:
        raise ZeroDivisionError("hugging function requires y != base (W2(y, base) > 0)")
    c = cone_metric(log_map(base, x), log_map(base, y))
    return 1.0 - (c * c - w2_squared(x, y)) / d_yz


def barycenter_equality_check(diagrams, candidate) -> float:
    """``(1/L^2) sum_i sum_j <log D_i, log D_j>`` at ``candidate``.

    Zero at a Fréchet mean, nonnegative everywhere.
    """
    diagrams = list(diagrams)
    logs = [log_map(candidate, d) for d in diagrams]
    L = len(logs)
    terms = []
    for i in range(L):
        terms.append(inner_product(logs[i], logs[i]))
        for j in range(i + 1, L):
            terms.append(2.0 * inner_product(logs[i], logs[j]))
    return math.fsum(terms) / L**2


def one_sided_check(diagrams, candidate, y) -> float:
    """``(1/L) sum_i <log D_i, log y>`` at ``candidate``; nonpositive at a mean."""
    diagrams = list(diagrams)
    ly = log_map(candidate, y)
    return math.fsum(inner_product(log_map(candidate, d), ly) for d in diagrams) / len(diagrams)


def hugging_equality_check(diagrams, z_star, y) -> tuple[float, float]:
    """Both sides of the hugging identity at a Fréchet mean ``z_star``.

    lhs = W2^2(y, z*) * mean_i kappa(z*, y, D_i)
    rhs = mean_i (W2^2(D_i, y) - W2^2(D_i, z*))
    """
    diagrams = list(diagrams)
    L = len(diagrams)
    d_yz = w2_squared(y, z_star)
    if d_yz == 0.0:
        raise ZeroDivisionError("hugging equality is undefined at y == z_star")
    lhs = d_yz * math.fsum(hugging(z_star, y, d) for d in diagrams) / L
    rhs = math.fsum(w2_squared(d, y) - w2_squared(d, z_star) for d in diagrams) / L
    return lhs, rhs


def lambda_mixture(grouping: Grouping, weights) -> PersistenceDiagram:
    """Diagram with one point per selection at ``sum_j w_j G_i^j``.

    Requires every nontrivial selection to hold a point from each diagram,
    as in a flat grouping.
    """
    w = np.asarray(weights, dtype=float)
    if w.shape != (grouping.L,):
        raise DiagramValidationError(f"need {grouping.L} weights, got shape {w.shape}")
    if np.any(w < 0) or not np.all(np.isfinite(w)) or abs(w.sum() - 1.0) > 1e-12:
        raise DiagramValidationError("weights must be nonnegative and sum to 1")
    rows = grouping.nontrivial_rows()
    if np.any(grouping.row_counts[rows] < grouping.L):
        raise DiagramValidationError("lambda mixtures need selections without diagonal entries")
    pts = np.einsum("j,ijk->ik", w, grouping.coords[rows])
    return PersistenceDiagram._trusted(pts)


def cauchy_family_check(n_max: int, N: int, M: int) -> tuple[float, float]:
    """Squared cone distance between truncated vector fields ``V_N`` and ``V_M``.

    Base diagram: ``(0, 1/n^2)`` for ``n = 1..n_max``.  ``V_N`` attaches
    ``(1/n, -1/n)`` to the first ``N`` points and zero elsewhere.  Returns
    the squared distance and the bound ``2 * sum_{n=N+1}^{M} 1/n^2``.
    """
    if not 1 <= N <= M <= n_max:
        raise ValueError(f"need 1 <= N <= M <= n_max, got N={N}, M={M}, n_max={n_max}")
    n = np.arange(1, n_max + 1, dtype=float)
    base = PersistenceDiagram._trusted(np.column_stack([np.zeros(n_max), 1.0 / n**2]))
    field = np.column_stack([1.0 / n, -1.0 / n])

    def truncated(k):
        pv = field.copy()
        pv[k:] = 0.0
        return TangentVector(base, pv, np.zeros((0, 2)), np.zeros((0, 2)))

    vn, vm = truncated(N), truncated(M)
    sq = cone_metric(vn, vm) ** 2
    bound = 2.0 * math.fsum((1.0 / n[N:M] ** 2).tolist())
    return sq, bound


def _as_diagram(d) -> PersistenceDiagram:
    return d if isinstance(d, PersistenceDiagram) else PersistenceDiagram(d)
