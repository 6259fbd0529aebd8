"""Small reference configurations and random flat-instance generators."""

from __future__ import annotations

import numpy as np

from .diagram import PersistenceDiagram


def square_pair():
    """Two diagrams whose four points form a square; two optimal groupings."""
    red = PersistenceDiagram([(1, 4), (3, 6)])
    black = PersistenceDiagram([(1, 6), (3, 4)])
    return [red, black]


def near_diagonal_pair():
    """Two diagrams hugging the diagonal; the optimum sends everything there."""
    return [PersistenceDiagram([(1, 2), (4, 5)]), PersistenceDiagram([(2, 3), (5, 6)])]


def three_point_flat():
    """Three one-point diagrams forming a single tight cluster.

    Variance of the flat grouping is 4/9.
    """
    return [
        PersistenceDiagram([(0, 10)]),
        PersistenceDiagram([(1, 10)]),
        PersistenceDiagram([(0, 11)]),
    ]


def two_cluster_flat():
    return [
        PersistenceDiagram([(0, 10), (20, 30)]),
        PersistenceDiagram([(1, 10), (21, 30)]),
        PersistenceDiagram([(0, 11), (20, 31)]),
    ]


def random_diagram(rng, max_points=4, low=0.0, high=10.0, min_points=0):
    """Uniform coordinates on [low, high], ordered so that death > birth."""
    n = int(rng.integers(min_points, max_points + 1))
    pts = []
    while len(pts) < n:
        a, b = rng.uniform(low, high, size=2)
        if a != b:
            pts.append((min(a, b), max(a, b)))
    return PersistenceDiagram(np.array(pts).reshape(-1, 2))


def random_flat_instance(rng, L, k, margin=5.0, radius=1.0, span=60.0, permute=True):
    """``L`` diagrams of ``k`` points each, arranged in ``k`` tight clusters.

    Cluster centres are rejection-sampled until every cross-cluster gap
    and every distance to the diagonal is at least ``margin`` times the
    largest possible cluster diameter (``2 * radius``).  Point order inside
    each diagram is shuffled when ``permute`` is set.

    Returns the diagrams and the cluster label of each point, per diagram.
    """
    diam = 2.0 * radius
    need = margin * diam
    # room for the cluster spread on top of the required gaps
    gap_c = need + diam
    clear_c = need + radius
    centres = []
    attempts = 0
    while len(centres) < k:
        attempts += 1
        if attempts > 10000:
            raise RuntimeError("could not place cluster centres; increase span")
        b = rng.uniform(0.0, span)
        d = b + rng.uniform(clear_c * np.sqrt(2.0), clear_c * np.sqrt(2.0) + span)
        c = np.array([b, d])
        if all(np.linalg.norm(c - o) >= gap_c for o in centres):
            centres.append(c)

    diagrams, labels = [], []
    for _ in range(L):
        pts = []
        for c in centres:
            r = radius * np.sqrt(rng.uniform())
            th = rng.uniform(0.0, 2.0 * np.pi)
            pts.append(c + r * np.array([np.cos(th), np.sin(th)]))
        order = rng.permutation(k) if permute else np.arange(k)
        diagrams.append(PersistenceDiagram(np.array(pts)[order].reshape(-1, 2)))
        labels.append(order)
    return diagrams, labels
