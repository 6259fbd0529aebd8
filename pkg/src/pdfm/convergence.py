"""Monte Carlo check of the finite-sample rate E[W2^2(mean_B, mean_pop)] <= var / B.

Samples of size B are drawn i.i.d. from the uniform measure on L
population diagrams.  Each sample inherits the population grouping column
by column, and its mean diagram is compared to the population mean with
the exact matcher.

Every (B, trial) cell gets its own PCG64 stream derived from
``SeedSequence(seed, spawn_key=(B, trial))``, so results do not depend on
execution order.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .diagram import PersistenceDiagram
from .grouping import Grouping, mean_diagram, variance_definitional
from .wasserstein import w2_squared

RNG_NAME = "numpy.PCG64/SeedSequence(seed, spawn_key=(B, trial))"
CSV_COLUMNS = ("B", "trials", "estimate", "std_error", "bound", "seed")


@dataclass
class ConvergenceReport:
    B: int
    trials: int
    estimate: float
    std_error: float
    bound: float
    seed: int
    per_trial: Optional[np.ndarray] = field(default=None, repr=False)

    def row(self) -> list:
        return [self.B, self.trials, repr(self.estimate), repr(self.std_error), repr(self.bound), self.seed]


def cell_rng(seed: int, B: int, trial: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(B, trial))))


def _draw(rng, L, B):
    return rng.integers(0, L, size=B)


def sample_induced_mean(diagrams, grouping: Grouping, B: int, rng) -> tuple[PersistenceDiagram, Grouping]:
    """Draw ``B`` diagrams with replacement and average them through ``grouping``.

    The induced grouping's column ``b`` is a copy of the population column
    of the ``b``-th draw.
    """
    if B < 1:
        raise ValueError(f"sample size B must be >= 1, got {B}")
    rng = np.random.default_rng(rng)
    draws = _draw(rng, grouping.L, B)
    induced = Grouping([grouping.diagrams[j] for j in draws], grouping.index[:, draws])
    return mean_diagram(induced), induced


def _fast_sample_mean(coords0, mask, counts):
    # Same result as mean_diagram on the induced grouping, computed from
    # draw counts per population column.
    B = int(counts.sum())
    s = mask @ counts
    total = np.einsum("ijk,j->ik", coords0, counts)
    hit = s > 0
    q = total[hit] / s[hit, None]
    mid = 0.5 * (q[:, 0] + q[:, 1])
    proj = np.column_stack([mid, mid])
    pts = (s[hit, None] * q + (B - s[hit])[:, None] * proj) / B
    return PersistenceDiagram._trusted(pts[pts[:, 1] > pts[:, 0]])


def convergence_experiment(
    diagrams: Sequence[PersistenceDiagram],
    grouping: Grouping,
    B_list: Iterable[int],
    trials: int,
    seed: int,
    keep_per_trial: bool = False,
) -> list[ConvergenceReport]:
    """Estimate ``E[W2^2(sample mean, population mean)]`` for each ``B``.

    Returns one report per ``B`` with the Monte Carlo estimate, its
    standard error and the bound ``variance(grouping) / B``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if tuple(diagrams) != grouping.diagrams:
        raise ValueError("grouping was built for a different list of diagrams")
    target = mean_diagram(grouping)
    sigma2 = variance_definitional(grouping)
    L = grouping.L
    coords0 = np.nan_to_num(grouping.coords, nan=0.0)
    mask = grouping.mask.astype(float)

    reports = []
    for B in B_list:
        B = int(B)
        if B < 1:
            raise ValueError(f"sample size B must be >= 1, got {B}")
        vals = np.empty(trials)
        for t in range(trials):
            draws = _draw(cell_rng(seed, B, t), L, B)
            counts = np.bincount(draws, minlength=L).astype(float)
            vals[t] = w2_squared(_fast_sample_mean(coords0, mask, counts), target)
        est = float(np.mean(vals))
        se = float(np.std(vals, ddof=1) / math.sqrt(trials)) if trials > 1 else math.nan
        reports.append(
            ConvergenceReport(B, trials, est, se, sigma2 / B, int(seed), vals if keep_per_trial else None)
        )
    return reports


def rate_fit(reports: Sequence[ConvergenceReport]) -> float:
    """Least-squares slope of log(estimate) against log(B)."""
    pts = [(r.B, r.estimate) for r in reports if r.estimate > 0]
    if len({b for b, _ in pts}) < 3:
        raise ValueError("rate_fit needs at least 3 distinct B values with positive estimates")
    x = np.log([b for b, _ in pts])
    y = np.log([e for _, e in pts])
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def reports_to_csv(reports: Sequence[ConvergenceReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in reports:
        w.writerow(r.row())
    return buf.getvalue()
