"""Rankings, tie-safe Spearman correlation and Tukey box-plot statistics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.stats import rankdata

from .errors import InsufficientOverlap, NoCommonYears, TooFewPoints
from .scores import ScoreVector

DESCENDING = "descending"
ASCENDING = "ascending"
CORRELATION_METHOD = "pearson correlation of average ranks"


@dataclass(frozen=True)
class Ranking:
    labels: tuple[str, ...]
    ranks: np.ndarray
    source_metric: str = ""
    year: int | None = None

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.labels, self.ranks.tolist()))


@dataclass(frozen=True)
class BoxStats:
    median: float
    q1: float
    q3: float
    iqr: float
    lower_fence: float
    upper_fence: float
    outliers: tuple[str, ...]


def rank(scores: ScoreVector, direction: str = DESCENDING, year: int | None = None) -> Ranking:
    """Rank 1 is the best score for ``direction``; tied scores share the average rank."""
    if direction not in (DESCENDING, ASCENDING):
        raise ValueError(f"direction must be {DESCENDING} or {ASCENDING}")
    v = scores.values if direction == ASCENDING else -scores.values
    return Ranking(scores.labels, rankdata(v, method="average"), scores.metric, year)


def _rank_pearson(x: np.ndarray, y: np.ndarray) -> float:
    rx = rankdata(x) - (len(x) + 1) / 2
    ry = rankdata(y) - (len(y) + 1) / 2
    den = np.sqrt((rx @ rx) * (ry @ ry))
    if den == 0:
        return float("nan")
    return float(np.clip(rx @ ry / den, -1.0, 1.0))


def spearman(a: Ranking, b: Ranking) -> float:
    """Spearman's rho over the labels the two rankings share.

    The shared subset is re-ranked before correlating, so labels present
    in only one ranking do not shift the others.
    """
    return _spearman_n(a, b)[0]


def _spearman_n(a: Ranking, b: Ranking) -> tuple[float, int]:
    da, db = a.as_dict(), b.as_dict()
    common = sorted(set(da) & set(db))
    if len(common) < 3:
        raise InsufficientOverlap(f"only {len(common)} shared labels (need 3)")
    x = np.array([da[k] for k in common])
    y = np.array([db[k] for k in common])
    return _rank_pearson(x, y), len(common)


def yearly_rank_correlation(
    series_a: Mapping[int, ScoreVector],
    series_b: Mapping[int, ScoreVector],
    direction: str = DESCENDING,
) -> list[tuple[int, float, int]]:
    """``(year, rho, n)`` rows for every year present in both series."""
    years = sorted(set(series_a) & set(series_b))
    if not years:
        raise NoCommonYears("the two series share no year")
    rows = []
    for y in years:
        rho, n = _spearman_n(rank(series_a[y], direction, y), rank(series_b[y], direction, y))
        rows.append((y, rho, n))
    return rows


def _median(x: np.ndarray) -> float:
    n = len(x)
    mid = n // 2
    return float(x[mid]) if n % 2 else float((x[mid - 1] + x[mid]) / 2)


def box_stats(scores: ScoreVector) -> BoxStats:
    """Tukey-hinge quartiles with fences 1.5 IQR beyond the hinges.

    The hinges are the medians of the lower and upper halves of the sorted
    sample; with an odd count the overall median belongs to neither half.
    """
    n = len(scores)
    if n < 4:
        raise TooFewPoints(f"box statistics need at least 4 values, got {n}")
    x = np.sort(scores.values)
    half = n // 2
    lower = x[:half]
    upper = x[half + 1 :] if n % 2 else x[half:]
    q1, med, q3 = _median(lower), _median(x), _median(upper)
    iqr = q3 - q1
    lo, hi = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    outliers = tuple(
        lab for lab, v in zip(scores.labels, scores.values) if v < lo or v > hi
    )
    return BoxStats(med, q1, q3, iqr, lo, hi, outliers)


def rank_trajectories(
    series: Mapping[int, ScoreVector], direction: str = DESCENDING
) -> list[tuple[int, str, float]]:
    """Long-format ``(year, label, rank)`` rows, sorted by year then rank."""
    rows = []
    for y in sorted(series):
        r = rank(series[y], direction, y)
        order = sorted(range(len(r.labels)), key=lambda i: (r.ranks[i], r.labels[i]))
        rows.extend((y, r.labels[i], float(r.ranks[i])) for i in order)
    return rows
