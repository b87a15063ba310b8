"""Spearman correlation, quartile summaries and the stars-per-rank curve."""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from startrack.errors import UndefinedCorrelationError, ValidationError
from startrack.models import RepoRecord

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CorrelationResult:
    rho: float
    n: int
    tie_groups_x: int
    tie_groups_y: int

    def to_json(self) -> dict:
        return {"n": self.n, "rho": self.rho, "tie_groups_x": self.tie_groups_x, "tie_groups_y": self.tie_groups_y}


def average_ranks(values: Sequence[float]) -> tuple[np.ndarray, int]:
    """1-based ranks with ties sharing the mean of their positions.

    Also returns the number of tie groups (runs of two or more equal values).
    """
    a = np.asarray(values, dtype=np.float64)
    n = a.size
    order = np.argsort(a, kind="mergesort")
    ranks = np.empty(n, dtype=np.float64)
    groups = 0
    i = 0
    while i < n:
        j = i
        while j + 1 < n and a[order[j + 1]] == a[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        if j > i:
            groups += 1
        i = j + 1
    return ranks, groups


def spearman(x: Sequence[float], y: Sequence[float]) -> CorrelationResult:
    """Spearman's rho as the Pearson correlation of average ranks.

    Raises UndefinedCorrelationError when either input is constant.
    """
    if len(x) != len(y):
        raise ValidationError(f"length mismatch: {len(x)} vs {len(y)}")
    if len(x) < 2:
        raise ValidationError("spearman needs at least 2 observations")
    if not all(math.isfinite(v) for v in x) or not all(math.isfinite(v) for v in y):
        raise ValidationError("spearman inputs must be finite")

    rx, tx = average_ranks(x)
    ry, ty = average_ranks(y)
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    if sxx == 0.0 or syy == 0.0:
        which = "x" if sxx == 0.0 else "y"
        raise UndefinedCorrelationError(f"correlation undefined: all {which} values are tied")
    rho = float(np.dot(dx, dy)) / math.sqrt(sxx * syy)
    rho = min(1.0, max(-1.0, rho))
    return CorrelationResult(rho=rho, n=len(x), tie_groups_x=tx, tie_groups_y=ty)


@dataclass(frozen=True)
class QuartileSummary:
    group_key: str
    n: int
    q1: float
    median: float
    q3: float
    min: float
    max: float


@dataclass(frozen=True)
class GroupQuartiles:
    summaries: list[QuartileSummary]
    skipped: list[str] = field(default_factory=list)


def type7_quantile(sorted_values: Sequence[float], p: float) -> float:
    """Linear interpolation at position ``(n - 1) * p`` of sorted data."""
    pos = (len(sorted_values) - 1) * p
    lo = math.floor(pos)
    hi = min(lo + 1, len(sorted_values) - 1)
    frac = pos - lo
    return float(sorted_values[lo] + (sorted_values[hi] - sorted_values[lo]) * frac)


def quartiles_by_group(
    values: Iterable[tuple[str, float]] | Mapping[str, Sequence[float]],
) -> GroupQuartiles:
    groups: dict[str, list[float]] = {}
    if isinstance(values, Mapping):
        for key, vals in values.items():
            groups[key] = list(vals)
    else:
        for key, value in values:
            groups.setdefault(key, []).append(value)

    summaries = []
    skipped = []
    for key in sorted(groups):
        data = sorted(groups[key])
        if not data:
            logger.warning("quartiles: group %r is empty, skipped", key)
            skipped.append(key)
            continue
        summaries.append(
            QuartileSummary(
                group_key=key,
                n=len(data),
                q1=type7_quantile(data, 0.25),
                median=type7_quantile(data, 0.5),
                q3=type7_quantile(data, 0.75),
                min=float(data[0]),
                max=float(data[-1]),
            )
        )
    return GroupQuartiles(summaries, skipped)


def rank_star_curve(repos: Sequence[RepoRecord]) -> list[tuple[int, int]]:
    ordered = sorted(repos, key=lambda repo: (-repo.stars_at_snapshot, repo.full_name))
    return [(rank, repo.stars_at_snapshot) for rank, repo in enumerate(ordered, start=1)]
