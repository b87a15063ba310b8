"""Weekly star series and log-scale rank trajectories.

Weeks are fixed 7-day windows counted backwards from the snapshot instant.
With ``W`` weeks, week ``w`` (1-based) covers the half-open interval
``[S - (W + 1 - w) * 7d, S - (W - w) * 7d)``. Events earlier than week 1
form the baseline. An event stamped exactly at ``S`` is counted in week
``W`` so that no event is lost.
"""

from __future__ import annotations

import bisect
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from datetime import datetime, timedelta

import numpy as np

from startrack.errors import ValidationError
from startrack.models import RepoRecord, StarEvent, ensure_utc

WEEKS = 52
WEEK = timedelta(days=7)
MIN_AGE = timedelta(days=364)


@dataclass(frozen=True)
class WeeklyStarSeries:
    repo: str
    snapshot_at: datetime
    baseline: int
    weekly_new: tuple[int, ...]
    total_at_new: int = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "weekly_new", tuple(int(n) for n in self.weekly_new))
        if self.baseline < 0 or any(n < 0 for n in self.weekly_new):
            raise ValidationError(f"{self.repo}: star counts must be non-negative")
        if not self.weekly_new:
            raise ValidationError(f"{self.repo}: series needs at least one week")
        object.__setattr__(self, "total_at_new", self.baseline + sum(self.weekly_new))

    @property
    def weeks(self) -> int:
        return len(self.weekly_new)

    def cumulative(self) -> np.ndarray:
        """Stars accumulated by the end of each week."""
        return self.baseline + np.cumsum(np.asarray(self.weekly_new, dtype=np.int64))


@dataclass(frozen=True)
class RankTrajectory:
    """Weekly ``log2(rank) + 1`` values; ``ranks`` keeps the integer ranks
    when the trajectory came from :func:`rank_corpus`."""

    repo: str
    r: tuple[float, ...]
    ranks: tuple[int, ...] = ()

    @property
    def r_old(self) -> float:
        return self.r[0]

    @property
    def r_now(self) -> float:
        return self.r[-1]

    @property
    def r_top(self) -> float:
        return min(self.r)

    @property
    def r_bottom(self) -> float:
        return max(self.r)


def week_bounds(snapshot_at: datetime, weeks: int = WEEKS) -> list[datetime]:
    """Return the ``weeks + 1`` boundaries; week ``w`` is ``[b[w-1], b[w])``."""
    snapshot_at = ensure_utc(snapshot_at)
    return [snapshot_at - (weeks - i) * WEEK for i in range(weeks + 1)]


def bucketize(
    events: Sequence[StarEvent],
    snapshot_at: datetime,
    weeks: int = WEEKS,
    repo: str | None = None,
) -> WeeklyStarSeries:
    if weeks < 1:
        raise ValidationError("weeks must be at least 1")
    snapshot_at = ensure_utc(snapshot_at)
    if repo is None:
        repo = events[0].repo if events else ""
    stamps = [event.starred_at for event in events]
    for i in range(1, len(stamps)):
        if stamps[i] < stamps[i - 1]:
            raise ValidationError(f"{repo}: star events are not sorted (at #{i})")
    if stamps and stamps[-1] > snapshot_at:
        raise ValidationError(f"{repo}: star event after snapshot instant")

    bounds = week_bounds(snapshot_at, weeks)
    # index of first event at or after each boundary
    cuts = [bisect.bisect_left(stamps, b) for b in bounds]
    cuts[-1] = len(stamps)
    baseline = cuts[0]
    weekly = [cuts[i + 1] - cuts[i] for i in range(weeks)]
    return WeeklyStarSeries(repo=repo, snapshot_at=snapshot_at, baseline=baseline, weekly_new=tuple(weekly))


@dataclass(frozen=True)
class Eligibility:
    eligible: bool
    reason: str | None = None

    def __bool__(self) -> bool:
        return self.eligible


def eligibility(series: WeeklyStarSeries | None, repo: RepoRecord, snapshot_at: datetime) -> Eligibility:
    if not repo.history_complete:
        return Eligibility(False, "incomplete history")
    if repo.created_at > ensure_utc(snapshot_at) - MIN_AGE:
        return Eligibility(False, "age < 52 weeks")
    return Eligibility(True)


def weekly_ranks(series_set: Sequence[WeeklyStarSeries]) -> tuple[list[str], np.ndarray]:
    """Integer ranks per week, shape ``(N, weeks)``, rows ordered by name.

    Rank 1 is the repository with the most cumulative stars that week;
    equal counts are ordered by full_name.
    """
    if not series_set:
        raise ValidationError("cannot rank an empty corpus")
    names = [s.repo for s in series_set]
    if len(set(names)) != len(names):
        raise ValidationError("duplicate repositories in corpus")
    snapshot_at = series_set[0].snapshot_at
    weeks = series_set[0].weeks
    for s in series_set:
        if s.snapshot_at != snapshot_at:
            raise ValidationError(f"{s.repo}: series built for a different snapshot instant")
        if s.weeks != weeks:
            raise ValidationError(f"{s.repo}: series has {s.weeks} weeks, expected {weeks}")

    ordered = sorted(series_set, key=lambda s: s.repo)
    cum = np.vstack([s.cumulative() for s in ordered])  # (N, weeks)
    n = len(ordered)
    name_pos = np.arange(n)  # rows already in name order
    ranks = np.empty_like(cum)
    for t in range(weeks):
        # lexsort: last key is primary
        order = np.lexsort((name_pos, -cum[:, t]))
        ranks[order, t] = np.arange(1, n + 1)
    return [s.repo for s in ordered], ranks


def rank_corpus(series_set: Sequence[WeeklyStarSeries] | Mapping[str, WeeklyStarSeries]) -> dict[str, RankTrajectory]:
    if isinstance(series_set, Mapping):
        series_set = list(series_set.values())
    names, ranks = weekly_ranks(series_set)
    log_rank = np.array([0.0] + [math.log2(k) + 1.0 for k in range(1, len(names) + 1)])
    r = log_rank[ranks]
    return {
        name: RankTrajectory(name, tuple(float(v) for v in r_row), tuple(int(k) for k in k_row))
        for name, r_row, k_row in zip(names, r, ranks)
    }


def rank_bounds(n: int) -> tuple[float, float]:
    return 1.0, math.log2(n) + 1.0
