"""Popularity tiers and growth-pattern labels."""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

from startrack.errors import ValidationError
from startrack.models import RepoRecord
from startrack.trajectory import RankTrajectory, WeeklyStarSeries


class Growth(str, Enum):
    SUSTAINABLE = "Sustainable"
    FAST = "Fast"
    SLOW = "Slow"
    VIRAL = "Viral"
    OTHER = "Other"


# highest precedence first
CANONICAL_ORDER = (Growth.VIRAL, Growth.FAST, Growth.SLOW, Growth.SUSTAINABLE)
PATTERNS = (Growth.SUSTAINABLE, Growth.FAST, Growth.SLOW, Growth.VIRAL)


class Tier(str, Enum):
    VERY_POPULAR = "VeryPopular"
    POPULAR = "Popular"
    ORDINARY = "Ordinary"


@dataclass(frozen=True)
class ClassificationConfig:
    sustainable_band: float = 0.25
    shift_threshold: float = 1.0
    monotone_fraction: float = 0.90
    viral_fraction: float = 0.5
    popular_fraction: float = 0.10
    very_popular_fraction: float = 0.001

    def __post_init__(self) -> None:
        for name in ("sustainable_band", "shift_threshold", "monotone_fraction", "viral_fraction",
                     "popular_fraction", "very_popular_fraction"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ValidationError(f"{name} must be a positive finite number, got {value!r}")
        for name in ("monotone_fraction", "viral_fraction", "popular_fraction", "very_popular_fraction"):
            if getattr(self, name) > 1:
                raise ValidationError(f"{name} must not exceed 1")
        if self.very_popular_fraction > self.popular_fraction:
            raise ValidationError("very_popular_fraction must not exceed popular_fraction")


@dataclass(frozen=True)
class GrowthLabelSet:
    matched: frozenset[Growth]
    canonical: Growth

    @classmethod
    def from_matched(cls, matched: frozenset[Growth] | set[Growth]) -> GrowthLabelSet:
        matched = frozenset(matched)
        canonical = next((g for g in CANONICAL_ORDER if g in matched), Growth.OTHER)
        return cls(matched, canonical)

    def sorted_labels(self) -> list[str]:
        return [g.value for g in PATTERNS if g in self.matched]


@dataclass(frozen=True)
class PopularityTier:
    tier: Tier
    threshold_stars: int | None


@dataclass(frozen=True)
class TierAssignment:
    """Tiers for a whole corpus.

    A threshold is the star count of the last repository inside the set, or
    None when the set is empty.
    """

    tiers: dict[str, PopularityTier]
    popular_count: int
    very_popular_count: int
    popular_threshold: int | None
    very_popular_threshold: int | None
    ranking: tuple[RepoRecord, ...]

    def __getitem__(self, full_name: str) -> PopularityTier:
        return self.tiers[full_name]


def top_count(fraction: float, n: int) -> int:
    # Fraction of the decimal repr avoids 0.29 * 100 -> 28.999...
    return math.floor(Fraction(repr(float(fraction))) * n)


def by_stars(repos: Sequence[RepoRecord]) -> list[RepoRecord]:
    return sorted(repos, key=lambda repo: (-repo.stars_at_snapshot, repo.full_name))


def assign_tiers(repos: Sequence[RepoRecord], cfg: ClassificationConfig | None = None) -> TierAssignment:
    cfg = cfg or ClassificationConfig()
    if not repos:
        raise ValidationError("cannot assign tiers to an empty corpus")
    ranking = by_stars(repos)
    n = len(ranking)
    n_popular = top_count(cfg.popular_fraction, n)
    n_very = top_count(cfg.very_popular_fraction, n)
    popular_threshold = ranking[n_popular - 1].stars_at_snapshot if n_popular else None
    very_threshold = ranking[n_very - 1].stars_at_snapshot if n_very else None

    tiers = {}
    for position, repo in enumerate(ranking):
        if position < n_very:
            tiers[repo.full_name] = PopularityTier(Tier.VERY_POPULAR, very_threshold)
        elif position < n_popular:
            tiers[repo.full_name] = PopularityTier(Tier.POPULAR, popular_threshold)
        else:
            tiers[repo.full_name] = PopularityTier(Tier.ORDINARY, popular_threshold)
    return TierAssignment(tiers, n_popular, n_very, popular_threshold, very_threshold, tuple(ranking))


def monotone_fractions(r: Sequence[float]) -> tuple[float, float]:
    """Share of week-to-week transitions that keep or improve the rank, and
    share that keep or worsen it."""
    pairs = len(r) - 1
    if pairs < 1:
        raise ValidationError("need at least two weeks to judge monotonicity")
    improving = sum(1 for a, b in zip(r, r[1:]) if b <= a)
    worsening = sum(1 for a, b in zip(r, r[1:]) if b >= a)
    return improving / pairs, worsening / pairs


def is_viral(series: WeeklyStarSeries, cfg: ClassificationConfig) -> bool:
    total = series.total_at_new
    if total <= 0:
        return False
    return max(series.weekly_new) / total > cfg.viral_fraction


def classify_growth(
    traj: RankTrajectory,
    series: WeeklyStarSeries,
    cfg: ClassificationConfig | None = None,
) -> GrowthLabelSet:
    cfg = cfg or ClassificationConfig()
    if traj.repo != series.repo:
        raise ValidationError(f"trajectory for {traj.repo} paired with series for {series.repo}")
    if len(traj.r) != series.weeks:
        raise ValidationError(f"{traj.repo}: trajectory and series cover different windows")

    matched = set()
    if traj.r_bottom - traj.r_top < cfg.sustainable_band:
        matched.add(Growth.SUSTAINABLE)
    improving, worsening = monotone_fractions(traj.r)
    if traj.r_old - traj.r_now > cfg.shift_threshold and improving >= cfg.monotone_fraction:
        matched.add(Growth.FAST)
    if traj.r_now - traj.r_old > cfg.shift_threshold and worsening >= cfg.monotone_fraction:
        matched.add(Growth.SLOW)
    if is_viral(series, cfg):
        matched.add(Growth.VIRAL)
    return GrowthLabelSet.from_matched(matched)
