"""Track GitHub repository popularity through star histories."""

from startrack.classifier import (
    ClassificationConfig,
    GrowthLabelSet,
    PopularityTier,
    assign_tiers,
    classify_growth,
)
from startrack.errors import (
    NotFoundError,
    SnapshotFormatError,
    SnapshotIntegrityError,
    StartrackError,
    TransportError,
    UndefinedCorrelationError,
    ValidationError,
)
from startrack.models import RepoRecord, SnapshotManifest, StarEvent
from startrack.stats import CorrelationResult, QuartileSummary, quartiles_by_group, rank_star_curve, spearman
from startrack.store import Snapshot, open_snapshot, write_snapshot
from startrack.trajectory import RankTrajectory, WeeklyStarSeries, bucketize, eligibility, rank_corpus

__all__ = [
    "ClassificationConfig",
    "CorrelationResult",
    "GrowthLabelSet",
    "NotFoundError",
    "PopularityTier",
    "QuartileSummary",
    "RankTrajectory",
    "RepoRecord",
    "Snapshot",
    "SnapshotFormatError",
    "SnapshotIntegrityError",
    "SnapshotManifest",
    "StarEvent",
    "StartrackError",
    "TransportError",
    "UndefinedCorrelationError",
    "ValidationError",
    "WeeklyStarSeries",
    "assign_tiers",
    "bucketize",
    "classify_growth",
    "eligibility",
    "open_snapshot",
    "quartiles_by_group",
    "rank_corpus",
    "rank_star_curve",
    "spearman",
    "write_snapshot",
]
