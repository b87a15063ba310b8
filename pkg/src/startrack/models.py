"""Core records shared by every stage of the pipeline.

All instants are timezone-aware UTC ``datetime`` objects. On disk they are
RFC 3339 strings with a ``Z`` suffix; fractional seconds are only written
when present so that second-precision data stays byte-stable.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from typing import Any

from startrack.errors import ValidationError

SCHEMA_VERSION = 1
UNKNOWN_LANGUAGE = "unknown"


def format_instant(value: datetime) -> str:
    value = ensure_utc(value)
    if value.microsecond:
        return value.strftime("%Y-%m-%dT%H:%M:%S.%fZ")
    return value.strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_instant(text: str) -> datetime:
    if not isinstance(text, str) or not text.endswith("Z"):
        raise ValueError(f"not an RFC 3339 UTC instant: {text!r}")
    value = datetime.fromisoformat(text[:-1] + "+00:00")
    return value.astimezone(timezone.utc)


def ensure_utc(value: datetime) -> datetime:
    if value.tzinfo is None:
        raise ValidationError(f"naive datetime not allowed: {value!r}")
    return value.astimezone(timezone.utc)


def validate_full_name(full_name: str) -> str:
    parts = full_name.split("/") if isinstance(full_name, str) else []
    if len(parts) != 2 or not parts[0] or not parts[1]:
        raise ValidationError(f"malformed repository name {full_name!r}, expected 'owner/name'")
    return full_name


class SnapshotSource(str, Enum):
    LIVE_API = "live-api"
    FIXTURE = "fixture"


@dataclass(frozen=True)
class RepoRecord:
    """Repository metadata as of the snapshot.

    ``history_complete`` is False when ingestion could not retrieve the full
    stargazer history (the API truncates very long lists); such repositories
    are excluded from trajectory analysis.
    """

    full_name: str
    language: str
    stars_at_snapshot: int
    forks_at_snapshot: int
    created_at: datetime
    fetched_at: datetime
    history_complete: bool = True

    def __post_init__(self) -> None:
        validate_full_name(self.full_name)
        if not self.language:
            raise ValidationError(f"{self.full_name}: language must be non-empty (use 'unknown')")
        for name in ("stars_at_snapshot", "forks_at_snapshot"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 0:
                raise ValidationError(f"{self.full_name}: {name} must be a non-negative integer, got {value!r}")
        object.__setattr__(self, "created_at", ensure_utc(self.created_at))
        object.__setattr__(self, "fetched_at", ensure_utc(self.fetched_at))
        if self.fetched_at < self.created_at:
            raise ValidationError(f"{self.full_name}: fetched_at precedes created_at")

    def to_json(self) -> dict[str, Any]:
        return {
            "full_name": self.full_name,
            "language": self.language,
            "stars_at_snapshot": self.stars_at_snapshot,
            "forks_at_snapshot": self.forks_at_snapshot,
            "created_at": format_instant(self.created_at),
            "fetched_at": format_instant(self.fetched_at),
            "history_complete": self.history_complete,
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> RepoRecord:
        return cls(
            full_name=data["full_name"],
            language=data["language"],
            stars_at_snapshot=data["stars_at_snapshot"],
            forks_at_snapshot=data["forks_at_snapshot"],
            created_at=parse_instant(data["created_at"]),
            fetched_at=parse_instant(data["fetched_at"]),
            history_complete=bool(data.get("history_complete", True)),
        )


@dataclass(frozen=True)
class StarEvent:
    repo: str
    starred_at: datetime

    def __post_init__(self) -> None:
        object.__setattr__(self, "starred_at", ensure_utc(self.starred_at))

    def to_json(self) -> dict[str, Any]:
        return {"repo": self.repo, "starred_at": format_instant(self.starred_at)}

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> StarEvent:
        return cls(repo=data["repo"], starred_at=parse_instant(data["starred_at"]))


@dataclass(frozen=True)
class SnapshotManifest:
    snapshot_at: datetime
    repo_count: int
    source: SnapshotSource = SnapshotSource.FIXTURE
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self) -> None:
        object.__setattr__(self, "snapshot_at", ensure_utc(self.snapshot_at))
        object.__setattr__(self, "source", SnapshotSource(self.source))
        if isinstance(self.repo_count, bool) or not isinstance(self.repo_count, int) or self.repo_count < 0:
            raise ValidationError(f"repo_count must be a non-negative integer, got {self.repo_count!r}")
        if self.schema_version != SCHEMA_VERSION:
            raise ValidationError(f"unsupported schema_version {self.schema_version!r}")

    def to_json(self) -> dict[str, Any]:
        return {
            "repo_count": self.repo_count,
            "schema_version": self.schema_version,
            "snapshot_at": format_instant(self.snapshot_at),
            "source": self.source.value,
        }
