"""On-disk snapshot format.

Layout::

    <snapshot>/manifest.json
    <snapshot>/repos.ndjson
    <snapshot>/events/<owner>__<name>.ndjson

JSON is written with sorted keys and compact separators, so identical
inputs always produce identical bytes.
"""

from __future__ import annotations

import json
import logging
from collections.abc import Iterable, Mapping, Sequence
from datetime import datetime
from pathlib import Path
from typing import Any

from startrack.errors import SnapshotFormatError, SnapshotIntegrityError, ValidationError
from startrack.models import (
    SCHEMA_VERSION,
    RepoRecord,
    SnapshotManifest,
    SnapshotSource,
    StarEvent,
    parse_instant,
)

logger = logging.getLogger(__name__)

MANIFEST_FILE = "manifest.json"
REPOS_FILE = "repos.ndjson"
EVENTS_DIR = "events"
ERRORS_FILE = "errors.ndjson"
NPM_USAGE_FILE = "npm-usage.ndjson"

_MANIFEST_FIELDS = ("snapshot_at", "repo_count", "schema_version", "source")


def events_filename(full_name: str) -> str:
    return full_name.replace("/", "__") + ".ndjson"


def dump_json_line(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def write_ndjson(path: Path, rows: Iterable[Any]) -> None:
    text = "".join(dump_json_line(row) + "\n" for row in rows)
    try:
        path.write_text(text, encoding="utf-8", newline="\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def read_ndjson(path: Path) -> list[Any]:
    rows = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise SnapshotFormatError(f"{path.name}:{lineno}: invalid JSON ({exc.msg})") from exc
    return rows


class Snapshot:
    """Read-only view of a snapshot directory.

    Event streams are loaded lazily per repository and cached.
    """

    def __init__(self, path: Path, manifest: SnapshotManifest, repos: Sequence[RepoRecord]) -> None:
        self.path = path
        self.manifest = manifest
        self.repos: tuple[RepoRecord, ...] = tuple(repos)
        self._by_name = {repo.full_name: repo for repo in self.repos}
        self._events: dict[str, tuple[StarEvent, ...]] = {}

    @property
    def snapshot_at(self) -> datetime:
        return self.manifest.snapshot_at

    def repo(self, full_name: str) -> RepoRecord:
        return self._by_name[full_name]

    def events(self, full_name: str) -> tuple[StarEvent, ...]:
        if full_name not in self._events:
            if full_name not in self._by_name:
                raise KeyError(full_name)
            self._events[full_name] = _load_events(self.path, full_name, self.manifest.snapshot_at)
        return self._events[full_name]

    def all_events(self) -> dict[str, tuple[StarEvent, ...]]:
        return {repo.full_name: self.events(repo.full_name) for repo in self.repos}

    def __repr__(self) -> str:
        return f"Snapshot({str(self.path)!r}, repo_count={self.manifest.repo_count})"


def _parse_manifest(path: Path) -> SnapshotManifest:
    manifest_path = path / MANIFEST_FILE
    if not manifest_path.is_file():
        raise SnapshotFormatError(f"manifest not found in {path}", field=MANIFEST_FILE)
    try:
        data = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SnapshotFormatError(f"manifest is not valid JSON: {exc.msg}", field=MANIFEST_FILE) from exc
    if not isinstance(data, dict):
        raise SnapshotFormatError("manifest must be a JSON object", field=MANIFEST_FILE)
    for name in _MANIFEST_FIELDS:
        if name not in data:
            raise SnapshotFormatError(f"manifest field {name!r} is missing", field=name)

    if data["schema_version"] != SCHEMA_VERSION or isinstance(data["schema_version"], bool):
        raise SnapshotFormatError(
            f"manifest field 'schema_version' must be {SCHEMA_VERSION}, got {data['schema_version']!r}",
            field="schema_version",
        )
    count = data["repo_count"]
    if isinstance(count, bool) or not isinstance(count, int) or count < 0:
        raise SnapshotFormatError(f"manifest field 'repo_count' is invalid: {count!r}", field="repo_count")
    try:
        snapshot_at = parse_instant(data["snapshot_at"])
    except ValueError as exc:
        raise SnapshotFormatError(f"manifest field 'snapshot_at' is invalid: {exc}", field="snapshot_at") from exc
    try:
        source = SnapshotSource(data["source"])
    except ValueError as exc:
        raise SnapshotFormatError(f"manifest field 'source' is invalid: {data['source']!r}", field="source") from exc
    return SnapshotManifest(snapshot_at=snapshot_at, repo_count=count, source=source)


def _load_events(path: Path, full_name: str, snapshot_at: datetime) -> tuple[StarEvent, ...]:
    events_path = path / EVENTS_DIR / events_filename(full_name)
    if not events_path.is_file():
        raise SnapshotFormatError(f"events file missing for {full_name}: {events_path}", field=full_name)
    events = []
    for lineno, row in enumerate(read_ndjson(events_path), start=1):
        try:
            event = StarEvent.from_json(row)
        except (KeyError, TypeError, ValueError) as exc:
            raise SnapshotFormatError(f"{events_path.name}:{lineno}: bad star event ({exc})", field=full_name) from exc
        if event.repo != full_name:
            raise SnapshotIntegrityError(f"{events_path.name}:{lineno}: event belongs to {event.repo}, not {full_name}")
        if event.starred_at > snapshot_at:
            raise SnapshotIntegrityError(f"{events_path.name}:{lineno}: event after snapshot instant")
        if events and event.starred_at < events[-1].starred_at:
            raise SnapshotIntegrityError(f"{events_path.name}:{lineno}: events not sorted by starred_at")
        events.append(event)
    return tuple(events)


def open_snapshot(path: str | Path) -> Snapshot:
    """Open and validate a snapshot directory."""
    path = Path(path)
    if not path.is_dir():
        raise SnapshotFormatError(f"manifest not found: {path} is not a directory", field=MANIFEST_FILE)
    manifest = _parse_manifest(path)

    repos_path = path / REPOS_FILE
    if not repos_path.is_file():
        if manifest.repo_count == 0:
            rows: list[Any] = []
        else:
            raise SnapshotIntegrityError(f"manifest lists {manifest.repo_count} repos but {REPOS_FILE} is missing")
    else:
        rows = read_ndjson(repos_path)

    repos = []
    for lineno, row in enumerate(rows, start=1):
        try:
            repos.append(RepoRecord.from_json(row))
        except KeyError as exc:
            raise SnapshotFormatError(f"{REPOS_FILE}:{lineno}: field {exc.args[0]!r} is missing", field=exc.args[0]) from exc
        except (TypeError, ValueError) as exc:
            raise SnapshotFormatError(f"{REPOS_FILE}:{lineno}: {exc}", field=REPOS_FILE) from exc

    if len(repos) != manifest.repo_count:
        raise SnapshotIntegrityError(
            f"manifest repo_count={manifest.repo_count} but {REPOS_FILE} holds {len(repos)} records"
        )
    names = [repo.full_name for repo in repos]
    if len(set(names)) != len(names):
        raise SnapshotIntegrityError(f"duplicate repositories in {REPOS_FILE}")
    for repo in repos:
        if not (path / EVENTS_DIR / events_filename(repo.full_name)).is_file():
            raise SnapshotIntegrityError(f"events file missing for {repo.full_name}")
    return Snapshot(path, manifest, repos)


def write_snapshot(
    manifest: SnapshotManifest,
    repos: Sequence[RepoRecord],
    events: Mapping[str, Sequence[StarEvent]],
    path: str | Path,
) -> None:
    """Write a whole snapshot. Repositories are stored sorted by name."""
    path = Path(path)
    repos = sorted(repos, key=lambda repo: repo.full_name)
    names = [repo.full_name for repo in repos]
    if len(set(names)) != len(names):
        raise ValidationError("duplicate repositories in snapshot")
    if manifest.repo_count != len(repos):
        raise ValidationError(f"manifest repo_count={manifest.repo_count} but {len(repos)} repos given")
    unknown = set(events) - set(names)
    if unknown:
        raise ValidationError(f"events given for repositories not in the snapshot: {sorted(unknown)}")

    for name in names:
        stream = events.get(name, ())
        for i, event in enumerate(stream):
            if event.repo != name:
                raise ValidationError(f"{name}: event #{i} belongs to {event.repo}")
            if event.starred_at > manifest.snapshot_at:
                raise ValidationError(f"{name}: event #{i} is after the snapshot instant")
            if i and event.starred_at < stream[i - 1].starred_at:
                raise ValidationError(f"{name}: events are not sorted by starred_at (at #{i})")

    try:
        (path / EVENTS_DIR).mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create snapshot directory {path}: {exc.strerror or exc}") from exc
    manifest_text = json.dumps(manifest.to_json(), sort_keys=True, indent=2) + "\n"
    try:
        (path / MANIFEST_FILE).write_text(manifest_text, encoding="utf-8", newline="\n")
    except OSError as exc:
        raise OSError(f"cannot write {path / MANIFEST_FILE}: {exc.strerror or exc}") from exc
    write_ndjson(path / REPOS_FILE, (repo.to_json() for repo in repos))
    for name in names:
        write_ndjson(path / EVENTS_DIR / events_filename(name), (e.to_json() for e in events.get(name, ())))
    logger.debug("wrote snapshot with %d repos to %s", len(repos), path)
