"""GitHub REST ingestion: repository metadata and timestamped stargazers."""

from __future__ import annotations

import logging
import math
import time
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from startrack.errors import NotFoundError, StartrackError, TransportError, ValidationError
from startrack.models import (
    UNKNOWN_LANGUAGE,
    RepoRecord,
    SnapshotManifest,
    SnapshotSource,
    StarEvent,
    parse_instant,
    validate_full_name,
)
from startrack.store import ERRORS_FILE, write_ndjson, write_snapshot
from startrack.transport import FetchPolicy, HttpxTransport, Requester, Transport, parse_link_header

logger = logging.getLogger(__name__)

API_ROOT = "https://api.github.com"
JSON_MEDIA = "application/vnd.github+json"
STAR_MEDIA = "application/vnd.github.star+json"


@dataclass(frozen=True)
class StarHistory:
    events: tuple[StarEvent, ...]
    complete: bool


class GitHubClient:
    def __init__(
        self,
        auth_token: str | None,
        policy: FetchPolicy | None = None,
        transport: Transport | None = None,
        api_root: str = API_ROOT,
        sleep: Callable[[float], None] = time.sleep,
        clock: Callable[[], datetime] | None = None,
    ) -> None:
        self.policy = policy or FetchPolicy()
        headers = {"Accept": JSON_MEDIA, "X-GitHub-Api-Version": "2022-11-28"}
        if auth_token:
            headers["Authorization"] = f"Bearer {auth_token}"
        self.requester = Requester(transport or HttpxTransport(), self.policy, headers, sleep=sleep)
        self.api_root = api_root.rstrip("/")
        self.clock = clock or (lambda: datetime.now(timezone.utc))

    def repo_url(self, full_name: str) -> str:
        return f"{self.api_root}/repos/{full_name}"

    def fetch_repo_metadata(self, full_name: str, history_complete: bool = True) -> RepoRecord:
        validate_full_name(full_name)
        resp = self.requester.get(self.repo_url(full_name))
        if resp.status != 200 or not isinstance(resp.body, dict):
            raise TransportError(f"GET {self.repo_url(full_name)} returned {resp.status}", status=resp.status)
        data = resp.body
        fetched_at = self.clock().replace(microsecond=0)
        try:
            return RepoRecord(
                full_name=full_name,
                language=data.get("language") or UNKNOWN_LANGUAGE,
                stars_at_snapshot=int(data["stargazers_count"]),
                forks_at_snapshot=int(data["forks_count"]),
                created_at=parse_instant(data["created_at"]),
                fetched_at=fetched_at,
                history_complete=history_complete,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise TransportError(f"unexpected repository payload for {full_name}: {exc}", status=resp.status) from exc

    def fetch_star_history(self, full_name: str) -> StarHistory:
        """All stargazer events, ascending by time.

        GitHub refuses pages past its pagination cap with 422; the history is
        then returned as incomplete rather than failing.
        """
        validate_full_name(full_name)
        url: str | None = f"{self.repo_url(full_name)}/stargazers"
        params: dict | None = {"per_page": self.policy.per_page}
        events: list[StarEvent] = []
        complete = True
        while url:
            resp = self.requester.get(url, params, headers={"Accept": STAR_MEDIA})
            if resp.status == 422:
                logger.warning("%s: stargazer pagination cap reached after %d events", full_name, len(events))
                complete = False
                break
            if resp.status != 200 or not isinstance(resp.body, list):
                raise TransportError(f"GET {url} returned {resp.status}", status=resp.status)
            for item in resp.body:
                try:
                    starred_at = parse_instant(item["starred_at"])
                except (KeyError, TypeError, ValueError) as exc:
                    raise TransportError(
                        f"{full_name}: stargazer entry without timestamp; was the star media type honoured?"
                    ) from exc
                events.append(StarEvent(repo=full_name, starred_at=starred_at))
            url = parse_link_header(resp.header("Link")).get("next")
            params = None
        events.sort(key=lambda e: e.starred_at)
        return StarHistory(tuple(events), complete)

    def fetch_star_events(self, full_name: str) -> tuple[StarEvent, ...]:
        return self.fetch_star_history(full_name).events


def fetch_repo_metadata(
    full_name: str, auth_token: str | None, policy: FetchPolicy | None = None, transport: Transport | None = None
) -> RepoRecord:
    return GitHubClient(auth_token, policy, transport).fetch_repo_metadata(full_name)


def fetch_star_events(
    full_name: str, auth_token: str | None, policy: FetchPolicy | None = None, transport: Transport | None = None
) -> tuple[StarEvent, ...]:
    return GitHubClient(auth_token, policy, transport).fetch_star_events(full_name)


@dataclass(frozen=True)
class CrawlFailure:
    full_name: str
    kind: str
    status: int | None
    message: str

    def to_json(self) -> dict:
        return {"error": self.kind, "full_name": self.full_name, "message": self.message, "status": self.status}


class CrawlFailedError(StartrackError):
    def __init__(self, failures: Sequence[CrawlFailure]) -> None:
        super().__init__(f"all {len(failures)} repositories failed to download")
        self.failures = list(failures)


def _crawl_one(client: GitHubClient, full_name: str) -> tuple[RepoRecord, tuple[StarEvent, ...]] | CrawlFailure:
    try:
        history = client.fetch_star_history(full_name)
        repo = client.fetch_repo_metadata(full_name, history_complete=history.complete)
    except NotFoundError as exc:
        return CrawlFailure(full_name, "not-found", 404, str(exc))
    except TransportError as exc:
        return CrawlFailure(full_name, "transport", exc.status, str(exc))
    return repo, history.events


def build_snapshot(
    repo_list: Sequence[str],
    auth_token: str | None,
    policy: FetchPolicy | None,
    out: str | Path,
    transport: Transport | None = None,
    client: GitHubClient | None = None,
) -> SnapshotManifest:
    """Crawl every repository and write a snapshot.

    Permanently failing repositories go to ``errors.ndjson`` next to the
    manifest. Raises CrawlFailedError when nothing could be fetched.
    """
    if not repo_list:
        raise ValidationError("repository list is empty")
    for name in repo_list:
        validate_full_name(name)
    if len(set(repo_list)) != len(repo_list):
        dupes = sorted({n for n in repo_list if repo_list.count(n) > 1})
        raise ValidationError(f"duplicate repositories in list: {dupes}")

    client = client or GitHubClient(auth_token, policy, transport)
    workers = min(client.policy.concurrency, len(repo_list))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(lambda name: _crawl_one(client, name), repo_list))

    repos: list[RepoRecord] = []
    events: dict[str, tuple[StarEvent, ...]] = {}
    failures: list[CrawlFailure] = []
    for result in results:
        if isinstance(result, CrawlFailure):
            logger.error("%s: %s", result.full_name, result.message)
            failures.append(result)
        else:
            repo, stream = result
            repos.append(repo)
            events[repo.full_name] = stream
    if not repos:
        raise CrawlFailedError(failures)

    # snapshot instant: the last metadata fetch, but never before a star event
    latest = max(repo.fetched_at for repo in repos)
    for stream in events.values():
        if stream and stream[-1].starred_at > latest:
            latest = datetime.fromtimestamp(math.ceil(stream[-1].starred_at.timestamp()), timezone.utc)
    manifest = SnapshotManifest(snapshot_at=latest, repo_count=len(repos), source=SnapshotSource.LIVE_API)
    out = Path(out)
    write_snapshot(manifest, repos, events, out)
    sidecar = out / ERRORS_FILE
    if failures:
        write_ndjson(sidecar, (f.to_json() for f in sorted(failures, key=lambda f: f.full_name)))
    elif sidecar.exists():
        sidecar.unlink()
    return manifest
