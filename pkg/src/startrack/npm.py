"""Dependent counts from the NPM registry.

Which repository corresponds to which package is not inferred: the user
supplies a ``full_name,package_name`` mapping file. The mapping for the
38 Node.js libraries studied originally ships as the default fixture.
"""

from __future__ import annotations

import json
import logging
import time
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from urllib.parse import quote

from startrack.errors import MappingParseError, SnapshotFormatError, TransportError, ValidationError
from startrack.models import format_instant, parse_instant, validate_full_name
from startrack.store import NPM_USAGE_FILE, read_ndjson, write_ndjson
from startrack.transport import FetchPolicy, HttpxTransport, Requester, Transport

logger = logging.getLogger(__name__)

REGISTRY = "https://registry.npmjs.org"
# CouchDB view over the registry keyed by [dependency, dependent]
DEPENDENTS_VIEW = "/-/_view/dependedUpon"


@dataclass(frozen=True)
class PackageUsage:
    repo: str
    package_name: str
    dependents: int
    fetched_at: datetime

    def __post_init__(self) -> None:
        if not self.package_name:
            raise ValidationError("package_name must be non-empty")
        if self.dependents < 0:
            raise ValidationError(f"{self.package_name}: dependents must be >= 0")

    def to_json(self) -> dict:
        return {
            "dependents": self.dependents,
            "fetched_at": format_instant(self.fetched_at),
            "package_name": self.package_name,
            "repo": self.repo,
        }

    @classmethod
    def from_json(cls, data: dict) -> PackageUsage:
        return cls(data["repo"], data["package_name"], int(data["dependents"]), parse_instant(data["fetched_at"]))


class NpmClient:
    def __init__(
        self,
        policy: FetchPolicy | None = None,
        transport: Transport | None = None,
        registry: str = REGISTRY,
        sleep: Callable[[float], None] = time.sleep,
        clock: Callable[[], datetime] | None = None,
    ) -> None:
        self.policy = policy or FetchPolicy()
        self.requester = Requester(transport or HttpxTransport(), self.policy, {"Accept": "application/json"}, sleep=sleep)
        self.registry = registry.rstrip("/")
        self.clock = clock or (lambda: datetime.now(timezone.utc))

    def package_url(self, package_name: str) -> str:
        return f"{self.registry}/{quote(package_name, safe='@')}"

    def dependents_query(self, package_name: str) -> tuple[str, dict[str, str]]:
        params = {
            "endkey": json.dumps([package_name, {}], separators=(",", ":")),
            "group_level": "1",
            "startkey": json.dumps([package_name], separators=(",", ":")),
        }
        return self.registry + DEPENDENTS_VIEW, params

    def fetch_dependents(self, package_name: str) -> int:
        """Number of packages declaring ``package_name`` as a direct dependency."""
        if not package_name:
            raise ValidationError("package_name must be non-empty")
        # the view answers "no rows" for unknown packages, so check existence first
        resp = self.requester.get(self.package_url(package_name))
        if resp.status != 200:
            raise TransportError(f"registry returned {resp.status} for {package_name}", status=resp.status)
        url, params = self.dependents_query(package_name)
        resp = self.requester.get(url, params)
        if resp.status != 200 or not isinstance(resp.body, dict):
            raise TransportError(f"dependents query for {package_name} returned {resp.status}", status=resp.status)
        try:
            return sum(int(row["value"]) for row in resp.body.get("rows", []))
        except (KeyError, TypeError, ValueError) as exc:
            raise TransportError(f"unexpected dependents payload for {package_name}: {exc}") from exc

    def fetch_usage(self, pairs: Sequence[tuple[str, str]]) -> list[PackageUsage]:
        def one(pair: tuple[str, str]) -> PackageUsage:
            repo, package = pair
            count = self.fetch_dependents(package)
            return PackageUsage(repo, package, count, self.clock().replace(microsecond=0))

        if not pairs:
            return []
        with ThreadPoolExecutor(max_workers=min(self.policy.concurrency, len(pairs))) as pool:
            return list(pool.map(one, pairs))


def fetch_dependents(package_name: str, policy: FetchPolicy | None = None, transport: Transport | None = None) -> int:
    return NpmClient(policy, transport).fetch_dependents(package_name)


def parse_mapping(text: str) -> list[tuple[str, str]]:
    pairs: list[tuple[str, str]] = []
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 2:
            raise MappingParseError(f"expected 'full_name,package_name', got {raw!r}", lineno)
        full_name, package = parts
        if lineno == 1 and (full_name, package) == ("full_name", "package_name"):
            continue
        try:
            validate_full_name(full_name)
        except ValidationError as exc:
            raise MappingParseError(str(exc), lineno) from exc
        if not package:
            raise MappingParseError("empty package name", lineno)
        if (full_name, package) not in seen:
            seen.add((full_name, package))
            pairs.append((full_name, package))
    return pairs


def map_repos_to_packages(mapping_file: str | Path) -> list[tuple[str, str]]:
    return parse_mapping(Path(mapping_file).read_text(encoding="utf-8"))


def format_mapping(pairs: Iterable[tuple[str, str]]) -> str:
    return "".join(f"{full_name},{package}\n" for full_name, package in pairs)


def default_mapping_text() -> str:
    return resources.files("startrack").joinpath("data/nodejs_libraries.csv").read_text(encoding="utf-8")


def default_mapping() -> list[tuple[str, str]]:
    return parse_mapping(default_mapping_text())


def write_usage_cache(snapshot_dir: str | Path, usage: Iterable[PackageUsage]) -> Path:
    path = Path(snapshot_dir) / NPM_USAGE_FILE
    rows = sorted(usage, key=lambda u: (u.repo, u.package_name))
    write_ndjson(path, (u.to_json() for u in rows))
    return path


def read_usage_cache(snapshot_dir: str | Path) -> list[PackageUsage] | None:
    path = Path(snapshot_dir) / NPM_USAGE_FILE
    if not path.is_file():
        return None
    try:
        return [PackageUsage.from_json(row) for row in read_ndjson(path)]
    except (KeyError, TypeError, ValueError) as exc:
        raise SnapshotFormatError(f"{NPM_USAGE_FILE}: bad record ({exc})", field=NPM_USAGE_FILE) from exc
