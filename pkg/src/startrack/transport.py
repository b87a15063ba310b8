"""HTTP plumbing shared by the GitHub and NPM clients.

Clients never talk to the network directly; they go through a ``Transport``
so tests can script every response. ``HttpxTransport`` is the live adapter,
``FixtureTransport`` replays canned responses from a JSON document.
"""

from __future__ import annotations

import json
import logging
import re
import threading
import time
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Protocol
from urllib.parse import urlencode

from startrack.errors import NotFoundError, TransportError, ValidationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FetchPolicy:
    max_retries: int = 3
    base_backoff: float = 1.0
    per_page: int = 100
    rate_limit_floor: int = 0
    concurrency: int = 4

    def __post_init__(self) -> None:
        if self.max_retries < 0:
            raise ValidationError("max_retries must be >= 0")
        if self.base_backoff < 0:
            raise ValidationError("base_backoff must be >= 0")
        if not 1 <= self.per_page <= 100:
            raise ValidationError(f"per_page must be in [1, 100], got {self.per_page}")
        if self.rate_limit_floor < 0:
            raise ValidationError("rate_limit_floor must be >= 0")
        if self.concurrency < 1:
            raise ValidationError("concurrency must be >= 1")


@dataclass
class Response:
    status: int
    headers: dict[str, str] = field(default_factory=dict)
    body: Any = None

    def header(self, name: str) -> str | None:
        lname = name.lower()
        for key, value in self.headers.items():
            if key.lower() == lname:
                return value
        return None


class Transport(Protocol):
    def get(self, url: str, headers: Mapping[str, str], params: Mapping[str, Any] | None = None) -> Response: ...


class HttpxTransport:
    def __init__(self, timeout: float = 30.0) -> None:
        import httpx

        self._client = httpx.Client(timeout=timeout, follow_redirects=True)

    def get(self, url: str, headers: Mapping[str, str], params: Mapping[str, Any] | None = None) -> Response:
        import httpx

        try:
            resp = self._client.get(url, headers=dict(headers), params=params)
        except httpx.HTTPError as exc:
            # status 0 marks a network-level failure; retried like a 5xx
            return Response(0, {}, {"message": str(exc)})
        try:
            body = resp.json()
        except ValueError:
            body = resp.text
        return Response(resp.status_code, dict(resp.headers), body)

    def close(self) -> None:
        self._client.close()


def request_key(url: str, params: Mapping[str, Any] | None) -> str:
    if not params:
        return url
    query = urlencode(sorted((k, str(v)) for k, v in params.items()))
    return f"{url}{'&' if '?' in url else '?'}{query}"


class FixtureTransport:
    """Scripted transport.

    ``routes`` maps a request key (URL plus sorted query string) to a list of
    responses served in order; the last one repeats once the list is
    exhausted. Unknown keys get a 404. Every call is recorded in ``calls``.
    """

    def __init__(self, routes: Mapping[str, list[Response | dict]]) -> None:
        self._routes = {key: [_as_response(r) for r in responses] for key, responses in routes.items()}
        self._served: dict[str, int] = {}
        self._lock = threading.Lock()
        self.calls: list[str] = []

    @classmethod
    def from_file(cls, path: str | Path) -> FixtureTransport:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(data.get("routes", data))

    def get(self, url: str, headers: Mapping[str, str], params: Mapping[str, Any] | None = None) -> Response:
        key = request_key(url, params)
        with self._lock:
            self.calls.append(key)
            responses = self._routes.get(key)
            if not responses:
                return Response(404, {}, {"message": "Not Found"})
            i = self._served.get(key, 0)
            self._served[key] = i + 1
            return responses[min(i, len(responses) - 1)]

    def count(self, url: str, params: Mapping[str, Any] | None = None) -> int:
        return self.calls.count(request_key(url, params))


def _as_response(obj: Response | dict) -> Response:
    if isinstance(obj, Response):
        return obj
    return Response(int(obj.get("status", 200)), dict(obj.get("headers", {})), obj.get("body"))


_LINK_RE = re.compile(r'<([^>]*)>\s*;\s*rel="?([^";]+)"?')


def parse_link_header(value: str | None) -> dict[str, str]:
    if not value:
        return {}
    return {rel: url for url, rel in _LINK_RE.findall(value)}


class RateLimitGate:
    """Shared quota gate.

    When a response reports ``X-RateLimit-Remaining`` at or below the floor,
    every caller waits until the advertised reset instant.
    """

    def __init__(
        self,
        floor: int = 0,
        sleep: Callable[[float], None] = time.sleep,
        clock: Callable[[], float] = time.time,
    ) -> None:
        self.floor = floor
        self.sleep = sleep
        self.clock = clock
        self._lock = threading.Lock()
        self._reset_at: float | None = None

    def wait(self) -> None:
        with self._lock:
            if self._reset_at is None:
                return
            delay = self._reset_at - self.clock()
            if delay > 0:
                logger.warning("rate limit floor reached, sleeping %.0f s", delay)
                self.sleep(delay)
            self._reset_at = None

    def observe(self, resp: Response) -> None:
        remaining = resp.header("X-RateLimit-Remaining")
        reset = resp.header("X-RateLimit-Reset")
        if remaining is None or reset is None:
            return
        try:
            remaining_n, reset_at = int(remaining), float(reset)
        except ValueError:
            return
        if remaining_n <= self.floor:
            with self._lock:
                self._reset_at = max(self._reset_at or 0.0, reset_at)


def is_rate_limited(resp: Response) -> bool:
    if resp.status == 429:
        return True
    return resp.status == 403 and resp.header("X-RateLimit-Remaining") == "0"


class Requester:
    """GET with retries, exponential backoff and rate-limit gating.

    A request is attempted at most ``max_retries + 1`` times. 5xx responses,
    network failures (status 0) and rate-limit refusals are retried; 404
    raises NotFoundError; other 4xx are returned to the caller as-is.
    ``attempts`` records the attempt count of every logical request.
    """

    def __init__(
        self,
        transport: Transport,
        policy: FetchPolicy,
        headers: Mapping[str, str] | None = None,
        gate: RateLimitGate | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        self.transport = transport
        self.policy = policy
        self.headers = dict(headers or {})
        self.gate = gate or RateLimitGate(policy.rate_limit_floor, sleep=sleep)
        self.sleep = sleep
        self.attempts: list[tuple[str, int]] = []
        self._lock = threading.Lock()

    def get(self, url: str, params: Mapping[str, Any] | None = None, headers: Mapping[str, str] | None = None) -> Response:
        merged = {**self.headers, **(headers or {})}
        key = request_key(url, params)
        last: Response | None = None
        attempt = 0
        while True:
            attempt += 1
            self.gate.wait()
            resp = self.transport.get(url, merged, params)
            self.gate.observe(resp)
            last = resp
            if resp.status == 404:
                self._record(key, attempt)
                raise NotFoundError(f"not found: {url}")
            retryable = resp.status == 0 or resp.status >= 500 or is_rate_limited(resp)
            if not retryable:
                self._record(key, attempt)
                return resp
            if attempt > self.policy.max_retries:
                break
            if is_rate_limited(resp):
                self._wait_for_reset(resp)
            else:
                delay = self.policy.base_backoff * 2 ** (attempt - 1)
                logger.info("GET %s -> %s, retry %d in %.1f s", url, resp.status, attempt, delay)
                if delay > 0:
                    self.sleep(delay)
        self._record(key, attempt)
        raise TransportError(f"GET {url} failed after {attempt} attempts (last status {last.status})", status=last.status)

    def _wait_for_reset(self, resp: Response) -> None:
        if resp.header("X-RateLimit-Reset") is not None and resp.header("X-RateLimit-Remaining") == "0":
            return  # the gate sleeps until reset before the next attempt
        delay = self.policy.base_backoff
        retry_after = resp.header("Retry-After")
        if retry_after is not None:
            try:
                delay = float(retry_after)
            except ValueError:
                pass
        if delay > 0:
            logger.warning("rate limited, sleeping %.0f s", delay)
            self.sleep(delay)

    def _record(self, key: str, attempts: int) -> None:
        with self._lock:
            self.attempts.append((key, attempts))
