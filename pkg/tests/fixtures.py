"""Scripted GitHub / NPM responses for FixtureTransport."""

from __future__ import annotations

from datetime import datetime, timedelta, timezone

from startrack.models import format_instant
from startrack.transport import Response, request_key

API = "https://api.github.com"
REGISTRY = "https://registry.npmjs.org"
T0 = datetime(2014, 1, 1, tzinfo=timezone.utc)


def repo_body(full_name, stars=150, forks=12, language="JavaScript", created="2012-03-04T05:06:07Z"):
    return {
        "full_name": full_name,
        "stargazers_count": stars,
        "forks_count": forks,
        "language": language,
        "created_at": created,
    }


def stargazer_pages(full_name, stamps, per_page=100, shuffle_within=False):
    """Routes serving ``stamps`` across Link-paginated pages."""
    base = f"{API}/repos/{full_name}/stargazers"
    items = [{"starred_at": format_instant(t), "user": {"login": f"u{i}"}} for i, t in enumerate(stamps)]
    pages = [items[i : i + per_page] for i in range(0, len(items), per_page)] or [[]]
    routes = {}
    for n, page in enumerate(pages, start=1):
        if n == 1:
            key = request_key(base, {"per_page": per_page})
        else:
            key = f"{base}?per_page={per_page}&page={n}"
        headers = {}
        if n < len(pages):
            headers["Link"] = (
                f'<{base}?per_page={per_page}&page={n + 1}>; rel="next", '
                f'<{base}?per_page={per_page}&page={len(pages)}>; rel="last"'
            )
        body = list(reversed(page)) if shuffle_within else page
        routes[key] = [Response(200, headers, body)]
    return routes


def repo_routes(full_name, n_events=150, per_page=100, **meta):
    stamps = [T0 + timedelta(hours=7 * i) for i in range(n_events)]
    routes = {f"{API}/repos/{full_name}": [Response(200, {}, repo_body(full_name, **meta))]}
    routes.update(stargazer_pages(full_name, stamps, per_page))
    return routes


def to_json_routes(routes):
    return {
        key: [{"status": r.status, "headers": r.headers, "body": r.body} for r in responses]
        for key, responses in routes.items()
    }


def npm_routes(package, dependents):
    """Existence check plus dependents view for one package."""
    from startrack.npm import NpmClient

    url, params = NpmClient(transport=object()).dependents_query(package)
    rows = [{"key": [package], "value": dependents}] if dependents else []
    return {
        NpmClient(transport=object()).package_url(package): [Response(200, {}, {"name": package})],
        request_key(url, params): [Response(200, {}, {"rows": rows})],
    }
