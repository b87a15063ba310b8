from datetime import datetime, timezone

import pytest
from hypothesis import given, settings, strategies as st

from fixtures import npm_routes
from startrack.errors import MappingParseError, NotFoundError, TransportError, ValidationError
from startrack.npm import (
    NpmClient,
    PackageUsage,
    default_mapping,
    fetch_dependents,
    format_mapping,
    map_repos_to_packages,
    parse_mapping,
    read_usage_cache,
    write_usage_cache,
)
from startrack.transport import FetchPolicy, FixtureTransport, Response

FAST = FetchPolicy(base_backoff=0)


def test_dependents_count():
    assert fetch_dependents("express", FAST, FixtureTransport(npm_routes("express", 12))) == 12


def test_zero_dependents():
    assert fetch_dependents("lonely", FAST, FixtureTransport(npm_routes("lonely", 0))) == 0


def test_unknown_package():
    with pytest.raises(NotFoundError):
        fetch_dependents("no-such-package", FAST, FixtureTransport({}))


def test_transport_failure():
    routes = npm_routes("express", 3)
    for key in routes:
        if "_view" in key:
            routes[key] = [Response(500)]
    with pytest.raises(TransportError):
        fetch_dependents("express", FetchPolicy(max_retries=1, base_backoff=0), FixtureTransport(routes))


def test_idempotent_against_fixed_mock():
    transport = FixtureTransport(npm_routes("ws", 41))
    client = NpmClient(FAST, transport)
    assert {client.fetch_dependents("ws") for _ in range(5)} == {41}


def test_scoped_package_url():
    assert NpmClient(FAST, FixtureTransport({})).package_url("@babel/core") == "https://registry.npmjs.org/@babel%2Fcore"


def test_empty_package_name():
    with pytest.raises(ValidationError):
        fetch_dependents("", FAST, FixtureTransport({}))


def test_default_mapping_has_38_libraries():
    pairs = default_mapping()
    assert len(pairs) == 38
    assert ("strongloop/express", "express") in pairs
    assert ("danwrong/restler", "restler") in pairs


def test_mapping_file(tmp_path):
    path = tmp_path / "map.csv"
    path.write_text("a/b,pkg-a\n\nc/d,pkg-c\na/b,pkg-a\n")
    assert map_repos_to_packages(path) == [("a/b", "pkg-a"), ("c/d", "pkg-c")]


def test_empty_mapping(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    assert map_repos_to_packages(path) == []


def test_missing_comma_reports_line():
    with pytest.raises(MappingParseError) as info:
        parse_mapping("a/b,x\nc/d y\n")
    assert info.value.line == 2


def test_bad_repo_name_reports_line():
    with pytest.raises(MappingParseError) as info:
        parse_mapping("nope,x\n")
    assert info.value.line == 1


pairs_strategy = st.lists(
    st.tuples(
        st.from_regex(r"[a-z]{1,5}/[a-z0-9.-]{1,6}", fullmatch=True),
        st.from_regex(r"[a-z@][a-z0-9._-]{0,8}", fullmatch=True),
    ),
    unique=True,
    max_size=20,
)


@settings(max_examples=100, deadline=None)
@given(pairs_strategy)
def test_mapping_round_trip(pairs):
    assert parse_mapping(format_mapping(pairs)) == pairs


def test_usage_cache_round_trip(tmp_path):
    t = datetime(2015, 5, 1, tzinfo=timezone.utc)
    usage = [PackageUsage("b/b", "bee", 3, t), PackageUsage("a/a", "ay", 0, t)]
    write_usage_cache(tmp_path, usage)
    assert read_usage_cache(tmp_path) == sorted(usage, key=lambda u: u.repo)
    assert read_usage_cache(tmp_path / "missing") is None


def test_fetch_usage_for_pairs():
    routes = {}
    routes.update(npm_routes("express", 7))
    routes.update(npm_routes("ws", 2))
    client = NpmClient(FAST, FixtureTransport(routes))
    usage = client.fetch_usage([("strongloop/express", "express"), ("websockets/ws", "ws")])
    assert [(u.repo, u.dependents) for u in usage] == [("strongloop/express", 7), ("websockets/ws", 2)]
