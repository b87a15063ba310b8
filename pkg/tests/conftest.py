from __future__ import annotations

from datetime import datetime, timedelta, timezone

import pytest

from startrack.models import RepoRecord, SnapshotManifest, StarEvent

SNAPSHOT_AT = datetime(2015, 5, 1, tzinfo=timezone.utc)


def make_repo(name="octo/cat", stars=10, forks=2, language="Python", age_days=800, complete=True, snapshot_at=SNAPSHOT_AT):
    return RepoRecord(
        full_name=name,
        language=language,
        stars_at_snapshot=stars,
        forks_at_snapshot=forks,
        created_at=snapshot_at - timedelta(days=age_days),
        fetched_at=snapshot_at,
        history_complete=complete,
    )


def make_events(name, offsets_seconds, snapshot_at=SNAPSHOT_AT):
    """Events at ``snapshot_at - offset`` seconds, returned sorted."""
    stamps = sorted(snapshot_at - timedelta(seconds=s) for s in offsets_seconds)
    return tuple(StarEvent(repo=name, starred_at=t) for t in stamps)


@pytest.fixture
def snapshot_at():
    return SNAPSHOT_AT


@pytest.fixture
def three_repo_corpus():
    repos = [
        make_repo("alpha/one", stars=30, forks=5, language="JavaScript"),
        make_repo("beta/two", stars=20, forks=9, language="Python"),
        make_repo("gamma/three", stars=5, forks=1, language="unknown"),
    ]
    events = {
        "alpha/one": make_events("alpha/one", [100, 86400 * 10, 86400 * 400]),
        "beta/two": make_events("beta/two", [5, 6]),
        "gamma/three": (),
    }
    manifest = SnapshotManifest(snapshot_at=SNAPSHOT_AT, repo_count=3)
    return manifest, repos, events


# acceptance verdicts, one line per criterion at the end of the run
_CRITERIA: dict[int, tuple[str, list[str]]] = {}


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    number = getattr(report, "criterion", None)
    if number is None:
        return
    title, outcomes = _CRITERIA.setdefault(number, (report.criterion_title, []))
    outcomes.append(report.outcome)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is not None:
        report.criterion = mark.args[0]
        report.criterion_title = mark.args[1]


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, outcomes = _CRITERIA[number]
        verdict = "PASS" if outcomes and all(o == "passed" for o in outcomes) else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {verdict}  {title}")
