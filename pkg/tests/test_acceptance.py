"""Exit criteria. Each test carries ``acceptance(n, title)``; the verdicts
are printed one per line at the end of the run."""

from __future__ import annotations

import itertools
import json
import math
import random
import shutil
import time
from datetime import timedelta
from pathlib import Path

import pytest
from click.testing import CliRunner

from conftest import SNAPSHOT_AT, make_repo
from fixtures import API, repo_routes, stargazer_pages, T0, to_json_routes
from oracles import naive_bucketize, naive_canonical, naive_labels, naive_rank_values, naive_spearman
from startrack.classifier import ClassificationConfig, Growth, assign_tiers, classify_growth
from startrack.cli import main
from startrack.errors import TransportError
from startrack.github import GitHubClient
from startrack.models import StarEvent
from startrack.stats import spearman
from startrack.trajectory import WeeklyStarSeries, bucketize, rank_corpus
from startrack.transport import FetchPolicy, FixtureTransport, Response, request_key
from synthetic import adversarial_corpus, archetype_corpus

GOLDEN = Path(__file__).parent / "data" / "golden"
acceptance = pytest.mark.acceptance


@pytest.fixture(scope="module")
def archetypes():
    return archetype_corpus()


@pytest.fixture(scope="module")
def fuzz():
    return adversarial_corpus()


# 1 ------------------------------------------------------------------------

@acceptance(1, "classifier agrees with brute-force predicates on 500 trajectories, < 5 s")
def test_classifier_matches_oracle(archetypes):
    assert len(archetypes) == 500
    start = time.perf_counter()
    got = [classify_growth(traj, series) for traj, series in archetypes]
    elapsed = time.perf_counter() - start
    mismatches = []
    for (traj, series), labels in zip(archetypes, got):
        expected = naive_labels(list(traj.r), list(series.weekly_new), series.baseline)
        if {g.value for g in labels.matched} != expected or labels.canonical.value != naive_canonical(expected):
            mismatches.append(traj.repo)
    print(f"criterion 1: {500 - len(mismatches)}/500 match, {elapsed:.3f} s")
    assert mismatches == []
    assert elapsed < 5.0
    # the corpus actually exercises every label
    seen = {label for labels in got for label in labels.matched}
    assert seen == {Growth.SUSTAINABLE, Growth.FAST, Growth.SLOW, Growth.VIRAL}


# 2 ------------------------------------------------------------------------

@acceptance(2, "no Fast+Slow, Sustainable+Fast or Sustainable+Slow over 1,500 cases")
def test_mutual_exclusion(archetypes, fuzz):
    cases = archetypes + fuzz
    assert len(cases) == 1500
    forbidden = [{Growth.FAST, Growth.SLOW}, {Growth.SUSTAINABLE, Growth.FAST}, {Growth.SUSTAINABLE, Growth.SLOW}]
    violations = []
    for traj, series in cases:
        matched = set(classify_growth(traj, series).matched)
        violations += [(traj.repo, pair) for pair in forbidden if pair <= matched]
    print(f"criterion 2: {len(violations)} violations over {len(cases)} cases")
    assert violations == []


# 3 ------------------------------------------------------------------------

@acceptance(3, "2,138-repo corpus: min R = 1 exactly, max R = log2(2138)+1 within 1e-9")
def test_rank_bounds():
    rng = random.Random(2138)
    series = [
        WeeklyStarSeries(f"o{i % 50}/r{i}", SNAPSHOT_AT, rng.randrange(0, 3000), tuple(rng.randrange(0, 40) for _ in range(52)))
        for i in range(2138)
    ]
    trajectories = rank_corpus(series)
    values = [v for traj in trajectories.values() for v in traj.r]
    lo, hi = min(values), max(values)
    print(f"criterion 3: min R = {lo!r}, max R = {hi!r}")
    assert lo == 1.0
    assert abs(hi - (math.log2(2138) + 1)) < 1e-9
    # every week is a permutation of ranks 1..N
    for t in range(52):
        assert sorted(traj.ranks[t] for traj in trajectories.values()) == list(range(1, 2139))

    # spot check against the counting oracle on a slice of the corpus
    small = series[:60]
    fast = rank_corpus(small)
    slow = naive_rank_values({s.repo: list(s.cumulative()) for s in small})
    for name, r in slow.items():
        assert max(abs(a - b) for a, b in zip(fast[name].r, r)) < 1e-12


# 4 ------------------------------------------------------------------------

@acceptance(4, "24,000 distinct star counts: exactly 2,400 popular and 24 very popular")
def test_tier_arithmetic():
    rng = random.Random(24000)
    stars = rng.sample(range(1, 10_000_000), 24_000)
    repos = [make_repo(f"o{i % 300}/r{i}", stars=s) for i, s in enumerate(stars)]
    result = assign_tiers(repos)
    print(f"criterion 4: popular={result.popular_count}, very_popular={result.very_popular_count}")
    assert result.popular_count == 2400
    assert result.very_popular_count == 24
    ordered = sorted(stars, reverse=True)
    assert result.popular_threshold == ordered[2399]
    assert result.very_popular_threshold == ordered[23]
    counts = {}
    for tier in result.tiers.values():
        counts[tier.tier.value] = counts.get(tier.tier.value, 0) + 1
    assert counts == {"VeryPopular": 24, "Popular": 2376, "Ordinary": 21600}


# 5 ------------------------------------------------------------------------

@acceptance(5, "Spearman: +/-1 within 1e-12; exhaustive 5-vectors over [1,3] match oracle within 1e-12")
def test_spearman_exact():
    x = list(range(1, 41))
    assert abs(spearman(x, [v * v for v in x]).rho - 1.0) < 1e-12
    assert abs(spearman(x, [-v for v in x]).rho + 1.0) < 1e-12

    vectors = list(itertools.product(range(1, 4), repeat=5))
    compared = 0
    worst = 0.0
    for a in vectors:
        for b in vectors:
            expected = naive_spearman(a, b)
            if expected is None:
                continue  # zero variance, covered by the unit tests
            worst = max(worst, abs(spearman(a, b).rho - expected))
            compared += 1
    print(f"criterion 5: {compared} pairs, worst |diff| = {worst:.3e}")
    assert compared == (3**5 - 3) ** 2
    assert worst < 1e-12


# 6 ------------------------------------------------------------------------

@acceptance(6, "Spearman invariant under x^3 and 2x+7 on 100 random pairs, < 1e-12")
def test_spearman_monotone_invariance():
    rng = random.Random(6)
    worst = 0.0
    for _ in range(100):
        n = rng.randrange(3, 60)
        x = [rng.randrange(1, 50) for _ in range(n)]
        y = [rng.randrange(0, 50) for _ in range(n)]
        if len(set(x)) < 2 or len(set(y)) < 2:
            x[0], x[1], y[0], y[1] = 1, 2, 0, 1
        base = spearman(x, y).rho
        for f in (lambda v: v**3, lambda v: 2 * v + 7):
            worst = max(worst, abs(spearman([f(v) for v in x], y).rho - base))
    print(f"criterion 6: worst |diff| = {worst:.3e}")
    assert worst < 1e-12


# 7 ------------------------------------------------------------------------

def _events(stamps):
    return [StarEvent("o/r", t) for t in sorted(stamps)]


@acceptance(7, "bucketing conserves events and honours half-open weeks over 1,000 fuzz cases")
def test_bucketing_conservation():
    rng = random.Random(7)
    window = timedelta(days=364)
    violations = 0
    for _ in range(1000):
        n = rng.randrange(0, 200)
        stamps = []
        for _ in range(n):
            kind = rng.random()
            if kind < 0.15:
                # exactly on a week boundary
                stamps.append(SNAPSHOT_AT - timedelta(days=7 * rng.randrange(0, 60)))
            elif kind < 0.25:
                stamps.append(SNAPSHOT_AT - timedelta(days=7 * rng.randrange(1, 60), microseconds=rng.choice([1, -1])))
            else:
                stamps.append(SNAPSHOT_AT - timedelta(seconds=rng.randrange(0, int(window.total_seconds() * 1.5))))
        series = bucketize(_events(stamps), SNAPSHOT_AT)
        baseline, weekly = naive_bucketize(stamps, SNAPSHOT_AT)
        if series.baseline + sum(series.weekly_new) != n or (series.baseline, list(series.weekly_new)) != (baseline, weekly):
            violations += 1
    print(f"criterion 7: {violations} violations over 1000 cases")
    assert violations == 0

    start = SNAPSHOT_AT - window
    # window start belongs to week 1, the instant before it to the baseline
    s = bucketize(_events([start, start - timedelta(microseconds=1)]), SNAPSHOT_AT)
    assert s.baseline == 1 and s.weekly_new[0] == 1
    # the snapshot instant itself is counted in the last week
    s = bucketize(_events([SNAPSHOT_AT]), SNAPSHOT_AT)
    assert s.baseline == 0 and s.weekly_new[-1] == 1 and sum(s.weekly_new) == 1
    # an inner boundary opens the later week
    s = bucketize(_events([start + timedelta(days=7)]), SNAPSHOT_AT)
    assert s.weekly_new[1] == 1


# 8 ------------------------------------------------------------------------

@acceptance(8, "analyze on the golden snapshot: byte-identical runs, matches golden files, < 10 s")
def test_golden_parity(tmp_path):
    snap = tmp_path / "snapshot"
    shutil.copytree(GOLDEN / "snapshot", snap)
    runner = CliRunner()
    outputs = []
    start = time.perf_counter()
    for run in ("a", "b"):
        out = tmp_path / run
        result = runner.invoke(main, ["analyze", "--snapshot", str(snap), "--out", str(out)], catch_exceptions=False)
        assert result.exit_code == 0, result.output
        outputs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    elapsed = time.perf_counter() - start
    golden = {p.name: p.read_bytes() for p in sorted((GOLDEN / "reports").iterdir())}
    print(f"criterion 8: {len(golden)} golden files, two runs in {elapsed:.2f} s")
    assert outputs[0] == outputs[1]
    assert outputs[0] == golden
    assert elapsed < 10.0


# 9 ------------------------------------------------------------------------

@acceptance(9, "3-page pagination loses nothing, retries bounded, partial crawl exits 1 with sidecar")
def test_ingestion_contracts(tmp_path):
    # three full pages, second page sorted backwards
    stamps = [T0 + timedelta(minutes=13 * i) for i in range(7)]
    routes = stargazer_pages("p/q", stamps, per_page=3, shuffle_within=True)
    assert len(routes) == 3
    events = GitHubClient("t", FetchPolicy(per_page=3), FixtureTransport(routes), sleep=lambda _: None).fetch_star_events("p/q")
    assert [e.starred_at for e in events] == stamps

    # transient 5xx on every page, then success; and a page that never recovers
    policy = FetchPolicy(max_retries=2, per_page=100)
    flaky = repo_routes("p/r", n_events=250)
    for key in list(flaky):
        if "stargazers" in key:
            flaky[key] = [Response(502), Response(503)] + flaky[key]
    client = GitHubClient("t", policy, FixtureTransport(flaky), sleep=lambda _: None)
    got = client.fetch_star_events("p/r")
    assert len(got) == 250 and len({e.starred_at for e in got}) == 250
    assert max(n for _, n in client.requester.attempts) <= policy.max_retries + 1

    broken = FixtureTransport({request_key(f"{API}/repos/p/s/stargazers", {"per_page": 100}): [Response(500)]})
    client = GitHubClient("t", policy, broken, sleep=lambda _: None)
    with pytest.raises(TransportError):
        client.fetch_star_events("p/s")
    assert len(broken.calls) == policy.max_retries + 1

    # partial failure through the CLI
    cli_routes = repo_routes("good/one", n_events=230)
    transport_file = tmp_path / "routes.json"
    transport_file.write_text(json.dumps({"routes": to_json_routes(cli_routes)}))
    repo_file = tmp_path / "repos.txt"
    repo_file.write_text("good/one\nmissing/two\n")
    out = tmp_path / "snap"
    result = CliRunner().invoke(
        main,
        ["fetch", "--repos", str(repo_file), "--out", str(out), "--max-retries", "2"],
        env={"STARTRACK_FIXTURE_TRANSPORT": str(transport_file), "GITHUB_TOKEN": ""},
        catch_exceptions=False,
    )
    sidecar = [json.loads(line) for line in (out / "errors.ndjson").read_text().splitlines()]
    stored = (out / "events" / "good__one.ndjson").read_text().splitlines()
    print(f"criterion 9: exit {result.exit_code}, sidecar {[s['full_name'] for s in sidecar]}, {len(stored)} events stored")
    assert result.exit_code == 1
    assert [(s["full_name"], s["error"], s["status"]) for s in sidecar] == [("missing/two", "not-found", 404)]
    assert len(stored) == len(set(stored)) == 230
