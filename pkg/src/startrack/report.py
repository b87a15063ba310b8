"""End-to-end analysis of a snapshot into CSV/JSON report files.

Every collection is sorted before it is written and floats are formatted
with fixed precision, so the same snapshot always yields the same bytes.
Column layouts are documented in ``docs/formats.md``.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from collections import Counter
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field
from pathlib import Path

from startrack.classifier import (
    PATTERNS,
    ClassificationConfig,
    Growth,
    GrowthLabelSet,
    Tier,
    TierAssignment,
    assign_tiers,
    classify_growth,
)
from startrack.errors import UndefinedCorrelationError, ValidationError
from startrack.models import format_instant
from startrack.npm import PackageUsage
from startrack.stats import quartiles_by_group, rank_star_curve, spearman
from startrack.store import Snapshot
from startrack.trajectory import WEEKS, RankTrajectory, WeeklyStarSeries, bucketize, eligibility, rank_corpus

logger = logging.getLogger(__name__)

REPORTS_DIR = "reports"
QUARTILE_METHOD = "type-7: linear interpolation at position (n-1)*p"
R_FORMAT = "{:.6f}"
Q_FORMAT = "{:.2f}"
RHO_DIGITS = 10

TIERS_CSV = "tiers.csv"
GROWTH_CSV = "growth.csv"
TRAJECTORIES_CSV = "trajectories.csv"
QUARTILES_CSV = "language_quartiles.csv"
RANK_CURVE_CSV = "rank_curve.csv"
CORRELATIONS_JSON = "correlations.json"
SUMMARY_JSON = "summary.json"
FORKS_SCATTER_CSV = "scatter_stars_forks.csv"
DEPENDENTS_SCATTER_CSV = "scatter_stars_dependents.csv"

TIERS_HEADER = ["rank", "full_name", "language", "stars_at_snapshot", "forks_at_snapshot", "star_events", "tier"]
GROWTH_HEADER = ["full_name", "language", "r_old", "r_now", "r_top", "r_bottom", "matched_labels", "canonical_label"]
TRAJECTORIES_HEADER = ["full_name", "week", "new_stars", "cum_stars", "rank", "r"]
QUARTILES_HEADER = ["language", "n", "min", "q1", "median", "q3", "max"]
RANK_CURVE_HEADER = ["rank", "stars", "full_name"]
FORKS_SCATTER_HEADER = ["full_name", "stars", "forks"]
DEPENDENTS_SCATTER_HEADER = ["full_name", "package_name", "stars", "dependents"]


@dataclass
class GrowthRow:
    repo: str
    language: str
    series: WeeklyStarSeries
    trajectory: RankTrajectory
    labels: GrowthLabelSet


@dataclass
class Analysis:
    snapshot: Snapshot
    cfg: ClassificationConfig
    weeks: int
    popular_only: bool
    tiers: TierAssignment
    series: dict[str, WeeklyStarSeries]
    ineligible: dict[str, str]
    growth: list[GrowthRow] = field(default_factory=list)


def analyze(
    snapshot: Snapshot,
    cfg: ClassificationConfig | None = None,
    weeks: int = WEEKS,
    popular_only: bool = False,
) -> Analysis:
    """Run eligibility, bucketing, ranking, tiers and growth labelling.

    With ``popular_only`` the trajectory corpus is further restricted to
    repositories in the popular tier.
    """
    cfg = cfg or ClassificationConfig()
    if weeks < 2:
        raise ValidationError("weeks must be at least 2")
    repos = snapshot.repos
    if not repos:
        raise ValidationError("snapshot holds no repositories")
    tiers = assign_tiers(repos, cfg)
    snapshot_at = snapshot.snapshot_at

    series = {
        repo.full_name: bucketize(snapshot.events(repo.full_name), snapshot_at, weeks, repo=repo.full_name)
        for repo in repos
    }
    ineligible = {}
    corpus = []
    for repo in repos:
        verdict = eligibility(series[repo.full_name], repo, snapshot_at)
        if not verdict.eligible:
            ineligible[repo.full_name] = verdict.reason
        elif popular_only and tiers[repo.full_name].tier is Tier.ORDINARY:
            ineligible[repo.full_name] = "not popular"
        else:
            corpus.append(series[repo.full_name])

    result = Analysis(snapshot, cfg, weeks, popular_only, tiers, series, ineligible)
    if not corpus:
        logger.warning("no eligible repositories; growth report will be empty")
        return result
    trajectories = rank_corpus(corpus)
    for name in sorted(trajectories):
        repo = snapshot.repo(name)
        labels = classify_growth(trajectories[name], series[name], cfg)
        result.growth.append(GrowthRow(name, repo.language, series[name], trajectories[name], labels))
    return result


def _csv_text(header: Sequence[str], rows: Sequence[Sequence[object]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _json_text(obj: object) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def tiers_csv(analysis: Analysis) -> str:
    rows = []
    for rank, repo in enumerate(analysis.tiers.ranking, start=1):
        rows.append([
            rank,
            repo.full_name,
            repo.language,
            repo.stars_at_snapshot,
            repo.forks_at_snapshot,
            analysis.series[repo.full_name].total_at_new,
            analysis.tiers[repo.full_name].tier.value,
        ])
    return _csv_text(TIERS_HEADER, rows)


def growth_csv(analysis: Analysis) -> str:
    rows = []
    for g in analysis.growth:
        t = g.trajectory
        rows.append([
            g.repo,
            g.language,
            R_FORMAT.format(t.r_old),
            R_FORMAT.format(t.r_now),
            R_FORMAT.format(t.r_top),
            R_FORMAT.format(t.r_bottom),
            ";".join(g.labels.sorted_labels()),
            g.labels.canonical.value,
        ])
    return _csv_text(GROWTH_HEADER, rows)


def trajectories_csv(analysis: Analysis) -> str:
    rows = []
    for g in analysis.growth:
        cum = g.series.baseline
        t = g.trajectory
        for week, (new, rank, r) in enumerate(zip(g.series.weekly_new, t.ranks, t.r), start=1):
            cum += new
            rows.append([g.repo, week, new, cum, rank, R_FORMAT.format(r)])
    return _csv_text(TRAJECTORIES_HEADER, rows)


def language_quartiles_csv(analysis: Analysis) -> str:
    grouped = quartiles_by_group((repo.language, repo.stars_at_snapshot) for repo in analysis.snapshot.repos)
    rows = [
        [s.group_key, s.n, int(s.min), Q_FORMAT.format(s.q1), Q_FORMAT.format(s.median), Q_FORMAT.format(s.q3), int(s.max)]
        for s in grouped.summaries
    ]
    return _csv_text(QUARTILES_HEADER, rows)


def rank_curve_csv(analysis: Analysis) -> str:
    names = [repo.full_name for repo in analysis.tiers.ranking]
    curve = rank_star_curve(analysis.snapshot.repos)
    return _csv_text(RANK_CURVE_HEADER, [[rank, stars, name] for (rank, stars), name in zip(curve, names)])


def _correlation_entry(x: Sequence[float], y: Sequence[float]) -> dict:
    try:
        result = spearman(x, y)
    except (UndefinedCorrelationError, ValidationError) as exc:
        return {"error": str(exc), "n": len(x)}
    entry = result.to_json()
    entry["rho"] = round(result.rho, RHO_DIGITS)
    return entry


def forks_scatter(snapshot: Snapshot) -> list[list[object]]:
    repos = sorted(snapshot.repos, key=lambda r: r.full_name)
    return [[r.full_name, r.stars_at_snapshot, r.forks_at_snapshot] for r in repos]


def dependents_scatter(snapshot: Snapshot, usage: Sequence[PackageUsage]) -> list[list[object]]:
    rows = []
    for u in sorted(usage, key=lambda u: (u.repo, u.package_name)):
        try:
            repo = snapshot.repo(u.repo)
        except KeyError:
            logger.warning("%s (package %s) is not in the snapshot; skipped", u.repo, u.package_name)
            continue
        rows.append([u.repo, u.package_name, repo.stars_at_snapshot, u.dependents])
    return rows


def correlations(snapshot: Snapshot, usage: Sequence[PackageUsage] | None = None) -> dict:
    forks = forks_scatter(snapshot)
    out = {"method": "spearman (average ranks for ties)"}
    out["stars_vs_forks"] = _correlation_entry([r[1] for r in forks], [r[2] for r in forks])
    if usage is not None:
        deps = dependents_scatter(snapshot, usage)
        out["stars_vs_dependents"] = _correlation_entry([r[2] for r in deps], [r[3] for r in deps])
    return out


def summary(analysis: Analysis) -> dict:
    snapshot = analysis.snapshot
    tiers = analysis.tiers
    by_language: dict[str, Counter] = {}
    for repo in snapshot.repos:
        counts = by_language.setdefault(repo.language, Counter())
        tier = tiers[repo.full_name].tier
        counts["popular"] += tier is not Tier.ORDINARY
        counts["very_popular"] += tier is Tier.VERY_POPULAR

    growth_by_lang: dict[str, dict[str, int]] = {}
    canonical_by_lang: dict[str, dict[str, int]] = {}
    for g in analysis.growth:
        row = growth_by_lang.setdefault(g.language, {"systems": 0, **{p.value: 0 for p in PATTERNS}})
        row["systems"] += 1
        for label in g.labels.matched:
            row[label.value] += 1
        crow = canonical_by_lang.setdefault(g.language, {"systems": 0, **{p.value: 0 for p in (*PATTERNS, Growth.OTHER)}})
        crow["systems"] += 1
        crow[g.labels.canonical.value] += 1

    def total(table: dict[str, dict[str, int]], keys: Sequence[str]) -> dict[str, int]:
        return {k: sum(row[k] for row in table.values()) for k in keys}

    pattern_keys = ["systems", *(p.value for p in PATTERNS)]
    canonical_keys = [*pattern_keys, Growth.OTHER.value]
    discrepancies = [
        {
            "full_name": repo.full_name,
            "star_events": analysis.series[repo.full_name].total_at_new,
            "stars_at_snapshot": repo.stars_at_snapshot,
        }
        for repo in sorted(snapshot.repos, key=lambda r: r.full_name)
        if analysis.series[repo.full_name].total_at_new != repo.stars_at_snapshot
    ]
    return {
        "snapshot_at": format_instant(snapshot.snapshot_at),
        "source": snapshot.manifest.source.value,
        "weeks": analysis.weeks,
        "config": {**asdict(analysis.cfg), "popular_only": analysis.popular_only},
        "quartile_method": QUARTILE_METHOD,
        "repo_count": len(snapshot.repos),
        "eligible_count": len(analysis.growth),
        "ineligible": [{"full_name": k, "reason": v} for k, v in sorted(analysis.ineligible.items())],
        "tiers": {
            "popular_count": tiers.popular_count,
            "very_popular_count": tiers.very_popular_count,
            "popular_threshold": tiers.popular_threshold,
            "very_popular_threshold": tiers.very_popular_threshold,
            "by_language": {lang: dict(sorted(c.items())) for lang, c in sorted(by_language.items())},
        },
        "growth": {
            "matched": {
                "by_language": dict(sorted(growth_by_lang.items())),
                "total": total(growth_by_lang, pattern_keys),
            },
            "canonical": {
                "by_language": dict(sorted(canonical_by_lang.items())),
                "total": total(canonical_by_lang, canonical_keys),
            },
        },
        "star_count_discrepancies": discrepancies,
    }


def render_bundle(analysis: Analysis, usage: Sequence[PackageUsage] | None = None) -> dict[str, str]:
    """File name to file content for the whole report bundle."""
    return {
        TIERS_CSV: tiers_csv(analysis),
        GROWTH_CSV: growth_csv(analysis),
        TRAJECTORIES_CSV: trajectories_csv(analysis),
        QUARTILES_CSV: language_quartiles_csv(analysis),
        RANK_CURVE_CSV: rank_curve_csv(analysis),
        CORRELATIONS_JSON: _json_text(correlations(analysis.snapshot, usage)),
        SUMMARY_JSON: _json_text(summary(analysis)),
    }


def render_correlation_files(snapshot: Snapshot, usage: Sequence[PackageUsage] | None) -> dict[str, str]:
    files = {
        CORRELATIONS_JSON: _json_text(correlations(snapshot, usage)),
        FORKS_SCATTER_CSV: _csv_text(FORKS_SCATTER_HEADER, forks_scatter(snapshot)),
    }
    if usage is not None:
        files[DEPENDENTS_SCATTER_CSV] = _csv_text(DEPENDENTS_SCATTER_HEADER, dependents_scatter(snapshot, usage))
    return files


def write_files(out_dir: str | Path, files: dict[str, str]) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name in sorted(files):
        (out_dir / name).write_text(files[name], encoding="utf-8", newline="\n")
    return out_dir


GNUPLOT_SCRIPTS = {
    "fig_languages.gp": """\
# Stars by language: quartile boxes with min/max whiskers
set datafile separator ","
set style fill empty
set logscale y
set xtics rotate by -45
set ylabel "stars"
set boxwidth 0.5
plot "language_quartiles.csv" every ::1 using 0:4:3:7:6:xticlabels(1) with candlesticks whiskerbars notitle, \\
     "" every ::1 using 0:5:5:5:5 with candlesticks lt -1 notitle
""",
    "fig_rank_curve.gp": """\
# Number of stars per rank position
set datafile separator ","
set logscale y
set xlabel "rank"
set ylabel "stars"
plot "rank_curve.csv" every ::1 using 1:2 with lines notitle
""",
    "fig_trajectories.gp": """\
# Rank trajectories, one curve per repository (pass repo=owner/name to select one)
set datafile separator ","
if (!exists("repo")) repo = ""
set yrange [*:*] reverse
set xlabel "week"
set ylabel "log2(rank)+1"
plot "trajectories.csv" every ::1 using 2:((repo eq "" || strcol(1) eq repo) ? $6 : 1/0) with lines notitle
""",
    "fig_forks.gp": """\
# Stars vs forks, log-log with identity line; zero counts are dropped by the log axes
set datafile separator ","
set logscale xy
set xlabel "stars"
set ylabel "forks"
plot "scatter_stars_forks.csv" every ::1 using 2:3 with points pt 7 ps 0.5 notitle, x with lines notitle
""",
    "fig_dependents.gp": """\
# Stars vs dependents, log-log
set datafile separator ","
set logscale xy
set xlabel "stars"
set ylabel "dependents"
plot "scatter_stars_dependents.csv" every ::1 using 3:4 with points pt 7 notitle
""",
}
