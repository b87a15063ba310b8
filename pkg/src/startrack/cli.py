"""``startrack`` command line.

Exit codes: 0 success, 1 partial failure (some repositories could not be
fetched, see ``errors.ndjson``), 2 hard failure.

Setting ``STARTRACK_FIXTURE_TRANSPORT`` to a JSON file of scripted
responses replaces every network call (no token needed, no sleeping).
"""

from __future__ import annotations

import logging
import os
import sys
import time
from pathlib import Path

import click

from startrack.classifier import ClassificationConfig
from startrack.errors import StartrackError
from startrack.github import CrawlFailedError, GitHubClient, build_snapshot
from startrack.npm import NpmClient, default_mapping, map_repos_to_packages, read_usage_cache, write_usage_cache
from startrack.report import (
    CORRELATIONS_JSON,
    GNUPLOT_SCRIPTS,
    REPORTS_DIR,
    analyze,
    correlations,
    render_bundle,
    render_correlation_files,
    write_files,
)
from startrack.store import ERRORS_FILE, open_snapshot
from startrack.trajectory import WEEKS
from startrack.transport import FetchPolicy, FixtureTransport

logger = logging.getLogger("startrack")

EXIT_OK, EXIT_PARTIAL, EXIT_FAIL = 0, 1, 2
FIXTURE_ENV = "STARTRACK_FIXTURE_TRANSPORT"
TOKEN_ENV = "GITHUB_TOKEN"


def _fail(message: str) -> None:
    click.echo(f"startrack: error: {message}", err=True)
    sys.exit(EXIT_FAIL)


def _fixture_transport() -> FixtureTransport | None:
    path = os.environ.get(FIXTURE_ENV)
    if not path:
        return None
    try:
        return FixtureTransport.from_file(path)
    except (OSError, ValueError) as exc:
        _fail(f"cannot load {FIXTURE_ENV}={path}: {exc}")


def _no_sleep(_: float) -> None:
    pass


def _open(snapshot_dir: Path):
    try:
        return open_snapshot(snapshot_dir)
    except StartrackError as exc:
        _fail(f"invalid snapshot {snapshot_dir}: {exc}")


def _config(popular_frac, very_popular_frac, sustainable_band, shift_threshold, monotone_frac, viral_frac):
    try:
        return ClassificationConfig(
            sustainable_band=sustainable_band,
            shift_threshold=shift_threshold,
            monotone_fraction=monotone_frac,
            viral_fraction=viral_frac,
            popular_fraction=popular_frac,
            very_popular_fraction=very_popular_frac,
        )
    except StartrackError as exc:
        _fail(str(exc))


def _out_dir(snapshot_dir: Path, out: Path | None) -> Path:
    return out if out is not None else snapshot_dir / REPORTS_DIR


def _write_gnuplot(out_dir: Path, names: list[str] | None = None) -> None:
    scripts = {k: v for k, v in GNUPLOT_SCRIPTS.items() if names is None or k in names}
    write_files(out_dir, scripts)


def _policy_options(f):
    f = click.option("--max-retries", default=3, show_default=True, type=click.IntRange(min=0))(f)
    f = click.option("--backoff", default=1.0, show_default=True, type=click.FloatRange(min=0), help="Base backoff seconds.")(f)
    f = click.option("--per-page", default=100, show_default=True, type=click.IntRange(1, 100))(f)
    f = click.option("--rate-limit-floor", default=0, show_default=True, type=click.IntRange(min=0))(f)
    f = click.option("--concurrency", default=4, show_default=True, type=click.IntRange(min=1))(f)
    return f


def _analysis_options(f):
    defaults = ClassificationConfig()
    f = click.option("--weeks", default=WEEKS, show_default=True, type=click.IntRange(min=2), help="Window length in weeks.")(f)
    f = click.option("--popular-frac", default=defaults.popular_fraction, show_default=True, type=float)(f)
    f = click.option("--very-popular-frac", default=defaults.very_popular_fraction, show_default=True, type=float)(f)
    f = click.option("--sustainable-band", default=defaults.sustainable_band, show_default=True, type=float)(f)
    f = click.option("--shift-threshold", default=defaults.shift_threshold, show_default=True, type=float)(f)
    f = click.option("--monotone-frac", default=defaults.monotone_fraction, show_default=True, type=float)(f)
    f = click.option("--viral-frac", default=defaults.viral_fraction, show_default=True, type=float)(f)
    f = click.option("--popular-only", is_flag=True, help="Restrict growth analysis to the popular tier.")(f)
    return f


@click.group()
@click.option("-v", "--verbose", is_flag=True)
def main(verbose: bool) -> None:
    """Track GitHub repository popularity from star histories."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


@main.command()
@click.option("--repos", "repos_file", required=True, type=click.Path(path_type=Path), help="One owner/name per line.")
@click.option("--out", "--snapshot", "out", required=True, type=click.Path(path_type=Path))
@_policy_options
def fetch(repos_file, out, max_retries, backoff, per_page, rate_limit_floor, concurrency):
    """Download metadata and star events into a snapshot directory."""
    try:
        lines = repos_file.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        _fail(f"cannot read repository list: {exc}")
    repo_list = [line.strip() for line in lines if line.strip() and not line.lstrip().startswith("#")]

    policy = FetchPolicy(max_retries, backoff, per_page, rate_limit_floor, concurrency)
    transport = _fixture_transport()
    token = os.environ.get(TOKEN_ENV)
    if transport is None and not token:
        _fail(f"{TOKEN_ENV} is not set; export a GitHub token to fetch from the live API")
    client = GitHubClient(token, policy, transport, sleep=_no_sleep if transport is not None else time.sleep)
    try:
        manifest = build_snapshot(repo_list, token, policy, out, client=client)
    except CrawlFailedError as exc:
        for failure in exc.failures:
            click.echo(f"startrack: {failure.full_name}: {failure.message}", err=True)
        _fail(str(exc))
    except (StartrackError, OSError) as exc:
        _fail(str(exc))
    sidecar = out / ERRORS_FILE
    if sidecar.exists():
        failed = sum(1 for line in sidecar.read_text(encoding="utf-8").splitlines() if line.strip())
        click.echo(f"startrack: {failed} repositories failed, see {sidecar}", err=True)
        click.echo(f"wrote {manifest.repo_count} repositories to {out}")
        sys.exit(EXIT_PARTIAL)
    click.echo(f"wrote {manifest.repo_count} repositories to {out}")


def _run_analysis(snapshot_dir, out, weeks, cfg, popular_only, gnuplot) -> Path:
    snapshot = _open(snapshot_dir)
    try:
        usage = read_usage_cache(snapshot_dir)
        result = analyze(snapshot, cfg, weeks=weeks, popular_only=popular_only)
        files = render_bundle(result, usage)
    except StartrackError as exc:
        _fail(str(exc))
    out_dir = write_files(_out_dir(snapshot_dir, out), files)
    if gnuplot:
        _write_gnuplot(out_dir, ["fig_languages.gp", "fig_rank_curve.gp", "fig_trajectories.gp"])
    if not result.growth:
        click.echo("startrack: warning: no eligible repositories, growth report is empty", err=True)
    return out_dir


@main.command(name="analyze")
@click.option("--snapshot", "snapshot_dir", required=True, type=click.Path(path_type=Path))
@click.option("--out", type=click.Path(path_type=Path), default=None, help="Defaults to <snapshot>/reports.")
@_analysis_options
@click.option("--gnuplot", is_flag=True, help="Also write gnuplot scripts next to the data.")
def analyze_cmd(snapshot_dir, out, weeks, popular_frac, very_popular_frac, sustainable_band, shift_threshold,
                monotone_frac, viral_frac, popular_only, gnuplot):
    """Compute tiers, trajectories, growth labels and summaries."""
    cfg = _config(popular_frac, very_popular_frac, sustainable_band, shift_threshold, monotone_frac, viral_frac)
    out_dir = _run_analysis(snapshot_dir, out, weeks, cfg, popular_only, gnuplot)
    click.echo(f"reports written to {out_dir}")


def _load_usage(snapshot_dir: Path, mapping: str | None, policy: FetchPolicy):
    if mapping is None:
        return read_usage_cache(snapshot_dir)
    try:
        pairs = default_mapping() if mapping == "default" else map_repos_to_packages(mapping)
    except OSError as exc:
        _fail(f"cannot read mapping file: {exc}")
    transport = _fixture_transport()
    client = NpmClient(policy, transport, sleep=_no_sleep if transport is not None else time.sleep)
    usage = client.fetch_usage(pairs)
    write_usage_cache(snapshot_dir, usage)
    return usage


@main.command()
@click.option("--snapshot", "snapshot_dir", required=True, type=click.Path(path_type=Path))
@click.option("--out", type=click.Path(path_type=Path), default=None, help="Defaults to <snapshot>/reports.")
@click.option("--y", "y_axis", type=click.Choice(["forks", "dependents"]), default="forks", show_default=True)
@click.option("--mapping", default=None, help="full_name,package_name CSV, or 'default' for the bundled Node.js list.")
@_policy_options
@click.option("--gnuplot", is_flag=True)
def correlate(snapshot_dir, out, y_axis, mapping, max_retries, backoff, per_page, rate_limit_floor, concurrency, gnuplot):
    """Spearman correlation of stars with forks or NPM dependents."""
    snapshot = _open(snapshot_dir)
    policy = FetchPolicy(max_retries, backoff, per_page, rate_limit_floor, concurrency)
    try:
        usage = _load_usage(snapshot_dir, mapping, policy)
    except StartrackError as exc:
        _fail(str(exc))
    if y_axis == "dependents" and usage is None:
        _fail("no NPM usage data: pass --mapping or provide npm-usage.ndjson in the snapshot")

    out_dir = write_files(_out_dir(snapshot_dir, out), render_correlation_files(snapshot, usage))
    if gnuplot:
        _write_gnuplot(out_dir, ["fig_forks.gp"] + (["fig_dependents.gp"] if usage is not None else []))
    entry = correlations(snapshot, usage)[f"stars_vs_{y_axis}"]
    if "error" in entry:
        _fail(f"stars vs {y_axis}: {entry['error']}")
    click.echo(f"stars vs {y_axis}: rho={entry['rho']:.4f} (n={entry['n']}); wrote {out_dir / CORRELATIONS_JSON}")


@main.command()
@click.option("--snapshot", "snapshot_dir", required=True, type=click.Path(path_type=Path))
@click.option("--out", type=click.Path(path_type=Path), default=None, help="Defaults to <snapshot>/reports.")
@_analysis_options
@click.option("--gnuplot", is_flag=True)
def report(snapshot_dir, out, weeks, popular_frac, very_popular_frac, sustainable_band, shift_threshold,
           monotone_frac, viral_frac, popular_only, gnuplot):
    """Full bundle: analysis reports plus correlation scatter files."""
    cfg = _config(popular_frac, very_popular_frac, sustainable_band, shift_threshold, monotone_frac, viral_frac)
    out_dir = _run_analysis(snapshot_dir, out, weeks, cfg, popular_only, gnuplot)
    snapshot = _open(snapshot_dir)
    usage = read_usage_cache(snapshot_dir)
    write_files(out_dir, render_correlation_files(snapshot, usage))
    if gnuplot:
        _write_gnuplot(out_dir)
    click.echo(f"reports written to {out_dir}")


if __name__ == "__main__":
    main()
