"""Command-line entry points for the matching workbench.

Exit codes: 0 success, 1 validation/configuration, 2 stage failure,
3 adapter/transport failure.
"""

from __future__ import annotations

import csv
import sys
from pathlib import Path

import click

from . import pipeline as pl
from .adjudication import AdjudicationStore
from .baseline import evaluate, parse_query
from .cases import compute_stats, load_cases
from .corpus import corpus_stats, load_corpus, filter_corpus
from .errors import (
    AdapterError,
    ConfigError,
    ParseError,
    StageError,
    TrialMatchError,
    ValidationError,
)
from .evalkit import dump_labels, load_labels, stratify_and_report
from .matching import load_reports, VerdictCache
from .ranking import RankingConfig, load_ranking
from .retrieval import DEFAULT_CUTOFF, load_candidates


def _corpus_filter(no_filter: bool, country: str) -> "pl.CorpusFilter":
    from .corpus import CorpusFilter

    if no_filter:
        return CorpusFilter()
    return CorpusFilter(require_recruiting=True, require_country=country or None)


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None, help="Pipeline config file (JSON).")
@click.option("--out", "out_dir", type=click.Path(), default=None, help="Default output directory.")
@click.option("--quiet", is_flag=True, default=False, help="Suppress progress output.")
@click.pass_context
def main(ctx, config_path, out_dir, quiet):
    """Clinical-trial matching workbench."""
    ctx.ensure_object(dict)
    ctx.obj["config_path"] = config_path
    ctx.obj["out_dir"] = out_dir
    ctx.obj["quiet"] = quiet


def _echo(ctx, message: str) -> None:
    if not ctx.obj.get("quiet"):
        click.echo(message)


# --- corpus ---------------------------------------------------------------------


@main.group("corpus")
def corpus_group():
    """Trial registry file tools."""


@corpus_group.command("validate")
@click.argument("path", type=click.Path(exists=True))
@click.pass_context
def corpus_validate(ctx, path):
    """Validate every record; exit 1 on the first invalid line."""
    records = load_corpus(path)
    _echo(ctx, f"OK: {len(records)} records")


@corpus_group.command("stats")
@click.argument("path", type=click.Path(exists=True))
def corpus_stats_cmd(path):
    """Record count, phase histogram, mean criteria per trial."""
    stats = corpus_stats(load_corpus(path))
    click.echo(f"records: {stats['records']}")
    click.echo("phases:")
    for phase, count in stats["phases"].items():
        click.echo(f"  {phase}: {count}")
    click.echo(f"mean criteria per trial: {stats['mean_criteria_per_trial']:.2f}")


# --- cases ----------------------------------------------------------------------


@main.group("cases")
def cases_group():
    """Patient case file tools."""


@cases_group.command("stats")
@click.argument("path", type=click.Path(exists=True))
@click.option("--csv", "as_csv", is_flag=True, default=False, help="Emit CSV instead of a table.")
def cases_stats_cmd(path, as_csv):
    """Cohort summary per source: N, sex, age, case length."""
    stats = compute_stats(load_cases(path))

    def fmt(mean, sd):
        if mean is None:
            return "-"
        if sd is None:
            return f"{mean:.1f}"
        return f"{mean:.1f} ± {sd:.1f}"

    if as_csv:
        writer = csv.writer(sys.stdout)
        writer.writerow(
            ["source", "n", "male", "female", "unknown_sex",
             "age_mean", "age_sd", "length_mean", "length_sd"]
        )
        for source, row in stats.per_source.items():
            writer.writerow(
                [source.value, row.count, row.males, row.females, row.unknown_sex,
                 row.age_mean, row.age_sd, row.length_mean, row.length_sd]
            )
        return
    header = ["source", "N", "sex (m:f)", "age (years)", "length (words)"]
    lines = [header]
    for source, row in stats.per_source.items():
        sex = f"{row.males}:{row.females}"
        if row.unknown_sex:
            sex += f" (+{row.unknown_sex} unknown)"
        lines.append(
            [source.value, str(row.count), sex, fmt(row.age_mean, row.age_sd),
             fmt(row.length_mean, row.length_sd)]
        )
    widths = [max(len(line[i]) for line in lines) for i in range(len(header))]
    for i, line in enumerate(lines):
        click.echo("  ".join(cell.ljust(widths[j]) for j, cell in enumerate(line)))
        if i == 0:
            click.echo("  ".join("-" * w for w in widths))


# --- retrieval ------------------------------------------------------------------


@main.command("retrieve")
@click.option("--cases", "cases_path", type=click.Path(exists=True), required=True)
@click.option("--corpus", "corpus_path", type=click.Path(exists=True), required=True)
@click.option("--cutoff", type=int, default=DEFAULT_CUTOFF, show_default=True)
@click.option("--provider", type=click.Choice(["stub", "service"]), default="stub", show_default=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--no-filter", is_flag=True, default=False, help="Skip the recruiting-in-country filter.")
@click.option("--country", default="US", show_default=True)
@click.pass_context
def retrieve_cmd(ctx, cases_path, corpus_path, cutoff, provider, out_dir, no_filter, country):
    """Stage 1: emit one candidate-list file per case."""
    corpus = filter_corpus(load_corpus(corpus_path), _corpus_filter(no_filter, country))
    if not corpus:
        raise ValidationError("no records remain after filtering")
    cases = load_cases(cases_path)
    adapter = pl.make_adapter(provider, corpus)
    embedder = pl.make_embedder(provider, 64)
    results = pl.stage_retrieve(cases, corpus, adapter, embedder, out_dir, cutoff=cutoff)
    _echo(ctx, f"retrieved candidates for {len(results)} cases -> {out_dir}")


# --- matching -------------------------------------------------------------------


@main.command("match")
@click.option("--cases", "cases_path", type=click.Path(exists=True), required=True)
@click.option("--corpus", "corpus_path", type=click.Path(exists=True), required=True)
@click.option("--candidates", "candidates_dir", type=click.Path(exists=True), required=True)
@click.option("--adapter", type=click.Choice(["stub", "service"]), default="stub", show_default=True)
@click.option("--parallel", type=int, default=1, show_default=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--cache", "cache_dir", type=click.Path(), default=None, help="Verdict cache directory.")
@click.option("--no-filter", is_flag=True, default=False)
@click.option("--country", default="US", show_default=True)
@click.pass_context
def match_cmd(ctx, cases_path, corpus_path, candidates_dir, adapter, parallel, out_dir, cache_dir, no_filter, country):
    """Stage 2: criterion-by-criterion judgments for every candidate."""
    corpus = filter_corpus(load_corpus(corpus_path), _corpus_filter(no_filter, country))
    cases = load_cases(cases_path)
    corpus_by_id = {r.trial_id: r for r in corpus}
    candidates = {}
    for path in sorted(Path(candidates_dir).glob("*.json")):
        cl = load_candidates(path)
        candidates[cl.case_id] = cl
    missing = [c.case_id for c in cases if c.case_id not in candidates]
    if missing:
        raise ValidationError(f"no candidate list for cases: {missing}")
    cache = VerdictCache(cache_dir) if cache_dir else None
    inference = pl.make_adapter(adapter, corpus)
    reports = pl.stage_match(
        cases, corpus_by_id, candidates, inference, out_dir, cache=cache, parallel=parallel
    )
    total = sum(len(r) for r in reports.values())
    _echo(ctx, f"judged {total} case-trial pairs -> {out_dir}")


# --- ranking --------------------------------------------------------------------


@main.command("rank")
@click.option("--reports", "reports_dir", type=click.Path(exists=True), required=True)
@click.option("--top-k", type=int, default=10, show_default=True)
@click.option("--weights", default="0.5,0.25,0.25", show_default=True, help="criteria,relevance,eligibility")
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.pass_context
def rank_cmd(ctx, reports_dir, top_k, weights, out_dir):
    """Stage 3: ranked top-k list per case."""
    try:
        w = tuple(float(part) for part in weights.split(","))
    except ValueError:
        raise ConfigError(f"cannot parse weights '{weights}'")
    config = RankingConfig(weights=w, top_k=top_k)
    reports_by_case = {
        path.stem: load_reports(path) for path in sorted(Path(reports_dir).glob("*.jsonl"))
    }
    if not reports_by_case:
        raise ValidationError(f"no report files in {reports_dir}")
    rankings = pl.stage_rank(reports_by_case, config, out_dir)
    _echo(ctx, f"ranked {len(rankings)} cases -> {out_dir}")


# --- baseline -------------------------------------------------------------------


@main.group("baseline", invoke_without_command=True)
@click.option("--cases", "cases_path", type=click.Path(exists=True), default=None)
@click.option("--corpus", "corpus_path", type=click.Path(exists=True), default=None)
@click.option("--adapter", type=click.Choice(["stub", "service"]), default="stub", show_default=True)
@click.option("--out", "out_dir", type=click.Path(), default=None)
@click.option("--no-filter", is_flag=True, default=False)
@click.option("--country", default="US", show_default=True)
@click.pass_context
def baseline_group(ctx, cases_path, corpus_path, adapter, out_dir, no_filter, country):
    """Keyword-search baseline over the condition fields."""
    if ctx.invoked_subcommand is not None:
        return
    if not (cases_path and corpus_path and out_dir):
        raise ConfigError("baseline requires --cases, --corpus, and --out")
    corpus = filter_corpus(load_corpus(corpus_path), _corpus_filter(no_filter, country))
    cases = load_cases(cases_path)
    inference = pl.make_adapter(adapter, corpus)
    results = pl.stage_baseline(cases, corpus, inference, out_dir)
    empty = sum(1 for r in results.values() if not r.matched)
    _echo(ctx, f"baseline matched {len(results)} cases ({empty} empty) -> {out_dir}")


@baseline_group.command("query")
@click.argument("text")
@click.option("--corpus", "corpus_path", type=click.Path(exists=True), required=True)
@click.option("--no-filter", is_flag=True, default=False)
@click.option("--country", default="US", show_default=True)
def baseline_query_cmd(text, corpus_path, no_filter, country):
    """Run an ad-hoc Boolean query; prints matching trial ids."""
    corpus = filter_corpus(load_corpus(corpus_path), _corpus_filter(no_filter, country))
    query = parse_query(text)
    matched = [r.trial_id for r in sorted(corpus, key=lambda r: r.trial_id) if evaluate(query, r)]
    for trial_id in matched:
        click.echo(trial_id)
    if not matched:
        click.echo("(no matches)", err=True)


# --- evaluation -----------------------------------------------------------------


@main.command("eval")
@click.option("--runs", "runs_dir", type=click.Path(exists=True), required=True,
              help="A pipeline run directory (with ranking/ and baseline/).")
@click.option("--labels", "labels_path", type=click.Path(exists=True), required=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--by-source", is_flag=True, default=False)
@click.option("--cases", "cases_path", type=click.Path(exists=True), default=None,
              help="Cases file; defaults to the one recorded in the run manifest.")
@click.pass_context
def eval_cmd(ctx, runs_dir, labels_path, out_path, by_source, cases_path):
    """Compute the metric report for a run against gold labels."""
    runs_dir = Path(runs_dir)
    runs: dict[str, dict[str, list[str]]] = {}
    ranking_dir = runs_dir / "ranking"
    if ranking_dir.is_dir():
        runs["pipeline"] = {
            path.stem: [m.trial_id for m in load_ranking(path)]
            for path in sorted(ranking_dir.glob("*.jsonl"))
        }
    baseline_dir = runs_dir / "baseline"
    if baseline_dir.is_dir():
        from .baseline import load_baseline_result

        runs["baseline"] = {
            path.stem: list(load_baseline_result(path).matched)
            for path in sorted(baseline_dir.glob("*.json"))
        }
    if not runs:
        raise ValidationError(f"{runs_dir} contains no ranking/ or baseline/ outputs")

    if cases_path is None:
        manifest_path = runs_dir / "manifest.json"
        if not manifest_path.is_file():
            raise ConfigError("no --cases given and the run has no manifest.json")
        import json

        cases_path = json.loads(manifest_path.read_text(encoding="utf-8"))["config"]["cases_path"]
    cases = load_cases(cases_path)
    sources = {c.case_id: c.source for c in cases}
    labels = load_labels(labels_path)
    report = stratify_and_report(runs, labels, sources, by_source=by_source)

    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(
        "\n".join(",".join(row) for row in report.to_csv_rows()) + "\n", encoding="utf-8"
    )
    hitrate_path = out_path.with_name(out_path.stem + "_hitrate.csv")
    hitrate_path.write_text(
        "\n".join(",".join(row) for row in report.hit_rate_csv_rows()) + "\n", encoding="utf-8"
    )
    _echo(ctx, report.to_text())
    _echo(ctx, f"\nwrote {out_path} and {hitrate_path}")


# --- review service -----------------------------------------------------------


@main.command("serve")
@click.option("--runs", "runs_dir", type=click.Path(exists=True), required=True)
@click.option("--store", "store_dir", type=click.Path(), required=True)
@click.option("--bind", default="127.0.0.1:8400", show_default=True)
@click.option("--raters", default="", help="Comma-separated rater ids to register.")
def serve_cmd(runs_dir, store_dir, bind, raters):
    """Serve the review API for the browser client."""
    import uvicorn

    from .service import create_app

    host, _, port = bind.partition(":")
    rater_ids = tuple(r.strip() for r in raters.split(",") if r.strip())
    app = create_app(runs_dir, store_dir, rater_ids)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or "8400"))


@main.command("export-labels")
@click.option("--store", "store_dir", type=click.Path(exists=True), required=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.pass_context
def export_labels_cmd(ctx, store_dir, out_path):
    """Write current consensus labels as a gold-label file."""
    store = AdjudicationStore(store_dir, {})
    labels = store.consensus_labels()
    dump_labels(labels, out_path)
    _echo(ctx, f"exported {len(labels)} consensus labels -> {out_path}")


# --- pipeline -------------------------------------------------------------------


@main.group("pipeline")
def pipeline_group():
    """Whole-study orchestration."""


@pipeline_group.command("run")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--corpus", "corpus_path", type=click.Path(), default=None)
@click.option("--cases", "cases_path", type=click.Path(), default=None)
@click.option("--labels", "labels_path", type=click.Path(), default=None)
@click.option("--out", "out_dir", type=click.Path(), default=None)
@click.option("--cutoff", type=int, default=None)
@click.option("--top-k", type=int, default=None)
@click.option("--parallel", type=int, default=None)
@click.option("--adapter", type=click.Choice(["stub", "service"]), default=None,
              help="Adapter for all stages at once.")
@click.pass_context
def pipeline_run_cmd(ctx, config_path, corpus_path, cases_path, labels_path, out_dir, cutoff, top_k, parallel, adapter):
    """Run corpus -> retrieval -> matching -> ranking -> baseline -> eval."""
    config_path = config_path or ctx.obj.get("config_path")
    out_dir = out_dir or ctx.obj.get("out_dir")
    overrides: dict = {}
    if corpus_path:
        overrides["corpus_path"] = corpus_path
    if cases_path:
        overrides["cases_path"] = cases_path
    if labels_path:
        overrides["labels_path"] = labels_path
    if out_dir:
        overrides["out_dir"] = out_dir
    if cutoff is not None:
        overrides["cutoff"] = cutoff
    if top_k is not None:
        overrides["top_k"] = top_k
    if parallel is not None:
        overrides["parallel"] = parallel
    if adapter is not None:
        overrides.update(
            retrieval_adapter=adapter, matching_adapter=adapter,
            baseline_adapter=adapter, embedder=adapter,
        )

    if config_path:
        config = pl.PipelineConfig.from_file(config_path, **overrides)
    else:
        required = ("corpus_path", "cases_path", "out_dir")
        missing = [name for name in required if name not in overrides]
        if missing:
            raise ConfigError(f"missing {missing} (give --config or the explicit options)")
        config = pl.PipelineConfig(
            corpus_path=Path(overrides["corpus_path"]),
            cases_path=Path(overrides["cases_path"]),
            out_dir=Path(overrides["out_dir"]),
            labels_path=Path(overrides["labels_path"]) if overrides.get("labels_path") else None,
            cutoff=overrides.get("cutoff", DEFAULT_CUTOFF),
            top_k=overrides.get("top_k", 10),
            parallel=overrides.get("parallel", 1),
            **{
                key: overrides[key]
                for key in ("retrieval_adapter", "matching_adapter", "baseline_adapter", "embedder")
                if key in overrides
            },
        )

    run_dir = pl.pipeline_run(config, progress=lambda stage: _echo(ctx, f"stage done: {stage}"))
    _echo(ctx, f"run complete -> {run_dir}")


def _run() -> int:
    try:
        main(standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.Abort:
        return 1
    except (ValidationError, ConfigError, ParseError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except StageError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except AdapterError as exc:
        click.echo(f"error: {exc}", err=True)
        return 3
    except TrialMatchError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    return 0


def entrypoint() -> None:
    sys.exit(_run())


if __name__ == "__main__":
    entrypoint()
