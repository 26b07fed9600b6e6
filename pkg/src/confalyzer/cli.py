"""Command-line entry point.

Exit codes: 0 success, 1 domain error, 2 usage error. Tabular data goes to
stdout; diagnostics go to stderr. Only ``analyze --backend http`` and
``serve`` ever open a network socket; everything else runs offline.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import fixtures as demo_fixtures
from .agreement import from_judgments, fleiss_kappa, gwet_ac1, observed_agreement
from .catalog import builtin_catalog, criteria_subset, load_catalog
from .config import Config, load_config, override
from .errors import ConfalyzerError
from .findings import Severity
from .gateway import HttpBackend, MockBackend
from .prompts import default_templates, load_templates
from .reports import (
    export,
    plausibility_table,
    render_table,
    round3,
    severity_by_criterion,
    severity_by_sample,
    severity_table,
    timing_table,
    token_table,
)
from .review import (
    assign,
    assignment_from_record,
    assignment_to_record,
    judgment_from_record,
    latest_judgments,
    load_reviewers,
    select_reviewable,
    verdicts,
)
from .runner import RunManifest, new_run_manifest, resume_run, run_matrix, timing_summary
from .store import ResultsStore
from .service import create_app, load_token_table


class Context:
    def __init__(self, config: Config):
        self.config = config

    @property
    def store(self) -> ResultsStore:
        return ResultsStore(self.config.store_root)

    def catalog(self, catalog_path: str | None = None):
        path = catalog_path or self.config.catalog_path
        return load_catalog(path) if path else builtin_catalog()

    def templates(self, templates_path: str | None = None):
        path = templates_path or self.config.templates_path
        return load_templates(path) if path else default_templates()


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True), help="Config file (JSON).")
@click.option("--store", "store_root", type=click.Path(), help="Store root directory.")
@click.pass_context
def main(ctx: click.Context, config_path: str | None, store_root: str | None):
    """Usability audits of configurator UIs, review workflow, and reports."""
    config = load_config(config_path)
    if store_root:
        config = override(config, store_root=Path(store_root))
    ctx.obj = Context(config)


# -- catalog -------------------------------------------------------------------


@main.group()
def catalog():
    """Criteria catalog commands."""


@catalog.command("list")
@click.option("--catalog", "catalog_path", type=click.Path(exists=True), help="Catalog file override.")
@click.pass_obj
def catalog_list(app: Context, catalog_path: str | None):
    """Print every criterion as TSV: id, category, name, description."""
    for criterion in app.catalog(catalog_path):
        click.echo(
            "\t".join(
                [
                    criterion.id.value,
                    criterion.category.value,
                    criterion.name,
                    criterion.description,
                ]
            )
        )


# -- dataset -------------------------------------------------------------------


@main.group()
def dataset():
    """Dataset manifest commands."""


@dataset.command("ingest")
@click.argument("manifest", type=click.Path(exists=True))
@click.pass_obj
def dataset_ingest(app: Context, manifest: str):
    """Validate and persist a dataset manifest."""
    samples = app.store.ingest_dataset(manifest)
    click.echo(f"ingested {len(samples)} samples into {app.store.root}", err=True)


@dataset.command("list")
@click.pass_obj
def dataset_list(app: Context):
    """Print ingested samples as TSV: id, industry, name, duration, url."""
    from .store import format_duration

    for sample in app.store.load_samples():
        click.echo(
            "\t".join(
                [
                    str(sample.id),
                    sample.industry,
                    sample.name,
                    format_duration(sample.duration_s),
                    sample.url,
                ]
            )
        )


@dataset.command("demo")
@click.option("--out", "out_dir", type=click.Path(), default="fixtures", show_default=True)
def dataset_demo(out_dir: str):
    """Write the bundled demo dataset, mock responses, reviewers, and tokens."""
    paths = demo_fixtures.write_demo_tree(out_dir)
    for name, path in paths.items():
        click.echo(f"{name}: {path}", err=True)


# -- analyze -------------------------------------------------------------------


@main.command()
@click.option("--dataset", "dataset_path", type=click.Path(exists=True), help="Manifest to ingest first.")
@click.option("--catalog", "catalog_path", type=click.Path(exists=True), help="Catalog file override.")
@click.option("--templates", "templates_path", type=click.Path(exists=True), help="Prompt template file.")
@click.option("--backend", "backend_kind", type=click.Choice(["mock", "http"]), default=None)
@click.option("--fixtures", "fixtures_path", type=click.Path(exists=True), help="Mock response fixtures.")
@click.option("--criteria", "criteria_ids", default="all", show_default=True, help="Comma-separated ids or 'all'.")
@click.option("--max-in-flight", default=1, show_default=True, type=int)
@click.option("--resume", "resume_id", default=None, help="Resume an existing run id.")
@click.pass_obj
def analyze(
    app: Context,
    dataset_path: str | None,
    catalog_path: str | None,
    templates_path: str | None,
    backend_kind: str | None,
    fixtures_path: str | None,
    criteria_ids: str,
    max_in_flight: int,
    resume_id: str | None,
):
    """Run (or resume) the sample x criterion analysis matrix."""
    store = app.store
    if dataset_path:
        store.ingest_dataset(dataset_path)
    samples = store.load_samples()

    cat = app.catalog(catalog_path)
    if criteria_ids.strip().lower() != "all":
        cat = criteria_subset(cat, [part.strip() for part in criteria_ids.split(",") if part.strip()])
    store.save_catalog_snapshot(cat.to_document())

    templates = app.templates(templates_path)

    profile = app.config.backend
    kind = backend_kind or profile.kind
    if kind == "mock":
        path = fixtures_path or profile.fixtures_path
        if not path:
            raise ConfalyzerError("mock backend needs --fixtures or backend.fixtures_path in config")
        backend = MockBackend.from_file(path)
    else:
        if not profile.endpoint:
            raise ConfalyzerError("http backend needs backend.endpoint in config")
        backend = HttpBackend(
            endpoint=profile.endpoint,
            model_name=profile.model_name,
            api_key_env=profile.api_key_env,
        )

    if resume_id:
        manifest, findings = resume_run(
            store, resume_id, samples, cat, templates, backend, max_in_flight=max_in_flight
        )
    else:
        manifest = new_run_manifest(samples, cat, app.config.params, backend.backend_id)
        manifest, findings = run_matrix(
            store, manifest, samples, cat, templates, backend, max_in_flight=max_in_flight
        )

    counts = manifest.counts()
    click.echo(
        f"run {manifest.run_id}: {counts['done']} findings, {counts['failed']} failures "
        f"({len(samples)} samples x {len(cat)} criteria)",
        err=True,
    )
    click.echo(manifest.run_id)
    if counts["failed"]:
        sys.exit(1)


# -- report --------------------------------------------------------------------


def _resolve_run(store: ResultsStore, run_id: str | None) -> str:
    if run_id:
        store.require_run(run_id)
        return run_id
    runs = store.list_runs()
    if len(runs) == 1:
        return runs[0]
    if not runs:
        raise ConfalyzerError("no runs in store")
    raise ConfalyzerError(f"multiple runs in store, pass --run (one of: {', '.join(runs)})")


def _emit(table, fmt: str, out: str | None):
    if out:
        path = export(table, fmt, out)
        click.echo(f"wrote {path}", err=True)
    else:
        click.echo(render_table(table, fmt), nl=False)


@main.group()
def report():
    """Aggregate reports over stored findings and verdicts."""


@report.command("severity")
@click.option("--run", "run_id", default=None)
@click.option("--by", "group_by", type=click.Choice(["sample", "criterion"]), default="sample", show_default=True)
@click.option("--format", "fmt", type=click.Choice(["csv", "markdown"]), default="markdown", show_default=True)
@click.option("--out", default=None, type=click.Path())
@click.pass_obj
def report_severity(app: Context, run_id: str | None, group_by: str, fmt: str, out: str | None):
    """Severity histogram per sample or per criterion."""
    store = app.store
    run_id = _resolve_run(store, run_id)
    findings = list(store.load_findings(run_id))
    if group_by == "sample":
        summary = severity_by_sample(findings)
    else:
        manifest = RunManifest.from_document(store.load_run_manifest(run_id))
        summary = severity_by_criterion(findings, manifest.criterion_ids)
    _emit(severity_table(summary, group_by), fmt, out)


@report.command("plausibility")
@click.option("--run", "run_id", default=None)
@click.option("--format", "fmt", type=click.Choice(["csv", "markdown"]), default="markdown", show_default=True)
@click.option("--out", default=None, type=click.Path())
@click.pass_obj
def report_plausibility(app: Context, run_id: str | None, fmt: str, out: str | None):
    """Majority-vote plausibility rates by severity class."""
    store = app.store
    run_id = _resolve_run(store, run_id)
    assignments = [
        a
        for a in (assignment_from_record(r) for r in store.load_assignments())
        if a.finding_key[0] == run_id
    ]
    judgments = [judgment_from_record(r) for r in store.load_judgments()]
    verdict_list, incomplete = verdicts(judgments, assignments)
    if not verdict_list:
        raise ConfalyzerError("no complete findings")
    findings = list(store.load_findings(run_id))
    table = plausibility_table(verdict_list, findings)
    if incomplete:
        table.footnotes.append(f"{len(incomplete)} findings still awaiting judgments.")
    _emit(table, fmt, out)


@report.command("timing")
@click.option("--run", "run_id", default=None)
@click.option("--format", "fmt", type=click.Choice(["csv", "markdown"]), default="markdown", show_default=True)
@click.option("--out", default=None, type=click.Path())
@click.pass_obj
def report_timing(app: Context, run_id: str | None, fmt: str, out: str | None):
    """Latency aggregates for a finished run."""
    store = app.store
    run_id = _resolve_run(store, run_id)
    manifest = RunManifest.from_document(store.load_run_manifest(run_id))
    _emit(timing_table(timing_summary(manifest, store.load_findings(run_id))), fmt, out)


@report.command("tokens")
@click.option("--run", "run_id", default=None)
@click.option("--format", "fmt", type=click.Choice(["csv", "markdown"]), default="markdown", show_default=True)
@click.option("--out", default=None, type=click.Path())
@click.pass_obj
def report_tokens(app: Context, run_id: str | None, fmt: str, out: str | None):
    """Token usage per sample."""
    store = app.store
    run_id = _resolve_run(store, run_id)
    _emit(token_table(list(store.load_findings(run_id))), fmt, out)


# -- review --------------------------------------------------------------------


@main.group()
def review():
    """Reviewer assignment and verdicts."""


@review.command("assign")
@click.option("--run", "run_id", default=None)
@click.option("--reviewers", "reviewers_path", type=click.Path(exists=True), required=True)
@click.option("--k", default=None, type=int, help="Reviewers per finding (odd).")
@click.option("--seed", default=None, type=int)
@click.pass_obj
def review_assign(app: Context, run_id: str | None, reviewers_path: str, k: int | None, seed: int | None):
    """Assign every flagged finding to k reviewers."""
    store = app.store
    run_id = _resolve_run(store, run_id)
    if store.load_assignments():
        raise ConfalyzerError("assignments already recorded in this store")
    reviewers = load_reviewers(json.loads(Path(reviewers_path).read_text(encoding="utf-8")))
    k = k if k is not None else app.config.review_k
    seed = seed if seed is not None else app.config.review_seed
    reviewable = select_reviewable(list(store.load_findings(run_id)))
    if not reviewable:
        raise ConfalyzerError("no flagged findings to review")
    assignments = assign(reviewable, reviewers, run_id, k=k, seed=seed)
    for assignment in assignments:
        store.append_assignment(assignment_to_record(assignment, k=k, seed=seed))
    click.echo(
        f"assigned {len(assignments)} findings to {len(reviewers)} reviewers (k={k}, seed={seed})",
        err=True,
    )


@review.command("status")
@click.pass_obj
def review_status(app: Context):
    """Assignment and judgment progress per reviewer."""
    store = app.store
    assignments = [assignment_from_record(r) for r in store.load_assignments()]
    judgments = [judgment_from_record(r) for r in store.load_judgments()]
    latest = latest_judgments(judgments)
    per_reviewer: dict[str, list[int]] = {}
    for assignment in assignments:
        for reviewer_id in assignment.reviewer_ids:
            entry = per_reviewer.setdefault(reviewer_id, [0, 0])
            entry[0] += 1
            if (assignment.finding_key, reviewer_id) in latest:
                entry[1] += 1
    _, incomplete = verdicts(judgments, assignments)
    click.echo(f"findings assigned: {len(assignments)}; awaiting judgments: {len(incomplete)}")
    for reviewer_id in sorted(per_reviewer):
        assigned, judged = per_reviewer[reviewer_id]
        click.echo(f"{reviewer_id}\t{judged} / {assigned} judged")


@review.command("verdicts")
@click.option("--out", default=None, type=click.Path())
@click.pass_obj
def review_verdicts(app: Context, out: str | None):
    """Majority-vote verdicts as JSON."""
    store = app.store
    assignments = [assignment_from_record(r) for r in store.load_assignments()]
    judgments = [judgment_from_record(r) for r in store.load_judgments()]
    verdict_list, incomplete = verdicts(judgments, assignments)
    document = {
        "schema": 1,
        "verdicts": [
            {
                "run_id": v.finding_key[0],
                "sample_id": v.finding_key[1],
                "criterion_id": v.finding_key[2],
                "issue_plausible_majority": v.issue_plausible_majority,
                "improvement_plausible_majority": v.improvement_plausible_majority,
                "full_agreement_issue": v.full_agreement_issue,
                "full_agreement_improvement": v.full_agreement_improvement,
            }
            for v in verdict_list
        ],
        "incomplete": len(incomplete),
    }
    text = json.dumps(document, indent=2) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
        click.echo(f"wrote {out}", err=True)
    else:
        click.echo(text, nl=False)


# -- stats ---------------------------------------------------------------------


@main.group()
def stats():
    """Inter-rater agreement statistics."""


@stats.command("irr")
@click.option("--run", "run_id", default=None)
@click.option("--question", type=click.Choice(["issue", "improvement"]), required=True)
@click.pass_obj
def stats_irr(app: Context, run_id: str | None, question: str):
    """Observed agreement, chance-corrected kappa, and AC1 for one question."""
    store = app.store
    assignments = [assignment_from_record(r) for r in store.load_assignments()]
    if run_id:
        assignments = [a for a in assignments if a.finding_key[0] == run_id]
    judgments = [judgment_from_record(r) for r in store.load_judgments()]
    latest = latest_judgments(judgments)
    complete = [
        a
        for a in assignments
        if all((a.finding_key, reviewer) in latest for reviewer in a.reviewer_ids)
    ]
    if not complete:
        raise ConfalyzerError("no complete findings")
    matrix = from_judgments(judgments, complete, question)
    kappa = fleiss_kappa(matrix)
    click.echo(f"question\t{question}")
    click.echo(f"items\t{matrix.n_items}")
    click.echo(f"observed agreement (P_o)\t{round3(observed_agreement(matrix))}")
    click.echo(f"kappa\t{'undefined' if kappa is None else round3(kappa)}")
    click.echo(f"AC1\t{round3(gwet_ac1(matrix))}")


# -- serve / export --------------------------------------------------------------


@main.command()
@click.option("--port", default=None, type=int)
@click.option("--store", "store_root", type=click.Path(), default=None)
@click.option("--tokens", "tokens_path", type=click.Path(exists=True), default=None)
@click.pass_obj
def serve(app: Context, port: int | None, store_root: str | None, tokens_path: str | None):
    """Run the review service."""
    import uvicorn

    config = app.config
    if store_root:
        config = override(config, store_root=Path(store_root))
    tokens_file = tokens_path or config.tokens_path
    if not tokens_file:
        raise ConfalyzerError("serve needs --tokens or service.tokens_path in config")
    tokens = load_token_table(tokens_file)
    uvicorn.run(
        create_app(config.store_root, tokens),
        host="127.0.0.1",
        port=port if port is not None else config.service_port,
    )


@main.command("export")
@click.option("--run", "run_id", default=None)
@click.option("--format", "fmt", type=click.Choice(["csv", "markdown"]), default="csv", show_default=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.pass_obj
def export_bundle(app: Context, run_id: str | None, fmt: str, out_dir: str):
    """Export every available report for a run into a directory."""
    store = app.store
    run_id = _resolve_run(store, run_id)
    findings = list(store.load_findings(run_id))
    manifest = RunManifest.from_document(store.load_run_manifest(run_id))
    suffix = "md" if fmt == "markdown" else "csv"
    out = Path(out_dir)

    written = [
        export(severity_table(severity_by_sample(findings), "sample"), fmt, out / f"severity_by_sample.{suffix}"),
        export(
            severity_table(severity_by_criterion(findings, manifest.criterion_ids), "criterion"),
            fmt,
            out / f"severity_by_criterion.{suffix}",
        ),
        export(token_table(findings), fmt, out / f"tokens.{suffix}"),
    ]
    if manifest.finished():
        written.append(
            export(timing_table(timing_summary(manifest, store.load_findings(run_id))), fmt, out / f"timing.{suffix}")
        )
    assignments = [
        a
        for a in (assignment_from_record(r) for r in store.load_assignments())
        if a.finding_key[0] == run_id
    ]
    judgments = [judgment_from_record(r) for r in store.load_judgments()]
    verdict_list, _ = verdicts(judgments, assignments)
    if verdict_list:
        written.append(
            export(plausibility_table(verdict_list, findings), fmt, out / f"plausibility.{suffix}")
        )
    for path in written:
        click.echo(f"wrote {path}", err=True)


def run_main() -> int:
    try:
        main(standalone_mode=False)
    except click.exceptions.Abort:
        return 130
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except ConfalyzerError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(run_main())
