"""Operator command line: ingest packs, serve, export, generate, report."""

from __future__ import annotations

import json
import os

import click

from . import genai
from .annotations import FLAG_NAMES
from .demo import seed_demo
from .harness import Harness, HarnessConfig
from .metrics import aggregate, multi_attribute_kappa
from .packs import PackFormatError, PackIngestError, ingest_pack_file
from .pipeline import (
    DEFAULT_MAX_WORDS,
    DEFAULT_MIN_WORDS,
    PipelineError,
    build_finetune_dataset,
    export_records,
    filter_by_length,
)
from .reporting import render_figures, render_report
from .service import ServiceConfig, serve as run_service
from .store import Store

GROUP_BY_CHOICES = ("problem,understanding", "problem", "source")


def store_option(fn):
    return click.option(
        "--store",
        "store_path",
        default="flipfeed.jsonl",
        show_default=True,
        help="Path of the journal store file.",
    )(fn)


def harness_options(fn):
    fn = click.option("--wall-ms", default=5000, show_default=True,
                      help="Per-run wall clock limit.")(fn)
    fn = click.option("--max-output-bytes", default=65536, show_default=True,
                      help="Per-stream output cap.")(fn)
    fn = click.option("--workers", default=0, show_default=True,
                      help="Harness pool size (0 = CPU count).")(fn)
    return fn


def _harness(wall_ms: int, max_output_bytes: int, workers: int) -> Harness:
    return Harness(HarnessConfig(
        wall_ms=wall_ms, max_output_bytes=max_output_bytes, workers=workers
    ))


@click.group()
def main() -> None:
    """Learnersourced programming-feedback toolkit."""


@main.command()
@click.argument("pack_file", type=click.Path(exists=True, dir_okay=False))
@store_option
@harness_options
def ingest(pack_file: str, store_path: str, wall_ms: int,
           max_output_bytes: int, workers: int) -> None:
    """Validate a problem pack and persist it to the store."""
    with _harness(wall_ms, max_output_bytes, workers) as harness:
        try:
            pack = ingest_pack_file(pack_file, harness)
        except (PackFormatError, PackIngestError) as exc:
            raise click.ClickException(str(exc))
    with Store(store_path) as store:
        store.put_pack(pack)
    click.echo(
        f"ingested pack {pack.id}: {len(pack.problems)} problems, "
        f"{len(pack.programs)} programs"
    )


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@store_option
@harness_options
@click.option("--export-dir", default="exports", show_default=True)
@click.option("--endpoints", "endpoints_path", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="JSON file describing model endpoints.")
@click.option("--student-token", envvar="FLIPFEED_STUDENT_TOKEN", default=None,
              help="Bearer token for session endpoints (default: open).")
@click.option("--staff-token", envvar="FLIPFEED_STAFF_TOKEN", default=None,
              help="Bearer token for staff endpoints (default: open).")
def serve(host: str, port: int, store_path: str, wall_ms: int,
          max_output_bytes: int, workers: int, export_dir: str,
          endpoints_path: str | None, student_token: str | None,
          staff_token: str | None) -> None:
    """Serve the HTTP API over an ingested pack."""
    config = ServiceConfig(
        host=host,
        port=port,
        store_path=store_path,
        export_dir=export_dir,
        endpoints_path=endpoints_path,
        student_token=student_token,
        staff_token=staff_token,
        wall_ms=wall_ms,
        max_output_bytes=max_output_bytes,
        workers=workers,
    )
    try:
        run_service(config)
    except RuntimeError as exc:
        raise click.ClickException(str(exc))


@main.command(name="export-finetune")
@store_option
@click.option("--min-words", default=DEFAULT_MIN_WORDS, show_default=True)
@click.option("--max-words", default=DEFAULT_MAX_WORDS, show_default=True)
@click.option("--out", "out_path", default="finetune.jsonl", show_default=True)
def export_finetune(store_path: str, min_words: int, max_words: int,
                    out_path: str) -> None:
    """Export the filtered student corpus as fine-tuning records."""
    with Store(store_path) as store:
        pack = store.active_pack()
        if pack is None:
            raise click.ClickException("store holds no ingested pack; run ingest first")
        students = [i for i in store.feedback_instances() if i.source == "student"]
        try:
            kept = filter_by_length(students, min_words, max_words)
            records = build_finetune_dataset(kept, pack)
            manifest = export_records(
                records, out_path, pack_id=pack.id,
                min_words=min_words, max_words=max_words,
            )
        except PipelineError as exc:
            raise click.ClickException(str(exc))
    click.echo(f"{manifest['count']} records written to {out_path}")
    click.echo(f"manifest: {out_path}.manifest.json (sha256 {manifest['sha256'][:12]})")


@main.command(name="gen-feedback")
@store_option
@click.option("--endpoints", "endpoints_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--strategies", default="basic,engineered", show_default=True)
@click.option("--dry-run", is_flag=True, default=False)
@click.option("--rerun", is_flag=True, default=False,
              help="Skip cells whose instance is already stored.")
@click.option("--concurrency", default=4, show_default=True)
@click.option("--out", "manifest_path", default="genai_manifest.jsonl",
              show_default=True)
def gen_feedback(store_path: str, endpoints_path: str, strategies: str,
                 dry_run: bool, rerun: bool, concurrency: int,
                 manifest_path: str) -> None:
    """Generate model feedback for every program in the active pack."""
    strategy_list = [s.strip() for s in strategies.split(",") if s.strip()]
    if not strategy_list:
        raise click.UsageError("no strategies given")
    try:
        endpoints = genai.load_endpoint_configs(endpoints_path)
    except (ValueError, KeyError) as exc:
        raise click.ClickException(f"bad endpoint config: {exc}")
    with Store(store_path) as store:
        pack = store.active_pack()
        if pack is None:
            raise click.ClickException("store holds no ingested pack; run ingest first")
        results, manifest = genai.batch_generate(
            endpoints, pack, strategy_list,
            store=store, concurrency=concurrency,
            dry_run=dry_run, rerun=rerun,
        )
    genai.write_manifest(manifest, manifest_path)
    by_status: dict[str, int] = {}
    for entry in manifest:
        by_status[entry["status"]] = by_status.get(entry["status"], 0) + 1
    summary = ", ".join(f"{k}={v}" for k, v in sorted(by_status.items()))
    click.echo(f"{len(results)} instances generated ({summary})")
    click.echo(f"manifest written to {manifest_path}")


@main.command()
@store_option
@click.option("--group-by", default="problem,understanding", show_default=True,
              type=click.Choice(GROUP_BY_CHOICES))
@click.option("--format", "fmt", default="table", show_default=True,
              type=click.Choice(("table", "csv")))
@click.option("--out", "out_path", default=None,
              help="Write the report here and render figures alongside.")
def report(store_path: str, group_by: str, fmt: str, out_path: str | None) -> None:
    """Summarize annotations as the aggregate table (plus figures with --out)."""
    with Store(store_path) as store:
        try:
            rows = aggregate(store.feedback_instances(), store.annotations(), group_by)
        except ValueError as exc:
            raise click.ClickException(str(exc))
    document = render_report(rows, fmt)
    if out_path is None:
        click.echo(document, nl=False)
        return
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write(document)
    stem = os.path.splitext(out_path)[0]
    figures = render_figures(rows, stem)
    click.echo(f"report written to {out_path}")
    for figure in figures:
        click.echo(f"figure written to {figure}")


@main.command()
@store_option
@click.option("--annotator-a", required=True)
@click.option("--annotator-b", required=True)
def kappa(store_path: str, annotator_a: str, annotator_b: str) -> None:
    """Inter-rater agreement between two annotators (pooled + per attribute)."""
    with Store(store_path) as store:
        annotations = store.annotations()
    a = [x for x in annotations if x.annotator_id == annotator_a]
    b = [x for x in annotations if x.annotator_id == annotator_b]
    if not a or not b:
        raise click.ClickException("one of the annotators has no annotations")
    shared = {x.feedback_id for x in a} & {x.feedback_id for x in b}
    a = [x for x in a if x.feedback_id in shared]
    b = [x for x in b if x.feedback_id in shared]
    try:
        report = multi_attribute_kappa(a, b)
    except ValueError as exc:
        raise click.ClickException(str(exc))
    click.echo(
        f"pooled: kappa={report.kappa:.3f} ({report.band}), "
        f"p_o={report.observed_agreement:.3f}, p_e={report.chance_agreement:.3f}, "
        f"items={report.n_items}"
    )
    for name in FLAG_NAMES:
        sub = report.per_attribute[name]
        click.echo(f"{name}: kappa={sub.kappa:.3f} ({sub.band})")


@main.command(name="seed-demo")
@store_option
@harness_options
def seed_demo_cmd(store_path: str, wall_ms: int, max_output_bytes: int,
                  workers: int) -> None:
    """Load the fixture pack plus a small synthetic corpus and annotations."""
    with _harness(wall_ms, max_output_bytes, workers) as harness:
        with Store(store_path) as store:
            summary = seed_demo(store, harness)
    click.echo(json.dumps(summary, sort_keys=True))


if __name__ == "__main__":
    main()
