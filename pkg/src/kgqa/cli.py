"""Command-line entry points: ingest, serve, eval, verbalize, induce."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .induction import (
    InductionConfig,
    InductionError,
    RenameConfig,
    induce_schema,
    schema_report,
)
from .llm import ProviderConfig, make_provider
from .pipeline import Workspace, build_workspace
from .rdf import MalformedLine, group_capsules, parse_ntriples
from .retrieval import RetrievalConfig
from .verbalize import CasingConfig, verbalize_capsules


def _load_capsules(kg_path: str):
    return group_capsules(parse_ntriples(Path(kg_path).read_bytes()))


def _fail(message: str, code: int = 1):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _casing(lowercase: bool, acronyms: str | None) -> CasingConfig:
    names = frozenset(a.strip().lower() for a in acronyms.split(",")) if acronyms else frozenset()
    return CasingConfig(acronyms=names, lowercase=lowercase)


@click.group()
def main():
    """Conversational QA over RDF knowledge graphs."""


@main.command()
@click.option("--kg", "kg_path", required=True, type=click.Path(exists=True), help="NTriples input file")
@click.option("--out", "out_dir", required=True, type=click.Path(), help="workspace output directory")
@click.option("--renames", "rename_path", type=click.Path(exists=True), help="rename/comment overrides (JSON)")
@click.option("--docs", "doc_paths", multiple=True, type=click.Path(exists=True), help="external text documents")
@click.option("--profiles", "profiles_path", type=click.Path(exists=True), help="configuration profiles (JSON)")
@click.option("--lowercase", is_flag=True, help="lowercase all verbalized text")
@click.option("--acronyms", help="comma-separated acronym tokens to uppercase in labels")
@click.option("--pick-first-type", is_flag=True, help="resolve multi-typed entities to the lexicographically first type")
@click.option("--json", "as_json", is_flag=True, help="machine-readable summary on stdout")
def ingest(kg_path, out_dir, rename_path, doc_paths, profiles_path, lowercase, acronyms, pick_first_type, as_json):
    """Build a workspace: DDL, populated DB, passages, index, schema report."""
    try:
        renames = RenameConfig.from_file(rename_path) if rename_path else None
        documents = [
            (Path(p).stem, Path(p).read_text(encoding="utf-8")) for p in doc_paths
        ]
        profiles = (
            json.loads(Path(profiles_path).read_text(encoding="utf-8"))
            if profiles_path
            else None
        )
        ws, schema = build_workspace(
            kg_path,
            out_dir,
            rename_config=renames,
            documents=documents or None,
            casing=_casing(lowercase, acronyms),
            induction_config=InductionConfig(pick_first_type=pick_first_type),
            profiles=profiles,
        )
    except (MalformedLine, InductionError, json.JSONDecodeError) as exc:
        _fail(str(exc))
    summary = {
        "workspace": str(ws.root),
        "entityTables": len(schema.entity_tables()),
        "tables": len(schema.tables),
        "passages": sum(1 for _ in open(ws.passages_path, encoding="utf-8")),
    }
    if as_json:
        click.echo(json.dumps(summary))
    else:
        click.echo(
            f"workspace {ws.root}: {summary['entityTables']} entity tables, "
            f"{summary['tables']} tables total, {summary['passages']} passages"
        )


@main.command()
@click.option("--kg", "kg_path", required=True, type=click.Path(exists=True))
@click.option("--lowercase", is_flag=True)
@click.option("--acronyms", help="comma-separated acronym tokens")
@click.option("--json", "as_json", is_flag=True)
def verbalize(kg_path, lowercase, acronyms, as_json):
    """Verbalize a KG file to passages on stdout (debugging aid)."""
    try:
        capsules = _load_capsules(kg_path)
        passages = verbalize_capsules(capsules, _casing(lowercase, acronyms))
    except (MalformedLine, InductionError) as exc:
        _fail(str(exc))
    for p in passages:
        click.echo(json.dumps(p.to_dict(), ensure_ascii=False) if as_json else f"{p.id}: {p.text}")


@main.command()
@click.option("--kg", "kg_path", required=True, type=click.Path(exists=True))
@click.option("--renames", "rename_path", type=click.Path(exists=True))
@click.option("--pick-first-type", is_flag=True)
@click.option("--json", "as_json", is_flag=True)
def induce(kg_path, rename_path, pick_first_type, as_json):
    """Induce a schema from a KG file and print the DDL or schema report."""
    try:
        renames = RenameConfig.from_file(rename_path) if rename_path else None
        schema = induce_schema(
            _load_capsules(kg_path),
            renames,
            InductionConfig(pick_first_type=pick_first_type),
        )
    except (MalformedLine, InductionError, json.JSONDecodeError) as exc:
        _fail(str(exc))
    click.echo(json.dumps(schema_report(schema), indent=2) if as_json else schema.generated_ddl, nl=False)
    click.echo()


@main.command()
@click.option("--workspace", "ws_dir", required=True, type=click.Path(exists=True))
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000, type=int, help="0 binds an ephemeral port")
def serve(ws_dir, host, port):
    """Start the conversational HTTP service on a built workspace."""
    from .service import serve as run_service

    ws = Workspace(Path(ws_dir))
    for path in (ws.db_path, ws.index_path, ws.profiles_path):
        if not path.exists():
            _fail(f"workspace is missing {path.name}; run ingest first")
    run_service(ws, host=host, port=port)


@main.command(name="eval")
@click.option("--workspace", "ws_dir", required=True, type=click.Path(exists=True))
@click.option("--benchmark", "benchmark_path", required=True, type=click.Path(exists=True))
@click.option("--configs", default="sql,text,both", help="comma-separated: sql,text,both")
@click.option("--report", "report_path", type=click.Path(), help="write the JSON report here")
@click.option("--provider", "provider_path", type=click.Path(exists=True), help="provider config JSON (defaults to the workspace's first profile)")
@click.option("--max-rounds", default=3, type=int)
@click.option("--k", default=5, type=int)
@click.option("--deterministic", is_flag=True, help="omit wall-clock timings from the report")
def eval_command(ws_dir, benchmark_path, configs, report_path, provider_path, max_rounds, k, deterministic):
    """Run a benchmark file against one or more pipeline configurations."""
    from .evalrun import load_benchmark, report_json, report_table, run_benchmark

    ws = Workspace(Path(ws_dir))
    for path in (ws.db_path, ws.index_path):
        if not path.exists():
            _fail(f"workspace is missing {path.name}; run ingest first")
    if provider_path:
        provider_config = ProviderConfig.from_dict(
            json.loads(Path(provider_path).read_text(encoding="utf-8"))
        )
    else:
        provider_config = ProviderConfig.from_dict(ws.profiles()[0]["provider"])
    config_names = [c.strip() for c in configs.split(",") if c.strip()]
    try:
        items = load_benchmark(benchmark_path)
        report = run_benchmark(
            ws,
            items,
            config_names,
            provider_factory=lambda: make_provider(provider_config),
            max_rounds_per_tool=max_rounds,
            k=k,
            include_timings=not deterministic,
        )
    except (ValueError, KeyError) as exc:
        _fail(str(exc))
    click.echo(report_table(report), nl=False)
    if report_path:
        Path(report_path).write_text(report_json(report), encoding="utf-8")
        click.echo(f"report written to {report_path}")


if __name__ == "__main__":
    main()
