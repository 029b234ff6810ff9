"""Offline preprocessing: KG file in, inspectable workspace out.

Workspace layout: ddl.sql, kg.db, passages.jsonl, schema-report.json,
index/index.json, profiles.json. The service and the evaluation harness run
against a built workspace; the induced database and index are read-only at
serve time.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .induction import (
    InducedSchema,
    InductionConfig,
    RenameConfig,
    induce_schema,
    insert_rows,
    schema_report,
)
from .rdf import group_capsules, parse_ntriples
from .retrieval import (
    Index,
    RetrievalConfig,
    build_index,
    ingest_documents,
    load_index,
    load_passages,
    save_index,
    save_passages,
)
from .verbalize import CasingConfig, verbalize_capsules

DEFAULT_PROFILES = [
    {
        "id": "default",
        "name": "SQL + text, local model server",
        "retrievalBranches": ["sql", "text"],
        "provider": {
            "kind": "local_server",
            "endpoint": "http://localhost:11434/v1",
            "model": "llama3.3",
        },
        "loop": {"maxRoundsPerTool": 3, "k": 5},
        "retrieval": {"k": 5, "scorer": "lexical"},
    }
]


@dataclass
class Workspace:
    root: Path

    @property
    def ddl_path(self) -> Path:
        return self.root / "ddl.sql"

    @property
    def db_path(self) -> Path:
        return self.root / "kg.db"

    @property
    def passages_path(self) -> Path:
        return self.root / "passages.jsonl"

    @property
    def report_path(self) -> Path:
        return self.root / "schema-report.json"

    @property
    def index_path(self) -> Path:
        return self.root / "index" / "index.json"

    @property
    def profiles_path(self) -> Path:
        return self.root / "profiles.json"

    @property
    def conversations_db_path(self) -> Path:
        return self.root / "conversations.db"

    def ddl(self) -> str:
        return self.ddl_path.read_text(encoding="utf-8")

    def load_index(self) -> Index:
        return load_index(self.index_path)

    def load_passages(self):
        return load_passages(self.passages_path)

    def profiles(self) -> list[dict]:
        return json.loads(self.profiles_path.read_text(encoding="utf-8"))


def build_workspace(
    kg_path: str | Path,
    out_dir: str | Path,
    rename_config: RenameConfig | None = None,
    documents: list[tuple[str, str]] | None = None,
    casing: CasingConfig | None = None,
    induction_config: InductionConfig | None = None,
    retrieval_config: RetrievalConfig | None = None,
    profiles: list[dict] | None = None,
) -> tuple[Workspace, InducedSchema]:
    """Run the full offline stage: parse, induce, populate, verbalize, index."""
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    (root / "index").mkdir(exist_ok=True)
    ws = Workspace(root)

    triples = parse_ntriples(Path(kg_path).read_bytes())
    capsules = group_capsules(triples)

    schema = induce_schema(capsules, rename_config, induction_config)
    ws.ddl_path.write_text(schema.generated_ddl, encoding="utf-8")
    if ws.db_path.exists():
        ws.db_path.unlink()
    db = insert_rows(capsules, schema, str(ws.db_path), induction_config)
    db.close()
    ws.report_path.write_text(
        json.dumps(schema_report(schema), indent=2, sort_keys=True), encoding="utf-8"
    )

    passages = verbalize_capsules(capsules, casing, induction_config)
    if documents:
        passages = ingest_documents(passages, documents)
    save_passages(passages, ws.passages_path)

    index = build_index(passages, retrieval_config or RetrievalConfig())
    save_index(index, ws.index_path)

    if not ws.profiles_path.exists():
        ws.profiles_path.write_text(
            json.dumps(profiles or DEFAULT_PROFILES, indent=2), encoding="utf-8"
        )
    elif profiles:
        ws.profiles_path.write_text(json.dumps(profiles, indent=2), encoding="utf-8")
    return ws, schema
