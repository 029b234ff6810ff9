"""Stateful HTTP service over a built workspace.

Conversations, turns, traces and rendered prompts are persisted to a SQLite
store and survive restarts. Turn execution is synchronous; per-conversation
turns are mutually exclusive (409 on a concurrent ask), while distinct
conversations proceed in parallel.
"""

from __future__ import annotations

import json
import sqlite3
import threading
import uuid
from datetime import datetime, timezone
from pathlib import Path

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from .agent import LoopConfig, Orchestrator
from .llm import ProviderConfig, ProviderUnavailable, make_provider
from .pipeline import Workspace

PAGE_SIZE = 50

_SCHEMA = """
CREATE TABLE IF NOT EXISTS conversations (
    id TEXT PRIMARY KEY,
    title TEXT NOT NULL,
    created_at TEXT NOT NULL,
    profile_id TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS turns (
    conversation_id TEXT NOT NULL REFERENCES conversations(id),
    turn_index INTEGER NOT NULL,
    question TEXT NOT NULL,
    answer TEXT,
    trace_id TEXT,
    status TEXT NOT NULL,
    created_at TEXT NOT NULL,
    PRIMARY KEY (conversation_id, turn_index)
);
CREATE TABLE IF NOT EXISTS traces (
    id TEXT PRIMARY KEY,
    body TEXT NOT NULL
);
"""


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


class Store:
    """SQLite persistence with write-ahead journaling; one connection per call."""

    def __init__(self, path: str | Path):
        self.path = str(path)
        with self._connect() as conn:
            conn.executescript(_SCHEMA)

    def _connect(self) -> sqlite3.Connection:
        conn = sqlite3.connect(self.path)
        conn.execute("PRAGMA journal_mode=WAL")
        conn.row_factory = sqlite3.Row
        return conn

    def create_conversation(self, title: str, profile_id: str) -> dict:
        conv_id = uuid.uuid4().hex
        created = _now()
        with self._connect() as conn:
            conn.execute(
                "INSERT INTO conversations VALUES (?, ?, ?, ?)",
                (conv_id, title, created, profile_id),
            )
        return {"id": conv_id, "title": title, "createdAt": created, "profileId": profile_id}

    def list_conversations(self, page: int = 1) -> dict:
        offset = (page - 1) * PAGE_SIZE
        with self._connect() as conn:
            total = conn.execute("SELECT COUNT(*) FROM conversations").fetchone()[0]
            rows = conn.execute(
                "SELECT * FROM conversations ORDER BY created_at DESC, id LIMIT ? OFFSET ?",
                (PAGE_SIZE, offset),
            ).fetchall()
        return {
            "page": page,
            "pageSize": PAGE_SIZE,
            "total": total,
            "conversations": [
                {
                    "id": r["id"],
                    "title": r["title"],
                    "createdAt": r["created_at"],
                    "profileId": r["profile_id"],
                }
                for r in rows
            ],
        }

    def get_conversation(self, conv_id: str) -> dict | None:
        with self._connect() as conn:
            row = conn.execute(
                "SELECT * FROM conversations WHERE id = ?", (conv_id,)
            ).fetchone()
            if row is None:
                return None
            turns = conn.execute(
                "SELECT * FROM turns WHERE conversation_id = ? ORDER BY turn_index",
                (conv_id,),
            ).fetchall()
        return {
            "id": row["id"],
            "title": row["title"],
            "createdAt": row["created_at"],
            "profileId": row["profile_id"],
            "turns": [
                {
                    "turnIndex": t["turn_index"],
                    "question": t["question"],
                    "answer": t["answer"],
                    "traceId": t["trace_id"],
                    "status": t["status"],
                    "createdAt": t["created_at"],
                }
                for t in turns
            ],
        }

    def set_profile(self, conv_id: str, profile_id: str) -> bool:
        with self._connect() as conn:
            cursor = conn.execute(
                "UPDATE conversations SET profile_id = ? WHERE id = ?",
                (profile_id, conv_id),
            )
            return cursor.rowcount > 0

    def next_turn_index(self, conv_id: str) -> int:
        with self._connect() as conn:
            row = conn.execute(
                "SELECT MAX(turn_index) FROM turns WHERE conversation_id = ?",
                (conv_id,),
            ).fetchone()
        return (row[0] or 0) + 1

    def record_turn(
        self, conv_id: str, index: int, question: str, answer: str | None,
        trace: dict | None, status: str,
    ) -> str | None:
        trace_id = uuid.uuid4().hex if trace is not None else None
        with self._connect() as conn:
            if trace is not None:
                conn.execute(
                    "INSERT INTO traces VALUES (?, ?)", (trace_id, json.dumps(trace))
                )
            conn.execute(
                "INSERT INTO turns VALUES (?, ?, ?, ?, ?, ?, ?)",
                (conv_id, index, question, answer, trace_id, status, _now()),
            )
        return trace_id

    def get_trace(self, trace_id: str) -> dict | None:
        with self._connect() as conn:
            row = conn.execute("SELECT body FROM traces WHERE id = ?", (trace_id,)).fetchone()
        return json.loads(row["body"]) if row else None

    def completed_history(self, conv_id: str) -> list[tuple[str, str]]:
        with self._connect() as conn:
            rows = conn.execute(
                "SELECT question, answer FROM turns "
                "WHERE conversation_id = ? AND status = 'completed' ORDER BY turn_index",
                (conv_id,),
            ).fetchall()
        return [(r["question"], r["answer"]) for r in rows]


class QuestionBody(BaseModel):
    question: str


class CreateConversationBody(BaseModel):
    title: str = "New conversation"
    profileId: str | None = None


class ProfileBody(BaseModel):
    profileId: str


def create_app(workspace: Workspace, providers: dict | None = None) -> FastAPI:
    """providers: optional {profileId: Provider} overrides, used by tests."""
    app = FastAPI(title="kgqa")
    store = Store(workspace.conversations_db_path)
    profiles = {p["id"]: p for p in workspace.profiles()}
    if not profiles:
        raise RuntimeError("workspace has no configuration profiles")
    default_profile_id = next(iter(profiles))
    index = workspace.load_index()
    ddl = workspace.ddl()
    db_path = str(workspace.db_path)

    provider_cache: dict[str, object] = dict(providers or {})
    locks: dict[str, threading.Lock] = {}
    locks_guard = threading.Lock()

    def provider_for(profile_id: str):
        if profile_id not in provider_cache:
            config = ProviderConfig.from_dict(profiles[profile_id]["provider"])
            provider_cache[profile_id] = make_provider(config)
        return provider_cache[profile_id]

    def orchestrator_for(profile_id: str) -> Orchestrator:
        profile = profiles[profile_id]
        loop = profile.get("loop", {})
        return Orchestrator(
            provider_for(profile_id),
            db_path,
            index,
            ddl,
            LoopConfig(
                max_rounds_per_tool=loop.get("maxRoundsPerTool", 3),
                k=profile.get("retrieval", {}).get("k", 5),
                branches=frozenset(profile.get("retrievalBranches", ["sql", "text"])),
            ),
        )

    def conversation_lock(conv_id: str) -> threading.Lock:
        with locks_guard:
            return locks.setdefault(conv_id, threading.Lock())

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.get("/profiles")
    def list_profiles():
        return list(profiles.values())

    @app.post("/conversations", status_code=201)
    def create_conversation(body: CreateConversationBody):
        profile_id = body.profileId or default_profile_id
        if profile_id not in profiles:
            raise HTTPException(404, f"unknown profile {profile_id!r}")
        return store.create_conversation(body.title, profile_id)

    @app.get("/conversations")
    def list_conversations(page: int = 1):
        return store.list_conversations(page)

    @app.get("/conversations/{conv_id}")
    def get_conversation(conv_id: str):
        conversation = store.get_conversation(conv_id)
        if conversation is None:
            raise HTTPException(404, "unknown conversation")
        return conversation

    @app.post("/conversations/{conv_id}/profile")
    def switch_profile(conv_id: str, body: ProfileBody):
        if body.profileId not in profiles:
            raise HTTPException(404, f"unknown profile {body.profileId!r}")
        if not store.set_profile(conv_id, body.profileId):
            raise HTTPException(404, "unknown conversation")
        return {"id": conv_id, "profileId": body.profileId}

    @app.post("/conversations/{conv_id}/messages")
    def post_message(conv_id: str, body: QuestionBody):
        conversation = store.get_conversation(conv_id)
        if conversation is None:
            raise HTTPException(404, "unknown conversation")
        lock = conversation_lock(conv_id)
        if not lock.acquire(blocking=False):
            raise HTTPException(409, "a turn is already in progress on this conversation")
        try:
            history = store.completed_history(conv_id)
            turn_index = store.next_turn_index(conv_id)
            orchestrator = orchestrator_for(conversation["profileId"])
            turn_id = f"{conv_id}:{turn_index}"
            try:
                trace = orchestrator.run_turn(
                    history, body.question, turn_id=turn_id, conversation_id=conv_id
                )
            except ProviderUnavailable as exc:
                store.record_turn(
                    conv_id, turn_index, body.question, None,
                    {"turnId": turn_id, "status": "failed", "error": str(exc)},
                    "failed",
                )
                raise HTTPException(503, f"provider unavailable: {exc}")
            trace_dict = trace.to_dict()
            trace_dict["profileId"] = conversation["profileId"]
            trace_id = store.record_turn(
                conv_id, turn_index, body.question, trace.final_answer,
                trace_dict, "completed",
            )
            return {
                "turnIndex": turn_index,
                "question": body.question,
                "answer": trace.final_answer,
                "traceId": trace_id,
            }
        finally:
            lock.release()

    @app.get("/traces/{trace_id}")
    def get_trace(trace_id: str):
        trace = store.get_trace(trace_id)
        if trace is None:
            raise HTTPException(404, "unknown trace")
        return trace

    return app


def serve(workspace: Workspace, host: str = "127.0.0.1", port: int = 8000):
    """Run the HTTP service; port 0 binds an ephemeral port and prints it."""
    import socket

    import uvicorn

    app = create_app(workspace)
    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    sock.bind((host, port))
    bound_port = sock.getsockname()[1]
    print(f"listening on http://{host}:{bound_port}", flush=True)
    config = uvicorn.Config(app, log_level="warning")
    server = uvicorn.Server(config)
    server.run(sockets=[sock])
