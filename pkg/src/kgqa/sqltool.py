"""Read-only SQL execution against the induced database.

LLM-generated SQL is untrusted: only a single SELECT (or WITH ... SELECT)
statement is accepted, writes are rejected before execution, an authorizer
blocks anything that slips through, and long-running queries are interrupted
by a timeout. Errors come back as values for the agent's feedback loop,
never as exceptions.
"""

from __future__ import annotations

import re
import sqlite3
import time
from dataclasses import dataclass, field


@dataclass
class SqlResult:
    columns: list[str]
    rows: list[tuple]
    row_count: int
    elapsed: float
    truncated: bool = False

    def render(self) -> str:
        """Aligned text table for prompt embedding."""
        headers = self.columns or []
        body = [[_fmt(c) for c in row] for row in self.rows]
        widths = [
            max([len(h)] + [len(r[i]) for r in body]) for i, h in enumerate(headers)
        ]
        lines = [
            " | ".join(h.ljust(w) for h, w in zip(headers, widths)),
            "-+-".join("-" * w for w in widths),
        ]
        for row in body:
            lines.append(" | ".join(c.ljust(w) for c, w in zip(row, widths)))
        if self.truncated:
            lines.append(f"... truncated at {self.row_count} rows")
        if not self.rows:
            lines.append("(no rows)")
        return "\n".join(lines)


def _fmt(cell) -> str:
    if cell is None:
        return "NULL"
    if isinstance(cell, float) and cell == int(cell):
        return str(int(cell))
    return str(cell)


@dataclass
class SqlError:
    kind: str  # syntax_error | unknown_identifier | timeout | write_rejected
    message: str


@dataclass
class SqlLimits:
    timeout: float = 5.0  # seconds
    max_rows: int = 100


_WRITE_RE = re.compile(
    r"^\s*(INSERT|UPDATE|DELETE|DROP|CREATE|ALTER|REPLACE|ATTACH|DETACH|PRAGMA|VACUUM|REINDEX|BEGIN|COMMIT|ROLLBACK)\b",
    re.IGNORECASE,
)
_SELECT_RE = re.compile(r"^\s*(SELECT|WITH)\b", re.IGNORECASE)


def strip_fences(sql: str) -> str:
    sql = sql.strip()
    if sql.startswith("```"):
        sql = re.sub(r"^```[a-zA-Z]*\n?", "", sql)
        sql = re.sub(r"\n?```$", "", sql)
    return sql.strip()


def _single_statement(sql: str) -> bool:
    # anything beyond one complete statement means stacked statements
    stripped = sql.strip()
    if not stripped.endswith(";"):
        stripped += ";"
    first_end = None
    depth = 0
    in_string = None
    for i, ch in enumerate(stripped):
        if in_string:
            if ch == in_string:
                in_string = None
            continue
        if ch in ("'", '"'):
            in_string = ch
        elif ch == ";":
            first_end = i
            break
    if first_end is None:
        return True
    return stripped[first_end + 1 :].strip() == ""


def execute_readonly(
    db_path: str, sql: str, limits: SqlLimits | None = None
) -> SqlResult | SqlError:
    """Run one SELECT against the database, read-only, bounded in time and rows."""
    limits = limits or SqlLimits()
    sql = strip_fences(sql)
    if not sql.strip():
        return SqlError("syntax_error", "empty SQL statement")
    if _WRITE_RE.match(sql) or not _SELECT_RE.match(sql):
        return SqlError(
            "write_rejected",
            "Only a single SELECT statement is allowed; write/DDL statements are rejected.",
        )
    if not _single_statement(sql):
        return SqlError(
            "write_rejected", "Stacked statements are not allowed; send one SELECT."
        )

    conn = sqlite3.connect(f"file:{db_path}?mode=ro", uri=True)
    try:
        conn.set_authorizer(_readonly_authorizer)
        deadline = time.monotonic() + limits.timeout
        conn.set_progress_handler(lambda: 1 if time.monotonic() > deadline else 0, 1000)
        start = time.perf_counter()
        try:
            cursor = conn.execute(sql)
            rows = cursor.fetchmany(limits.max_rows + 1)
        except sqlite3.OperationalError as exc:
            message = str(exc)
            if "interrupted" in message:
                return SqlError("timeout", f"query exceeded {limits.timeout}s timeout")
            kind = (
                "unknown_identifier"
                if "no such" in message or "ambiguous" in message
                else "syntax_error"
            )
            return SqlError(kind, message)
        except sqlite3.DatabaseError as exc:
            return SqlError("syntax_error", str(exc))
        elapsed = time.perf_counter() - start
        truncated = len(rows) > limits.max_rows
        rows = rows[: limits.max_rows]
        columns = [d[0] for d in cursor.description] if cursor.description else []
        return SqlResult(
            columns=columns,
            rows=[tuple(r) for r in rows],
            row_count=len(rows),
            elapsed=elapsed,
            truncated=truncated,
        )
    finally:
        conn.close()


def _readonly_authorizer(action, *args):
    allowed = (
        sqlite3.SQLITE_SELECT,
        sqlite3.SQLITE_READ,
        sqlite3.SQLITE_FUNCTION,
        getattr(sqlite3, "SQLITE_RECURSIVE", -1),
    )
    if action in allowed:
        return sqlite3.SQLITE_OK
    return sqlite3.SQLITE_DENY
