"""The per-turn agent loop.

One turn: rewrite the conversational question into intent-explicit SQL and
NL forms, then iterate — a decision LLM call sees the question, history and
all accumulated outcomes (error messages verbatim) and picks the next tool
or finish. Finishing is refused until every enabled branch has run at least
once; each tool is capped at a configurable number of rounds. Finally all
results are fused into a cited answer by a second LLM call.
"""

from __future__ import annotations

import re
import time
from dataclasses import dataclass, field
from pathlib import Path

from .llm import ChatRequest, Message, Provider
from .retrieval import Index, ScoredPassage
from .sqltool import SqlError, SqlLimits, SqlResult, execute_readonly, strip_fences

PROMPT_DIR = Path(__file__).parent / "prompts"

TOOL_SQL = "sql_query"
TOOL_TEXT = "text_search"


@dataclass
class LoopConfig:
    max_rounds_per_tool: int = 3
    k: int = 5
    branches: frozenset[str] = frozenset({"sql", "text"})

    def __post_init__(self):
        if self.max_rounds_per_tool < 1:
            raise ValueError("max_rounds_per_tool must be >= 1")
        if not self.branches:
            raise ValueError("at least one retrieval branch must be enabled")


@dataclass
class ToolCall:
    round: int
    tool: str
    input: str
    outcome: SqlResult | SqlError | list[ScoredPassage]
    elapsed: float

    def outcome_dict(self) -> dict:
        out = self.outcome
        if isinstance(out, SqlResult):
            return {
                "type": "sql_result",
                "columns": out.columns,
                "rows": [list(r) for r in out.rows],
                "rowCount": out.row_count,
                "truncated": out.truncated,
            }
        if isinstance(out, SqlError):
            return {"type": "sql_error", "kind": out.kind, "message": out.message}
        return {
            "type": "passages",
            "results": [
                {"id": sp.passage.id, "score": sp.score, "text": sp.passage.text}
                for sp in out
            ],
        }


@dataclass
class Source:
    number: int
    kind: str  # "sql" | "passage"
    label: str
    content: str
    passage_id: str | None = None
    score: float | None = None


@dataclass
class RenderedPrompt:
    name: str
    prompt: str
    response: str


@dataclass
class AgentTrace:
    turn_id: str
    original_question: str
    explicit_sql_question: str = ""
    explicit_nl_question: str = ""
    tool_calls: list[ToolCall] = field(default_factory=list)
    sources: list[Source] = field(default_factory=list)
    final_answer: str = ""
    step_timings: dict[str, float] = field(default_factory=dict)
    rendered_prompts: list[RenderedPrompt] = field(default_factory=list)
    citation_warnings: list[str] = field(default_factory=list)
    status: str = "completed"  # completed | failed

    def to_dict(self) -> dict:
        return {
            "turnId": self.turn_id,
            "originalQuestion": self.original_question,
            "explicitSqlQuestion": self.explicit_sql_question,
            "explicitNlQuestion": self.explicit_nl_question,
            "toolCalls": [
                {
                    "round": c.round,
                    "tool": c.tool,
                    "input": c.input,
                    "outcome": c.outcome_dict(),
                    "elapsed": c.elapsed,
                }
                for c in self.tool_calls
            ],
            "sources": [
                {
                    "number": s.number,
                    "kind": s.kind,
                    "label": s.label,
                    "content": s.content,
                    "passageId": s.passage_id,
                    "score": s.score,
                }
                for s in self.sources
            ],
            "finalAnswer": self.final_answer,
            "stepTimings": self.step_timings,
            "renderedPrompts": [
                {"name": p.name, "prompt": p.prompt, "response": p.response}
                for p in self.rendered_prompts
            ],
            "citationWarnings": self.citation_warnings,
            "status": self.status,
        }


_PLACEHOLDER_RE = re.compile(r"\{(history|question|ddl|sources|errors)\}")


def render_template(template: str, values: dict[str, str]) -> str:
    return _PLACEHOLDER_RE.sub(lambda m: values.get(m.group(1), ""), template)


def render_history(history: list[tuple[str, str]]) -> str:
    if not history:
        return "(first turn)"
    return "\n".join(f"Q: {q}\nA: {a}" for q, a in history)


_DECISION_RE = re.compile(r"^\s*TOOL:\s*(sql|text|finish)\s*$", re.IGNORECASE | re.MULTILINE)
_CITATION_RE = re.compile(r"\[(\d+)\]")


class Orchestrator:
    def __init__(
        self,
        provider: Provider,
        db_path: str,
        index: Index,
        ddl: str,
        config: LoopConfig | None = None,
        sql_limits: SqlLimits | None = None,
        prompt_dir: Path | str | None = None,
    ):
        self.provider = provider
        self.db_path = db_path
        self.index = index
        self.ddl = ddl
        self.config = config or LoopConfig()
        self.sql_limits = sql_limits or SqlLimits()
        prompt_dir = Path(prompt_dir) if prompt_dir else PROMPT_DIR
        self.templates = {
            name: (prompt_dir / f"{name}.txt").read_text(encoding="utf-8")
            for name in ("rewrite_sql", "rewrite_nl", "decision", "answer")
        }

    def _call(
        self,
        trace: AgentTrace,
        name: str,
        values: dict[str, str],
        conversation_id: str,
    ) -> str:
        prompt = render_template(self.templates[name], values)
        request = ChatRequest(messages=[Message("user", prompt)])
        completion = self.provider.complete(request, conversation_id=conversation_id)
        trace.rendered_prompts.append(RenderedPrompt(name, prompt, completion.text))
        return completion.text

    def run_turn(
        self,
        history: list[tuple[str, str]],
        question: str,
        turn_id: str = "turn",
        conversation_id: str = "default",
    ) -> AgentTrace:
        trace = AgentTrace(turn_id=turn_id, original_question=question)
        turn_start = time.perf_counter()
        timings = {
            "rewrite": 0.0,
            "toolSelection": 0.0,
            "sqlExec": 0.0,
            "textSearch": 0.0,
            "answer": 0.0,
        }
        cfg = self.config
        history_text = render_history(history)
        base = {"history": history_text, "question": question, "ddl": self.ddl}

        try:
            started = time.perf_counter()
            if "sql" in cfg.branches:
                trace.explicit_sql_question = strip_fences(
                    self._call(trace, "rewrite_sql", base, conversation_id)
                )
            if "text" in cfg.branches:
                trace.explicit_nl_question = self._call(
                    trace, "rewrite_nl", base, conversation_id
                ).strip()
            timings["rewrite"] = time.perf_counter() - started

            self._loop(trace, base, timings, conversation_id)

            started = time.perf_counter()
            sources_text = self._render_sources(trace.sources)
            answer = self._call(
                trace, "answer", {**base, "sources": sources_text}, conversation_id
            )
            timings["answer"] = time.perf_counter() - started
            trace.final_answer = answer
            self._validate_citations(trace)
        except Exception:
            trace.status = "failed"
            trace.step_timings = timings
            trace.step_timings["total"] = time.perf_counter() - turn_start
            raise
        trace.step_timings = timings
        trace.step_timings["total"] = time.perf_counter() - turn_start
        return trace

    # --- the iterative tool loop -------------------------------------------

    def _loop(self, trace, base, timings, conversation_id):
        cfg = self.config
        used = {TOOL_SQL: 0, TOOL_TEXT: 0}
        enabled = {
            TOOL_SQL: "sql" in cfg.branches,
            TOOL_TEXT: "text" in cfg.branches,
        }
        feedback: list[str] = []  # error messages + constraint notes, verbatim
        finish_refusals = 0
        max_iterations = 4 * cfg.max_rounds_per_tool + 4

        def branches_satisfied() -> bool:
            return all(used[t] >= 1 for t, on in enabled.items() if on)

        def exhausted(tool: str) -> bool:
            return used[tool] >= cfg.max_rounds_per_tool

        def run_missing_branches():
            if enabled[TOOL_SQL] and used[TOOL_SQL] == 0 and not exhausted(TOOL_SQL):
                self._run_tool(trace, TOOL_SQL, trace.explicit_sql_question, used, feedback, timings)
            if enabled[TOOL_TEXT] and used[TOOL_TEXT] == 0 and not exhausted(TOOL_TEXT):
                self._run_tool(trace, TOOL_TEXT, trace.explicit_nl_question, used, feedback, timings)

        for _ in range(max_iterations):
            if all(exhausted(t) for t, on in enabled.items() if on):
                break  # both branches used up: force-finish
            decision = self._decide(trace, base, feedback, timings, conversation_id)
            if decision is None:
                decision = ("finish", "")
            tool_word, payload = decision
            if tool_word == "finish":
                if branches_satisfied():
                    return
                finish_refusals += 1
                feedback.append(
                    "Constraint: you must use both the sql and text tools at "
                    "least once before finishing. Finish was rejected."
                )
                if finish_refusals > 2:
                    break  # provider will not cooperate; invoke missing branches
                continue
            tool = TOOL_SQL if tool_word == "sql" else TOOL_TEXT
            if not enabled[tool]:
                feedback.append(
                    f"Constraint: the {tool_word} tool is disabled in this configuration."
                )
                continue
            if exhausted(tool):
                feedback.append(
                    f"Constraint: the {tool_word} tool has reached its round limit "
                    f"({cfg.max_rounds_per_tool}); choose another action."
                )
                continue
            if not payload:
                payload = (
                    trace.explicit_sql_question if tool == TOOL_SQL else trace.explicit_nl_question
                )
            self._run_tool(trace, tool, payload, used, feedback, timings)
        run_missing_branches()

    def _decide(self, trace, base, feedback, timings, conversation_id):
        values = {
            **base,
            "sources": self._render_outcomes(trace.tool_calls) or "(nothing yet)",
            "errors": "\n".join(feedback) or "(none)",
        }
        started = time.perf_counter()
        try:
            for _ in range(2):  # unparseable decisions are retried once
                text = self._call(trace, "decision", values, conversation_id)
                match = _DECISION_RE.search(text)
                if match:
                    tool_word = match.group(1).lower()
                    payload = text[match.end() :].strip()
                    return tool_word, strip_fences(payload)
            return None  # treated as a finish request
        finally:
            timings["toolSelection"] += time.perf_counter() - started

    def _run_tool(self, trace, tool, payload, used, feedback, timings):
        used[tool] += 1
        started = time.perf_counter()
        if tool == TOOL_SQL:
            outcome = execute_readonly(self.db_path, payload, self.sql_limits)
            elapsed = time.perf_counter() - started
            timings["sqlExec"] += elapsed
            if isinstance(outcome, SqlError):
                feedback.append(outcome.message)
        else:
            outcome = self.index.search(payload, self.config.k)
            elapsed = time.perf_counter() - started
            timings["textSearch"] += elapsed
        trace.tool_calls.append(
            ToolCall(round=used[tool], tool=tool, input=payload, outcome=outcome, elapsed=elapsed)
        )
        self._rebuild_sources(trace)

    # --- sources and citations ----------------------------------------------

    def _rebuild_sources(self, trace: AgentTrace):
        """SQL results first, then passages deduplicated by id, max score kept."""
        sources: list[Source] = []
        for call in trace.tool_calls:
            if call.tool == TOOL_SQL and isinstance(call.outcome, SqlResult):
                sources.append(
                    Source(
                        number=0,
                        kind="sql",
                        label=f"SQL result (round {call.round}): {call.input}",
                        content=call.outcome.render(),
                    )
                )
        best: dict[str, ScoredPassage] = {}
        for call in trace.tool_calls:
            if call.tool == TOOL_TEXT:
                for sp in call.outcome:
                    kept = best.get(sp.passage.id)
                    if kept is None or sp.score > kept.score:
                        best[sp.passage.id] = sp
        for sp in sorted(best.values(), key=lambda s: (-s.score, s.passage.id)):
            sources.append(
                Source(
                    number=0,
                    kind="passage",
                    label=f"Verbalization: {sp.passage.id}",
                    content=sp.passage.text,
                    passage_id=sp.passage.id,
                    score=sp.score,
                )
            )
        for i, source in enumerate(sources, start=1):
            source.number = i
        trace.sources = sources

    def _render_sources(self, sources: list[Source]) -> str:
        if not sources:
            return "(no sources)"
        blocks = [f"[{s.number}] {s.label}\n{s.content}" for s in sources]
        return "\n\n".join(blocks)

    def _render_outcomes(self, calls: list[ToolCall]) -> str:
        blocks = []
        for call in calls:
            if isinstance(call.outcome, SqlResult):
                blocks.append(
                    f"sql round {call.round}: {call.input}\n{call.outcome.render()}"
                )
            elif isinstance(call.outcome, SqlError):
                blocks.append(
                    f"sql round {call.round}: {call.input}\nerror: {call.outcome.message}"
                )
            else:
                hits = "\n".join(
                    f"- {sp.passage.id} ({sp.score:.4f}): {sp.passage.text}"
                    for sp in call.outcome
                )
                blocks.append(f"text round {call.round}: {call.input}\n{hits}")
        return "\n\n".join(blocks)

    def _validate_citations(self, trace: AgentTrace):
        valid = {s.number for s in trace.sources}
        for match in _CITATION_RE.finditer(trace.final_answer):
            number = int(match.group(1))
            if number not in valid:
                trace.citation_warnings.append(
                    f"citation [{number}] does not match any of the {len(valid)} sources"
                )
