"""Benchmark runner: replay conversations against selectable configurations.

Question sets come in three intent categories (lookup, complex, abstract).
Each turn is replayed with the system's own prior answers as history and
scored by deterministic matchers, optionally plus gold-SQL result-multiset
equivalence, replacing human judgment.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .agent import LoopConfig, Orchestrator
from .llm import Provider
from .pipeline import Workspace
from .sqltool import SqlLimits, SqlResult, execute_readonly

CATEGORIES = ("lookup", "complex", "abstract")
CONFIG_BRANCHES = {
    "sql": frozenset({"sql"}),
    "text": frozenset({"text"}),
    "both": frozenset({"sql", "text"}),
}


@dataclass
class Matcher:
    kind: str  # contains | regex | number
    value: str | float
    tolerance: float = 0.0

    @staticmethod
    def from_spec(spec) -> "Matcher":
        if isinstance(spec, str):
            return Matcher("contains", spec)
        kind = spec["kind"]
        return Matcher(kind, spec["value"], spec.get("tolerance", 0.0))

    def matches(self, answer: str) -> bool:
        if self.kind == "contains":
            return str(self.value).lower() in answer.lower()
        if self.kind == "regex":
            return re.search(str(self.value), answer) is not None
        if self.kind == "number":
            target = float(self.value)
            for token in re.findall(r"-?\d+(?:\.\d+)?", answer.replace(",", "")):
                if abs(float(token) - target) <= self.tolerance:
                    return True
            return False
        raise ValueError(f"unknown matcher kind {self.kind!r}")


@dataclass
class BenchmarkItem:
    conversation_id: str
    turn_index: int
    question: str
    category: str
    matchers: list[Matcher] = field(default_factory=list)
    gold_sql: str | None = None

    @staticmethod
    def from_dict(data: dict) -> "BenchmarkItem":
        category = data["category"]
        if category not in CATEGORIES:
            raise ValueError(f"unknown category {category!r}")
        gold = data.get("gold", {})
        return BenchmarkItem(
            conversation_id=data["conversationId"],
            turn_index=data["turnIndex"],
            question=data["question"],
            category=category,
            matchers=[Matcher.from_spec(m) for m in gold.get("answerMatchers", [])],
            gold_sql=gold.get("goldSql"),
        )


def load_benchmark(path: str | Path) -> list[BenchmarkItem]:
    items = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                items.append(BenchmarkItem.from_dict(json.loads(line)))
    return items


def _result_multiset(result: SqlResult) -> Counter:
    return Counter(tuple(row) for row in result.rows)


def _sql_matches_gold(db_path: str, trace, gold_sql: str) -> bool:
    gold = execute_readonly(db_path, gold_sql, SqlLimits())
    if not isinstance(gold, SqlResult):
        raise ValueError(f"gold SQL failed: {gold.message}")
    executed = [
        c.outcome
        for c in trace.tool_calls
        if c.tool == "sql_query" and isinstance(c.outcome, SqlResult)
    ]
    if not executed:
        return False
    return _result_multiset(executed[-1]) == _result_multiset(gold)


def run_benchmark(
    workspace: Workspace,
    items: list[BenchmarkItem],
    configurations: list[str],
    provider_factory: Callable[[], Provider],
    max_rounds_per_tool: int = 3,
    k: int = 5,
    include_timings: bool = True,
) -> dict:
    """Replay every conversation under each configuration and score it.

    provider_factory must return a fresh provider per configuration so that
    scripted turn counters restart. Individual turn failures are recorded,
    never abort the run.
    """
    index = workspace.load_index()
    ddl = workspace.ddl()
    db_path = str(workspace.db_path)

    conversations: dict[str, list[BenchmarkItem]] = {}
    for item in items:
        conversations.setdefault(item.conversation_id, []).append(item)
    for turns in conversations.values():
        turns.sort(key=lambda i: i.turn_index)

    report: dict = {"configurations": {}}
    timings: dict[str, dict] = {}
    for config_name in configurations:
        branches = CONFIG_BRANCHES[config_name]
        provider = provider_factory()
        orchestrator = Orchestrator(
            provider,
            db_path,
            index,
            ddl,
            LoopConfig(max_rounds_per_tool=max_rounds_per_tool, k=k, branches=branches),
        )
        turn_records = []
        step_sums: dict[str, float] = {}
        evaluated = 0
        for conv_id in sorted(conversations):
            history: list[tuple[str, str]] = []
            for item in conversations[conv_id]:
                record = {
                    "conversationId": conv_id,
                    "turnIndex": item.turn_index,
                    "category": item.category,
                }
                try:
                    trace = orchestrator.run_turn(
                        history,
                        item.question,
                        turn_id=f"{config_name}:{conv_id}:{item.turn_index}",
                        conversation_id=f"{config_name}:{conv_id}",
                    )
                except Exception as exc:
                    record.update(correct=False, error=str(exc), answer="")
                    turn_records.append(record)
                    history.append((item.question, ""))
                    continue
                answer = trace.final_answer
                correct = all(m.matches(answer) for m in item.matchers)
                if correct and item.gold_sql:
                    correct = _sql_matches_gold(db_path, trace, item.gold_sql)
                record.update(correct=correct, answer=answer)
                turn_records.append(record)
                history.append((item.question, answer))
                evaluated += 1
                for step, value in trace.step_timings.items():
                    step_sums[step] = step_sums.get(step, 0.0) + value

        per_category: dict[str, dict] = {}
        for category in CATEGORIES:
            relevant = [r for r in turn_records if r["category"] == category]
            if relevant:
                per_category[category] = {
                    "total": len(relevant),
                    "correct": sum(r["correct"] for r in relevant),
                    "accuracy": sum(r["correct"] for r in relevant) / len(relevant),
                }
        report["configurations"][config_name] = {
            "accuracy": (
                sum(r["correct"] for r in turn_records) / len(turn_records)
                if turn_records
                else 0.0
            ),
            "total": len(turn_records),
            "correct": sum(r["correct"] for r in turn_records),
            "perCategory": per_category,
            "turns": turn_records,
        }
        if evaluated:
            timings[config_name] = {
                step: total / evaluated for step, total in sorted(step_sums.items())
            }
    if include_timings:
        report["timings"] = timings
    return report


def report_json(report: dict) -> str:
    """Canonical serialization; deterministic when timings are excluded."""
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def report_table(report: dict) -> str:
    """Aligned text table of accuracies per configuration and category."""
    configs = list(report["configurations"])
    rows = []
    header = ["configuration", "accuracy", "correct/total"] + list(CATEGORIES)
    for name in configs:
        entry = report["configurations"][name]
        row = [
            name,
            f"{entry['accuracy']:.3f}",
            f"{entry['correct']}/{entry['total']}",
        ]
        for category in CATEGORIES:
            cat = entry["perCategory"].get(category)
            row.append(f"{cat['correct']}/{cat['total']}" if cat else "-")
        rows.append(row)
    widths = [max(len(header[i]), *(len(r[i]) for r in rows)) for i in range(len(header))]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(header, widths)),
        "  ".join("-" * w for w in widths),
    ]
    for row in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)))
    return "\n".join(lines) + "\n"
