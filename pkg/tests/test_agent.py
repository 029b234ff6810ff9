import re
import time

import pytest

from kgqa.agent import LoopConfig, Orchestrator, render_template
from kgqa.llm import Completion, Provider, ScriptedProvider, ScriptRule
from kgqa.sqltool import SqlResult

# template-unique anchors for scripted pattern matching
R_SQL = r"self-contained SQL query"
R_NL = r"self-contained natural-language search question"
DECIDE = r"deciding the next retrieval action"
ANSWER = r"writing the final answer"


def rules_common():
    return [
        ScriptRule(R_SQL, "SELECT AVG(height) FROM car"),
        ScriptRule(R_NL, "average height of the x1 models"),
    ]


def make_orchestrator(tiny_setup, rules, **kwargs):
    db_path, index, ddl = tiny_setup
    provider = ScriptedProvider(rules)
    return Orchestrator(provider, db_path, index, ddl, **kwargs)


def test_happy_path_both_tools_then_finish(tiny_setup):
    rules = rules_common() + [
        ScriptRule(rf"(?s){DECIDE}.*text round 1", "TOOL: finish"),
        ScriptRule(rf"(?s){DECIDE}.*sql round 1", "TOOL: text\naverage car height"),
        ScriptRule(DECIDE, "TOOL: sql\nSELECT AVG(height) FROM car"),
        ScriptRule(ANSWER, "The average height is 1600 mm [1][2]."),
    ]
    orchestrator = make_orchestrator(tiny_setup, rules)
    trace = orchestrator.run_turn([], "How tall are the cars on average?")
    assert trace.status == "completed"
    assert [c.tool for c in trace.tool_calls] == ["sql_query", "text_search"]
    assert trace.final_answer == "The average height is 1600 mm [1][2]."
    assert trace.citation_warnings == []
    assert trace.explicit_sql_question == "SELECT AVG(height) FROM car"
    # sources: SQL first, then passages, contiguous numbering from 1
    kinds = [s.kind for s in trace.sources]
    assert kinds == sorted(kinds, key=lambda k: 0 if k == "sql" else 1)
    assert [s.number for s in trace.sources] == list(range(1, len(trace.sources) + 1))


def test_error_feedback_appears_verbatim_in_next_decision(tiny_setup):
    rules = rules_common() + [
        ScriptRule(rf"(?s){DECIDE}.*text round 1", "TOOL: finish"),
        ScriptRule(rf"(?s){DECIDE}.*sql round 2", "TOOL: text\ncar heights"),
        ScriptRule(
            rf"(?s){DECIDE}.*no such column: nonexistent",
            "TOOL: sql\nSELECT AVG(height) FROM car",
        ),
        ScriptRule(DECIDE, "TOOL: sql\nSELECT nonexistent FROM car"),
        ScriptRule(ANSWER, "Fixed on the second try [1]."),
    ]
    orchestrator = make_orchestrator(tiny_setup, rules)
    trace = orchestrator.run_turn([], "average height?")
    assert len(trace.tool_calls) == 3
    sql_calls = [c for c in trace.tool_calls if c.tool == "sql_query"]
    assert len(sql_calls) == 2
    # round-1 error message must appear verbatim in the round-2 decision prompt
    error_message = sql_calls[0].outcome.message
    decision_prompts = [p.prompt for p in trace.rendered_prompts if p.name == "decision"]
    assert error_message in decision_prompts[1]


def test_premature_finish_is_reprompted(tiny_setup):
    rules = rules_common() + [
        ScriptRule(rf"(?s){DECIDE}.*text round 1", "TOOL: finish"),
        ScriptRule(rf"(?s){DECIDE}.*Finish was rejected", "TOOL: text\ncar height"),
        ScriptRule(rf"(?s){DECIDE}.*sql round 1", "TOOL: finish"),
        ScriptRule(DECIDE, "TOOL: sql\nSELECT AVG(height) FROM car"),
        ScriptRule(ANSWER, "done [1]."),
    ]
    orchestrator = make_orchestrator(tiny_setup, rules)
    trace = orchestrator.run_turn([], "how tall?")
    tools = {c.tool for c in trace.tool_calls}
    assert tools == {"sql_query", "text_search"}


def test_round_cap_refuses_fourth_sql_round(tiny_setup):
    rules = rules_common() + [
        ScriptRule(
            rf"(?s){DECIDE}.*round limit.*text round 1", "TOOL: finish"
        ),
        ScriptRule(rf"(?s){DECIDE}.*round limit", "TOOL: text\ncar height"),
        ScriptRule(DECIDE, "TOOL: sql\nSELECT COUNT(*) FROM car"),
        ScriptRule(ANSWER, "capped [1]."),
    ]
    orchestrator = make_orchestrator(tiny_setup, rules)
    trace = orchestrator.run_turn([], "count cars")
    sql_calls = [c for c in trace.tool_calls if c.tool == "sql_query"]
    assert len(sql_calls) == 3  # the 4th request was refused


def test_round_cap_is_configurable(tiny_setup):
    rules = rules_common() + [
        ScriptRule(
            rf"(?s){DECIDE}.*round limit.*text round 1", "TOOL: finish"
        ),
        ScriptRule(rf"(?s){DECIDE}.*round limit", "TOOL: text\ncar height"),
        ScriptRule(DECIDE, "TOOL: sql\nSELECT COUNT(*) FROM car"),
        ScriptRule(ANSWER, "capped [1]."),
    ]
    orchestrator = make_orchestrator(
        tiny_setup, rules, config=LoopConfig(max_rounds_per_tool=2)
    )
    trace = orchestrator.run_turn([], "count cars")
    sql_calls = [c for c in trace.tool_calls if c.tool == "sql_query"]
    assert len(sql_calls) == 2


def test_adversarial_never_finish_terminates(tiny_setup):
    # alternates sql/text forever, never volunteers finish
    rules = rules_common() + [
        ScriptRule(rf"(?s){DECIDE}.*text round (1|2)$", "TOOL: sql\nSELECT 1"),
        ScriptRule(
            rf"(?s){DECIDE}(?!.*sql round)", "TOOL: sql\nSELECT 1"
        ),
        ScriptRule(DECIDE, "TOOL: text\ncars"),
        ScriptRule(ANSWER, "forced finish."),
    ]
    orchestrator = make_orchestrator(tiny_setup, rules)
    trace = orchestrator.run_turn([], "loop forever")
    assert len(trace.tool_calls) <= 6
    sql_calls = sum(1 for c in trace.tool_calls if c.tool == "sql_query")
    text_calls = sum(1 for c in trace.tool_calls if c.tool == "text_search")
    assert 1 <= sql_calls <= 3 and 1 <= text_calls <= 3


def test_adversarial_always_finish_still_uses_both(tiny_setup):
    rules = rules_common() + [
        ScriptRule(DECIDE, "TOOL: finish"),
        ScriptRule(ANSWER, "stubborn."),
    ]
    orchestrator = make_orchestrator(tiny_setup, rules)
    trace = orchestrator.run_turn([], "anything")
    tools = {c.tool for c in trace.tool_calls}
    assert tools == {"sql_query", "text_search"}
    assert len(trace.tool_calls) <= 6


def test_unparseable_decision_retried_then_finish(tiny_setup):
    calls = {"decision": 0}

    class Garbage(Provider):
        def complete(self, request, conversation_id="default"):
            content = request.last_user_content()
            if "self-contained SQL" in content:
                return Completion("SELECT COUNT(*) FROM car")
            if "natural-language search" in content:
                return Completion("cars")
            if "deciding the next retrieval action" in content:
                calls["decision"] += 1
                return Completion("complete gibberish with no tool line")
            return Completion("answer text.")

    db_path, index, ddl = tiny_setup
    orchestrator = Orchestrator(Garbage(), db_path, index, ddl)
    trace = orchestrator.run_turn([], "q")
    # unparseable decisions fall back to finish-requests; both branches still run
    assert {c.tool for c in trace.tool_calls} == {"sql_query", "text_search"}
    assert calls["decision"] >= 2  # retried at least once


def test_citation_validator_flags_out_of_range(tiny_setup):
    rules = rules_common() + [
        ScriptRule(rf"(?s){DECIDE}.*text round 1", "TOOL: finish"),
        ScriptRule(rf"(?s){DECIDE}.*sql round 1", "TOOL: text\nheights"),
        ScriptRule(DECIDE, "TOOL: sql\nSELECT AVG(height) FROM car"),
        ScriptRule(ANSWER, "Cites a ghost source [9]."),
    ]
    orchestrator = make_orchestrator(tiny_setup, rules)
    trace = orchestrator.run_turn([], "q")
    assert any("[9]" in w for w in trace.citation_warnings)


def test_sources_numbering_sql_before_passages(tiny_setup):
    rules = rules_common() + [
        ScriptRule(rf"(?s){DECIDE}.*text round 1", "TOOL: finish"),
        ScriptRule(rf"(?s){DECIDE}.*sql round 2", "TOOL: text\nx1 sunroof"),
        ScriptRule(
            rf"(?s){DECIDE}.*sql round 1",
            "TOOL: sql\nSELECT height FROM car WHERE id = 'coupe-c'",
        ),
        ScriptRule(DECIDE, "TOOL: sql\nSELECT AVG(height) FROM car"),
        ScriptRule(ANSWER, "two sql sources then passages [1][2][3]."),
    ]
    orchestrator = make_orchestrator(tiny_setup, rules)
    trace = orchestrator.run_turn([], "compare heights")
    sql_sources = [s for s in trace.sources if s.kind == "sql"]
    passage_sources = [s for s in trace.sources if s.kind == "passage"]
    assert len(sql_sources) == 2
    assert [s.number for s in sql_sources] == [1, 2]
    assert passage_sources[0].number == 3
    # answer prompt enumerates the sources in order
    answer_prompt = [p for p in trace.rendered_prompts if p.name == "answer"][0].prompt
    for s in trace.sources:
        assert f"[{s.number}]" in answer_prompt


def test_passages_deduplicated_across_rounds_max_score(tiny_setup):
    rules = rules_common() + [
        ScriptRule(rf"(?s){DECIDE}.*text round 2", "TOOL: finish"),
        ScriptRule(rf"(?s){DECIDE}.*text round 1", "TOOL: text\npanoramic sunroof"),
        ScriptRule(rf"(?s){DECIDE}.*sql round 1", "TOOL: text\nsunroof equipment"),
        ScriptRule(DECIDE, "TOOL: sql\nSELECT COUNT(*) FROM car"),
        ScriptRule(ANSWER, "dedup [1]."),
    ]
    orchestrator = make_orchestrator(tiny_setup, rules)
    trace = orchestrator.run_turn([], "sunroof?")
    passage_ids = [s.passage_id for s in trace.sources if s.kind == "passage"]
    assert len(passage_ids) == len(set(passage_ids))
    scores = [s.score for s in trace.sources if s.kind == "passage"]
    assert scores == sorted(scores, reverse=True)


def test_history_rendered_into_prompts(tiny_setup):
    rules = rules_common() + [
        ScriptRule(rf"(?s){DECIDE}.*text round 1", "TOOL: finish"),
        ScriptRule(rf"(?s){DECIDE}.*sql round 1", "TOOL: text\nq"),
        ScriptRule(DECIDE, "TOOL: sql\nSELECT 1"),
        ScriptRule(ANSWER, "a."),
    ]
    orchestrator = make_orchestrator(tiny_setup, rules)
    history = [("What is the X1 height?", "1500 mm on average.")]
    trace = orchestrator.run_turn(history, "And compared to the coupe?")
    rewrite_prompt = trace.rendered_prompts[0].prompt
    assert "What is the X1 height?" in rewrite_prompt
    assert "1500 mm on average." in rewrite_prompt


def test_step_timings_cover_wall_clock(tiny_setup):
    class Sleepy(Provider):
        def complete(self, request, conversation_id="default"):
            time.sleep(0.02)
            content = request.last_user_content()
            if "self-contained SQL" in content:
                return Completion("SELECT COUNT(*) FROM car")
            if "natural-language search" in content:
                return Completion("cars")
            if "deciding the next retrieval action" in content:
                if "text round 1" in content:
                    return Completion("TOOL: finish")
                if "sql round 1" in content:
                    return Completion("TOOL: text\ncars")
                return Completion("TOOL: sql\nSELECT COUNT(*) FROM car")
            return Completion("the answer [1].")

    db_path, index, ddl = tiny_setup
    orchestrator = Orchestrator(Sleepy(), db_path, index, ddl)
    trace = orchestrator.run_turn([], "q")
    timings = trace.step_timings
    steps = {"rewrite", "toolSelection", "sqlExec", "textSearch", "answer"}
    assert steps <= set(timings)
    step_sum = sum(timings[s] for s in steps)
    assert abs(step_sum - timings["total"]) <= 0.05 * timings["total"]


def test_single_branch_configs(tiny_setup):
    rules = rules_common() + [
        ScriptRule(rf"(?s){DECIDE}.*sql round 1", "TOOL: finish"),
        ScriptRule(DECIDE, "TOOL: sql\nSELECT COUNT(*) FROM car"),
        ScriptRule(ANSWER, "sql only [1]."),
    ]
    orchestrator = make_orchestrator(
        tiny_setup, rules, config=LoopConfig(branches=frozenset({"sql"}))
    )
    trace = orchestrator.run_turn([], "count?")
    assert {c.tool for c in trace.tool_calls} == {"sql_query"}
    assert trace.explicit_nl_question == ""


def test_render_template_placeholders():
    out = render_template(
        "Q {question} D {ddl} H {history} keep {other}",
        {"question": "q", "ddl": "d", "history": "h"},
    )
    assert out == "Q q D d H h keep {other}"


def test_trace_serializes_to_dict(tiny_setup):
    rules = rules_common() + [
        ScriptRule(rf"(?s){DECIDE}.*text round 1", "TOOL: finish"),
        ScriptRule(rf"(?s){DECIDE}.*sql round 1", "TOOL: text\nq"),
        ScriptRule(DECIDE, "TOOL: sql\nSELECT nonexistent FROM car"),
        ScriptRule(ANSWER, "a [1]."),
    ]
    orchestrator = make_orchestrator(tiny_setup, rules)
    trace = orchestrator.run_turn([], "q")
    data = trace.to_dict()
    assert data["status"] == "completed"
    assert data["toolCalls"][0]["outcome"]["type"] == "sql_error"
    assert len(data["renderedPrompts"]) == len(trace.rendered_prompts)
