from __future__ import annotations

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from srsa.core import JudgeScores, METRICS, QueryRecord, Domain, SearchHit, Section, Strategy, StrategyChoice, SupportingDocuments
from srsa.llm import fixed_clock, now_context
from srsa.protocol import (
    NO_REFERENCES,
    ParseOutcome,
    PlanningDecision,
    ReactStep,
    TemplateSet,
    extract_search_query,
    format_judge_scores,
    format_planning_decision,
    format_react_step,
    format_router_output,
    format_subquestions,
    parse_judge_scores,
    parse_planning_decision,
    parse_react_step,
    parse_router_output,
    parse_subquestions,
    render_rag_prompt,
    render_router_prompt,
)

from conftest import CLOCK

QUERY = QueryRecord("q1", Domain.TRAVEL, "Rainy Saturday in NYC, what should we do?")
FALLBACK = StrategyChoice(Strategy.DIRECT, "", fallback_applied=True)


# -- router ------------------------------------------------------------------


def test_router_exact_grammar():
    choice = parse_router_output("STRATEGY: Planning\nSUGGESTIONS: check weather first")
    assert choice == StrategyChoice(Strategy.PLANNING, "check weather first", False)


def test_router_free_prose_falls_back():
    assert parse_router_output("I think you should just look it up online.") == FALLBACK


@pytest.mark.parametrize("raw", ["strategy: PARALLEL", "Strategy: parallel", "**STRATEGY:** Parallel"])
def test_router_case_insensitive(raw):
    assert parse_router_output(raw) == StrategyChoice(Strategy.PARALLEL, "", False)


def test_router_unknown_strategy_word_falls_back():
    assert parse_router_output("STRATEGY: Sequential\nSUGGESTIONS: x") == FALLBACK


def test_router_multiline_suggestions():
    choice = parse_router_output("STRATEGY: Direct\nSUGGESTIONS: best 34-inch ultrawide monitors 2024\nalso check prices")
    assert choice.suggestions == "best 34-inch ultrawide monitors 2024\nalso check prices"


def test_router_prompt_is_deterministic():
    time = now_context(fixed_clock(CLOCK))
    a = render_router_prompt(QUERY, time)
    assert a == render_router_prompt(QUERY, time)
    assert "2024-07-01" in a.user and "Monday" in a.user and QUERY.text in a.user


# -- sub-questions / direct --------------------------------------------------------


def test_subquestions_grammar():
    out = parse_subquestions("1. weather NYC\n2. museum exhibits")
    assert out.ok and out.value == ["weather NYC", "museum exhibits"]


def test_subquestions_cap():
    raw = "\n".join(f"{i}. question {i}" for i in range(1, 11))
    assert parse_subquestions(raw, cap=8).value == [f"question {i}" for i in range(1, 9)]


def test_subquestions_failure():
    out = parse_subquestions("I cannot split this.")
    assert not out.ok and out.reason == "no_subquestions_found" and out.raw == "I cannot split this."


@pytest.mark.parametrize(
    "raw, expected",
    [
        ("best 34-inch ultrawide monitors 2024", "best 34-inch ultrawide monitors 2024"),
        ("\n  - \"nyc museums rainy day\"\nsecond line", "nyc museums rainy day"),
        ("1. cheap flights lisbon", "cheap flights lisbon"),
    ],
)
def test_extract_search_query(raw, expected):
    assert extract_search_query(raw) == expected


# -- planning --------------------------------------------------------------------


def test_planning_good_sufficient():
    out = parse_planning_decision("QUALITY: good\nSUFFICIENT: yes")
    assert out.value == PlanningDecision("good", None, (), True)


def test_planning_poor_rewrite():
    out = parse_planning_decision("QUALITY: poor\nREWRITE: nyc rain activities\nSUFFICIENT: no")
    assert out.value == PlanningDecision("poor", "nyc rain activities", (), False)


def test_planning_missing_sufficient():
    raw = "QUALITY: good\nEXPLORE: something"
    out = parse_planning_decision(raw)
    assert not out.ok and out.raw == raw and "SUFFICIENT" in out.reason


def test_planning_explore_points_in_order():
    out = parse_planning_decision("SUFFICIENT: no\nEXPLORE: a\nEXPLORE: b")
    assert out.value.explore_points == ("a", "b") and out.value.quality_verdict == "good"


# -- RAG ---------------------------------------------------------------------------


def test_rag_empty_docs_marker():
    prompt = render_rag_prompt(QUERY, SupportingDocuments())
    assert NO_REFERENCES in prompt.user


def test_rag_sections_in_order():
    docs = SupportingDocuments(
        (
            Section("sub-question 1: weather", (SearchHit("w", "https://w.example", "rain"),)),
            Section("sub-question 2: museums", (SearchHit("m", "https://m.example", "moma"),)),
        )
    )
    prompt = render_rag_prompt(QUERY, docs)
    assert prompt.user.index("sub-question 1") < prompt.user.index("sub-question 2")
    assert NO_REFERENCES not in prompt.user
    assert prompt == render_rag_prompt(QUERY, docs)


# -- ReAct -------------------------------------------------------------------------


def test_react_parse_search_and_final():
    assert parse_react_step("Thought: need data\nACTION: search nyc weather").value == ReactStep("search", "nyc weather")
    assert parse_react_step("FINAL: Go to MoMA.\nBring an umbrella.").value == ReactStep("final", "Go to MoMA.\nBring an umbrella.")
    assert not parse_react_step("ACTION: lookup x").ok
    assert not parse_react_step("just rambling").ok


# -- judge -------------------------------------------------------------------------

JUDGE_BLOCK = """AGENT: SRSA
INFORMATIVENESS: 4 | detailed
COMPLETENESS: 5 | covers everything
NOVELTY: 3 | some fresh ideas
ACTIONABILITY: 4 | concrete steps"""


def test_judge_well_formed():
    out = parse_judge_scores(JUDGE_BLOCK)
    s = out.value["SRSA"]
    assert (s.informativeness, s.completeness, s.novelty, s.actionability) == (4, 5, 3, 4)
    assert s.justifications["novelty"] == "some fresh ideas"


def test_judge_out_of_range():
    out = parse_judge_scores(JUDGE_BLOCK.replace("COMPLETENESS: 5", "COMPLETENESS: 7"))
    assert not out.ok and "out of range" in out.reason


def test_judge_missing_metric_named():
    raw = "\n".join(line for line in JUDGE_BLOCK.splitlines() if not line.startswith("NOVELTY"))
    out = parse_judge_scores(raw)
    assert not out.ok and "NOVELTY" in out.reason


def test_template_override(tmp_path):
    (tmp_path / "router.txt").write_text("custom router", encoding="utf-8")
    custom = TemplateSet(tmp_path)
    assert custom["router"] == "custom router"
    assert custom["rag"] == TemplateSet()["rag"]
    assert custom.digest != TemplateSet().digest


# -- render/parse round trips ---------------------------------------------------------

# values start with a letter or digit: markdown decoration around markers is stripped by design
line_text = st.builds(
    lambda head, tail: (head + tail).rstrip(),
    st.characters(whitelist_categories=("Lu", "Ll", "Nd")),
    st.text(st.characters(blacklist_categories=("Cc", "Cs", "Zl", "Zp"), blacklist_characters="\x85|"), max_size=30),
)


@given(st.sampled_from(Strategy), st.lists(line_text, max_size=3))
def test_router_round_trip(strategy, lines):
    # suggestion lines that look like markers would be re-read as markers; exclude them
    lines = [line for line in lines if ":" not in line]
    choice = StrategyChoice(strategy, "\n".join(lines))
    assert parse_router_output(format_router_output(choice)) == choice


@given(st.lists(line_text, min_size=1, max_size=8))
def test_subquestions_round_trip(items):
    assert parse_subquestions(format_subquestions(items)).value == items


@given(st.booleans(), st.none() | line_text, st.lists(line_text, max_size=3), st.booleans())
def test_planning_round_trip(poor, rewrite, explore, sufficient):
    decision = PlanningDecision("poor" if poor else "good", rewrite if poor else None, tuple(explore), sufficient)
    assert parse_planning_decision(format_planning_decision(decision)).value == decision


@given(st.sampled_from(["search", "final"]), line_text)
def test_react_round_trip(action, text):
    step = ReactStep(action, text)
    assert parse_react_step(format_react_step(step)).value == step


score = st.integers(0, 5)
agent_names = st.lists(st.sampled_from(["SRSA", "Simple", "ReAct", "Other"]), min_size=1, max_size=4, unique=True)


@given(agent_names, st.data())
def test_judge_round_trip(names, data):
    scores = [
        JudgeScores(
            name,
            *[data.draw(score) for _ in METRICS],
            justifications={m: data.draw(line_text) for m in METRICS},
        )
        for name in names
    ]
    parsed = parse_judge_scores(format_judge_scores(scores)).value
    assert [parsed[s.agent] for s in scores] == scores


# -- totality ------------------------------------------------------------------------

PARSERS = [
    lambda raw: parse_router_output(raw),
    parse_subquestions,
    parse_planning_decision,
    parse_react_step,
    parse_judge_scores,
]

# bias fuzz input toward grammar fragments so the branches get exercised
fragments = st.sampled_from(
    ["STRATEGY:", "SUGGESTIONS:", "QUALITY: poor", "REWRITE:", "EXPLORE:", "SUFFICIENT: yes", "SUFFICIENT:",
     "AGENT: ", "COMPLETENESS: ", "NOVELTY: 9", "FINAL:", "ACTION: search", "1. ", "- ", "|", "\n", "**", "99999999999"]
)
fuzz = st.lists(st.one_of(st.text(max_size=20), fragments), max_size=12).map("".join)


def check_total(parser, raw):
    out = parser(raw)
    if isinstance(out, ParseOutcome):
        assert out.ok == (out.value is not None)
        assert out.ok or isinstance(out.reason, str)
        assert out.raw == raw
    else:
        assert isinstance(out, StrategyChoice)


@pytest.mark.parametrize("parser", PARSERS, ids=["router", "subquestions", "planning", "react", "judge"])
@settings(max_examples=500, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(raw=fuzz)
def test_parsers_are_total(parser, raw):
    check_total(parser, raw)
