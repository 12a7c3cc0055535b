"""Prompt templates and the marker-line grammars used to read model output.

Every prompt the agents send is built here, and every completion is parsed
here. Parsers are total: any input string yields either a typed value or a
``ParseOutcome`` failure that keeps the raw text.
"""

from __future__ import annotations

import hashlib
import os
import re
import string
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Generic, Sequence, TypeVar

from srsa.core import (
    METRICS,
    JudgeScores,
    PromptText,
    QueryRecord,
    SearchHit,
    Strategy,
    StrategyChoice,
    SupportingDocuments,
)
from srsa.llm import TimeContext

TEMPLATE_VERSION = "1"
TEMPLATE_NAMES = (
    "router",
    "rewrite",
    "parallel",
    "planning_summary",
    "planning_decision",
    "rag",
    "react_rephrase",
    "react_thought",
    "react_close",
    "judge",
)
NO_REFERENCES = "NO REFERENCES RETRIEVED"
DEFAULT_MAX_SUBQUESTIONS = 8

T = TypeVar("T")


@dataclass(frozen=True)
class ParseOutcome(Generic[T]):
    value: T | None = None
    reason: str | None = None
    raw: str = ""

    @property
    def ok(self) -> bool:
        return self.reason is None

    @classmethod
    def failure(cls, reason: str, raw: str) -> ParseOutcome[T]:
        return cls(None, reason, raw)


class TemplateSet:
    """The prompt texts, loaded from the package or from an override directory.

    Files missing from the override directory fall back to the packaged copy.
    """

    def __init__(self, directory: str | os.PathLike | None = None) -> None:
        self.directory = Path(directory) if directory else None
        packaged = resources.files("srsa") / "templates"
        self._texts: dict[str, str] = {}
        for name in TEMPLATE_NAMES:
            override = self.directory / f"{name}.txt" if self.directory else None
            if override is not None and override.exists():
                text = override.read_text(encoding="utf-8")
            else:
                text = (packaged / f"{name}.txt").read_text(encoding="utf-8")
            self._texts[name] = text.strip()

    def __getitem__(self, name: str) -> str:
        return self._texts[name]

    @property
    def digest(self) -> str:
        h = hashlib.sha256(f"templates/{TEMPLATE_VERSION}".encode())
        for name in TEMPLATE_NAMES:
            h.update(b"\0" + name.encode() + b"\0" + self._texts[name].encode("utf-8"))
        return h.hexdigest()


_default_templates: TemplateSet | None = None


def default_templates() -> TemplateSet:
    global _default_templates
    if _default_templates is None:
        _default_templates = TemplateSet()
    return _default_templates


def _marker(name: str) -> re.Pattern[str]:
    # tolerate markdown decoration around the key, e.g. "**STRATEGY:** Direct"
    return re.compile(rf"^[\s*#>_`-]*{name}[\s*_`]*:[\s*_`]*(.*)$", re.IGNORECASE)


_STRATEGY_LINE = _marker("STRATEGY")
_SUGGESTIONS_LINE = _marker("SUGGESTIONS")
_QUALITY_LINE = _marker("QUALITY")
_REWRITE_LINE = _marker("REWRITE")
_EXPLORE_LINE = _marker("EXPLORE")
_SUFFICIENT_LINE = _marker("SUFFICIENT")
_AGENT_LINE = _marker("AGENT")
_FINAL_LINE = _marker("FINAL")
_ACTION_LINE = _marker("ACTION")
_METRIC_LINE = re.compile(
    r"^[\s*#>_`-]*(INFORMATIVENESS|COMPLETENESS|NOVELTY|ACTIONABILITY)[\s*_`]*:\s*([^\s|]*)\s*(?:\|(.*))?$",
    re.IGNORECASE,
)
_LIST_ITEM = re.compile(r"^\s*(?:\d+\s*[.)]|[-*•])\s*(.*)$")
_FIRST_WORD = re.compile(r"[A-Za-z]+")


def _first_word(text: str) -> str:
    m = _FIRST_WORD.search(text)
    return m.group(0).lower() if m else ""


def _first_line(text: str) -> str:
    for line in text.splitlines():
        if line.strip():
            return line.strip()
    return ""


def format_hits(hits: Sequence[SearchHit]) -> str:
    if not hits:
        return "(no results)"
    blocks = []
    for i, hit in enumerate(hits, 1):
        blocks.append(f"[{i}] {hit.title}\nURL: {hit.url}\n{hit.content}")
    return "\n\n".join(blocks)


# -- router --------------------------------------------------------------------


def render_router_prompt(query: QueryRecord, time: TimeContext, templates: TemplateSet | None = None) -> PromptText:
    templates = templates or default_templates()
    return PromptText(templates["router"], f"{time.render()}\n\nUser query:\n{query.text}")


def format_router_output(choice: StrategyChoice) -> str:
    return f"STRATEGY: {choice.strategy.value}\nSUGGESTIONS: {choice.suggestions}"


_STRATEGY_BY_WORD = {s.value.lower(): s for s in Strategy}


def parse_router_output(raw: str) -> StrategyChoice:
    """Read ``STRATEGY:``/``SUGGESTIONS:`` lines; anything unreadable becomes a Direct fallback."""
    lines = raw.splitlines()
    strategy = None
    for line in lines:
        m = _STRATEGY_LINE.match(line)
        if m and _first_word(m.group(1)) in _STRATEGY_BY_WORD:
            strategy = _STRATEGY_BY_WORD[_first_word(m.group(1))]
            break
    if strategy is None:
        return StrategyChoice(Strategy.DIRECT, "", fallback_applied=True)

    suggestions: list[str] = []
    collecting = False
    for line in lines:
        m = _SUGGESTIONS_LINE.match(line)
        if not collecting and m:
            collecting = True
            suggestions.append(m.group(1))
        elif collecting and not _STRATEGY_LINE.match(line):
            suggestions.append(line)
    return StrategyChoice(strategy, "\n".join(suggestions).strip())


# -- direct / parallel -----------------------------------------------------------


def render_rewrite_prompt(query: QueryRecord, time: TimeContext, templates: TemplateSet | None = None) -> PromptText:
    templates = templates or default_templates()
    return PromptText(templates["rewrite"], f"{time.render()}\n\nUser message:\n{query.text}")


def extract_search_query(raw: str) -> str:
    """First non-empty line with list bullets and wrapping quotes removed."""
    line = _first_line(raw)
    m = _LIST_ITEM.match(line)
    if m and m.group(1).strip():
        line = m.group(1).strip()
    if len(line) >= 2 and line[0] == line[-1] and line[0] in "\"'`":
        line = line[1:-1].strip()
    return line


def render_parallel_prompt(rephrased: str, suggestions: str, templates: TemplateSet | None = None) -> PromptText:
    templates = templates or default_templates()
    return PromptText(templates["parallel"], f"Request:\n{rephrased}\n\nSearch suggestions:\n{suggestions or '(none)'}")


def format_subquestions(items: Sequence[str]) -> str:
    return "\n".join(f"{i}. {q}" for i, q in enumerate(items, 1))


def parse_subquestions(raw: str, cap: int = DEFAULT_MAX_SUBQUESTIONS) -> ParseOutcome[list[str]]:
    items = []
    for line in raw.splitlines():
        m = _LIST_ITEM.match(line)
        if m and m.group(1).strip():
            items.append(m.group(1).strip())
    if not items:
        return ParseOutcome.failure("no_subquestions_found", raw)
    return ParseOutcome(items[:cap], None, raw)


# -- planning ------------------------------------------------------------------------


@dataclass(frozen=True)
class PlanningDecision:
    quality_verdict: str
    rewritten_query: str | None
    explore_points: tuple[str, ...]
    sufficient: bool

    def __post_init__(self) -> None:
        if self.quality_verdict not in ("good", "poor"):
            raise ValueError(f"quality_verdict must be good or poor, not {self.quality_verdict!r}")
        if self.rewritten_query is not None and (self.quality_verdict != "poor" or not self.rewritten_query.strip()):
            raise ValueError("rewritten_query must be non-empty and only set for poor results")


def render_summary_prompt(
    query: QueryRecord, search_query: str, hits: Sequence[SearchHit], templates: TemplateSet | None = None
) -> PromptText:
    templates = templates or default_templates()
    return PromptText(
        templates["planning_summary"],
        f"User query:\n{query.text}\n\nSearch query: {search_query}\n\nSearch results:\n{format_hits(hits)}",
    )


def render_planning_prompt(
    query: QueryRecord,
    suggestions: str,
    iteration: int,
    max_iterations: int,
    current_query: str,
    first_step_hits: Sequence[SearchHit],
    memory: Sequence[tuple[int, str]],
    templates: TemplateSet | None = None,
) -> PromptText:
    templates = templates or default_templates()
    parts = [
        f"User query:\n{query.text}",
        f"Search plan suggestions:\n{suggestions or '(none)'}",
        f"Iteration {iteration} of {max_iterations}. Current search query: {current_query}",
        f"Results of the first search:\n{format_hits(first_step_hits)}",
    ]
    if memory:
        notes = "\n\n".join(f"(iteration {i}) {text}" for i, text in memory)
        parts.append(f"Compressed results of later searches:\n{notes}")
    return PromptText(templates["planning_decision"], "\n\n".join(parts))


def format_planning_decision(decision: PlanningDecision) -> str:
    lines = [f"QUALITY: {decision.quality_verdict}"]
    if decision.rewritten_query is not None:
        lines.append(f"REWRITE: {decision.rewritten_query}")
    lines += [f"EXPLORE: {p}" for p in decision.explore_points]
    lines.append(f"SUFFICIENT: {'yes' if decision.sufficient else 'no'}")
    return "\n".join(lines)


def parse_planning_decision(raw: str) -> ParseOutcome[PlanningDecision]:
    quality = None
    rewrite = None
    explore: list[str] = []
    sufficient = None
    for line in raw.splitlines():
        if m := _QUALITY_LINE.match(line):
            word = _first_word(m.group(1))
            if quality is None and word in ("good", "poor"):
                quality = word
        elif m := _REWRITE_LINE.match(line):
            if rewrite is None and m.group(1).strip():
                rewrite = m.group(1).strip()
        elif m := _EXPLORE_LINE.match(line):
            if m.group(1).strip():
                explore.append(m.group(1).strip())
        elif m := _SUFFICIENT_LINE.match(line):
            word = _first_word(m.group(1))
            if sufficient is None and word in ("yes", "no"):
                sufficient = word == "yes"
    if sufficient is None:
        return ParseOutcome.failure("missing SUFFICIENT: yes|no line", raw)
    quality = quality or "good"
    decision = PlanningDecision(
        quality_verdict=quality,
        rewritten_query=rewrite if quality == "poor" else None,
        explore_points=tuple(explore),
        sufficient=sufficient,
    )
    return ParseOutcome(decision, None, raw)


# -- final answer --------------------------------------------------------------------


def render_references(docs: SupportingDocuments) -> str:
    if docs.is_empty:
        return NO_REFERENCES
    blocks = []
    for section in docs.sections:
        body = section.summary if section.summary is not None else format_hits(section.hits)
        blocks.append(f"=== {section.label} ===\n{body}")
    return "\n\n".join(blocks)


def render_rag_prompt(query: QueryRecord, docs: SupportingDocuments, templates: TemplateSet | None = None) -> PromptText:
    templates = templates or default_templates()
    return PromptText(templates["rag"], f"User query:\n{query.text}\n\nReferences:\n{render_references(docs)}")


# -- ReAct ----------------------------------------------------------------------------


@dataclass(frozen=True)
class ReactStep:
    action: str  # "search" | "final"
    text: str


def render_react_rephrase_prompt(query: QueryRecord, templates: TemplateSet | None = None) -> PromptText:
    templates = templates or default_templates()
    return PromptText(templates["react_rephrase"], f"User message:\n{query.text}")


def render_react_history(history: Sequence[tuple[str, str, Sequence[SearchHit]]]) -> str:
    if not history:
        return "(no steps yet)"
    blocks = []
    for i, (thought, action, hits) in enumerate(history, 1):
        blocks.append(f"Step {i}\nThought/Action:\n{thought}\nAction: search {action}\nObservation:\n{format_hits(hits)}")
    return "\n\n".join(blocks)


def render_react_thought_prompt(
    query: QueryRecord,
    rephrased: str,
    history: Sequence[tuple[str, str, Sequence[SearchHit]]],
    templates: TemplateSet | None = None,
) -> PromptText:
    templates = templates or default_templates()
    return PromptText(
        templates["react_thought"],
        f"User message:\n{query.text}\n\nQuestion: {rephrased}\n\nHistory:\n{render_react_history(history)}",
    )


def render_react_close_prompt(
    query: QueryRecord,
    rephrased: str,
    history: Sequence[tuple[str, str, Sequence[SearchHit]]],
    templates: TemplateSet | None = None,
) -> PromptText:
    templates = templates or default_templates()
    return PromptText(
        templates["react_close"],
        f"User message:\n{query.text}\n\nQuestion: {rephrased}\n\nHistory:\n{render_react_history(history)}",
    )


def format_react_step(step: ReactStep) -> str:
    if step.action == "search":
        return f"ACTION: search {step.text}"
    return f"FINAL: {step.text}"


def parse_react_step(raw: str) -> ParseOutcome[ReactStep]:
    lines = raw.splitlines()
    for i, line in enumerate(lines):
        if m := _FINAL_LINE.match(line):
            text = "\n".join([m.group(1), *lines[i + 1 :]]).strip()
            if not text:
                return ParseOutcome.failure("empty FINAL answer", raw)
            return ParseOutcome(ReactStep("final", text), None, raw)
        if m := _ACTION_LINE.match(line):
            am = re.match(r"search\b\s*(.*)$", m.group(1).strip(), re.IGNORECASE)
            if am is None:
                return ParseOutcome.failure(f"unknown action: {m.group(1).strip()[:80]!r}", raw)
            query = am.group(1).strip()
            if not query:
                return ParseOutcome.failure("search action without a query", raw)
            return ParseOutcome(ReactStep("search", query), None, raw)
    return ParseOutcome.failure("no ACTION or FINAL line", raw)


# -- judging ----------------------------------------------------------------------------


@dataclass(frozen=True)
class JudgeExample:
    id: str
    query: str
    answers: dict[str, str]
    evaluation: str


def render_judge_example(index: int, example: JudgeExample) -> str:
    answers = "\n\n".join(f"--- Answer from {name} ---\n{text}" for name, text in example.answers.items())
    return f"### Example {index}\nUser request:\n{example.query}\n\n{answers}\n\nEvaluation:\n{example.evaluation.strip()}"


def render_judge_prompt(
    query: QueryRecord,
    answers: Sequence[tuple[str, str]],
    shots: Sequence[JudgeExample],
    templates: TemplateSet | None = None,
) -> PromptText:
    templates = templates or default_templates()
    examples = "\n\n".join(render_judge_example(i, ex) for i, ex in enumerate(shots, 1))
    system = string.Template(templates["judge"]).safe_substitute(examples=examples or "(none)")
    body = "\n\n".join(f"--- Answer from {name} ---\n{text}" for name, text in answers)
    return PromptText(system, f"User request:\n{query.text}\n\n{body}\n\nEvaluation:")


def format_judge_scores(scores: Sequence[JudgeScores]) -> str:
    blocks = []
    for s in scores:
        lines = [f"AGENT: {s.agent}"]
        for metric in METRICS:
            lines.append(f"{metric.upper()}: {s.score(metric)} | {s.justifications.get(metric, '')}".rstrip())
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks)


def parse_judge_scores(raw: str) -> ParseOutcome[dict[str, JudgeScores]]:
    blocks: list[tuple[str, dict[str, tuple[int, str]]]] = []
    for line in raw.splitlines():
        if m := _AGENT_LINE.match(line):
            name = m.group(1).strip().strip("*`").strip()
            if not name:
                return ParseOutcome.failure("AGENT line without a name", raw)
            if any(existing == name for existing, _ in blocks):
                return ParseOutcome.failure(f"duplicate AGENT block: {name}", raw)
            blocks.append((name, {}))
            continue
        if not (m := _METRIC_LINE.match(line)) or not blocks:
            continue
        metric = m.group(1).lower()
        name, found = blocks[-1]
        token = m.group(2).strip("*`")
        if not re.fullmatch(r"[+-]?\d{1,6}", token):
            return ParseOutcome.failure(f"{name}: {metric.upper()} score {token!r} is not an integer", raw)
        value = int(token)
        if not 0 <= value <= 5:
            return ParseOutcome.failure(f"{name}: {metric.upper()} score {value} out of range 0-5", raw)
        if metric in found:
            return ParseOutcome.failure(f"{name}: duplicate {metric.upper()} line", raw)
        found[metric] = (value, (m.group(3) or "").strip())
    if not blocks:
        return ParseOutcome.failure("no AGENT blocks", raw)
    parsed = {}
    for name, found in blocks:
        missing = [metric.upper() for metric in METRICS if metric not in found]
        if missing:
            return ParseOutcome.failure(f"{name}: missing {', '.join(missing)}", raw)
        parsed[name] = JudgeScores(
            agent=name,
            justifications={metric: found[metric][1] for metric in METRICS},
            **{metric: found[metric][0] for metric in METRICS},
        )
    return ParseOutcome(parsed, None, raw)
