"""Comparative LLM-as-judge scoring of the three agents' answers."""

from __future__ import annotations

import json
import os
import random
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

from srsa.core import METRICS, AgentKind, Decision, Event, JudgeScores, Parse, QueryRecord, TranscriptRecorder, to_data
from srsa.llm import LLMGateway
from srsa.protocol import JudgeExample, TemplateSet, parse_judge_scores, render_judge_prompt

SHOTS_PER_PROMPT = 4
JUDGE_RUNS = 2
AGENT_ORDER = tuple(k.value for k in AgentKind)


class ExampleBank:
    """Curated judging examples; each prompt uses a fixed half of them."""

    def __init__(self, examples: Sequence[JudgeExample]) -> None:
        if len(examples) < JUDGE_RUNS * SHOTS_PER_PROMPT:
            raise ValueError(f"example bank needs at least {JUDGE_RUNS * SHOTS_PER_PROMPT} examples, got {len(examples)}")
        self.examples = list(examples)

    @classmethod
    def load(cls, directory: str | os.PathLike | None = None) -> ExampleBank:
        root = Path(directory) if directory else resources.files("srsa") / "data" / "judge_bank"
        files = sorted((p for p in root.iterdir() if p.name.endswith(".json")), key=lambda p: p.name)
        examples = []
        for path in files:
            data = json.loads(path.read_text(encoding="utf-8"))
            examples.append(JudgeExample(str(data["id"]), data["query"], dict(data["answers"]), data["evaluation"]))
        return cls(examples)

    def shots(self, run: int) -> list[JudgeExample]:
        return self.examples[run * SHOTS_PER_PROMPT : (run + 1) * SHOTS_PER_PROMPT]


@dataclass
class JudgeRun:
    order: list[str]
    attempts: int
    scores: dict[str, JudgeScores] | None


@dataclass
class QuestionJudgement:
    query_id: str
    judged: bool
    averaged: dict[str, dict[str, float]] = field(default_factory=dict)
    runs: list[JudgeRun] = field(default_factory=list)
    srsa_strategy: str | None = None
    events: tuple[Event, ...] = ()

    def to_record(self) -> dict:
        return {
            "query_id": self.query_id,
            "judged": self.judged,
            "srsa_strategy": self.srsa_strategy,
            "averaged": self.averaged,
            "runs": [
                {
                    "order": run.order,
                    "attempts": run.attempts,
                    "scores": {a: to_data(s) for a, s in run.scores.items()} if run.scores else None,
                }
                for run in self.runs
            ],
        }

    @classmethod
    def from_record(cls, data: Mapping) -> QuestionJudgement:
        runs = [
            JudgeRun(
                list(r["order"]),
                int(r["attempts"]),
                {a: JudgeScores(**s) for a, s in r["scores"].items()} if r["scores"] else None,
            )
            for r in data.get("runs", [])
        ]
        return cls(
            query_id=data["query_id"],
            judged=bool(data["judged"]),
            averaged={a: {m: float(v) for m, v in ms.items()} for a, ms in data.get("averaged", {}).items()},
            runs=runs,
            srsa_strategy=data.get("srsa_strategy"),
        )


def average_runs(runs: Sequence[Mapping[str, JudgeScores]]) -> dict[str, dict[str, float]]:
    agents = list(runs[0])
    return {a: {m: sum(r[a].score(m) for r in runs) / len(runs) for m in METRICS} for a in agents}


def question_rng(seed: int | str, query_id: str) -> tuple[str, random.Random]:
    key = f"{seed}:{query_id}"
    return key, random.Random(key)


def judge_question(
    llm: LLMGateway,
    query: QueryRecord,
    answers: Mapping[str, str],
    bank: ExampleBank,
    seed: int | str = 0,
    templates: TemplateSet | None = None,
    agents: Sequence[str] = AGENT_ORDER,
) -> QuestionJudgement:
    """Two judging calls, each with its own 4-shot prompt, averaged per metric and agent.

    A run whose completion does not parse is retried once; if the retry also
    fails the question is returned unjudged.
    """
    if set(answers) != set(agents):
        raise ValueError(f"expected one answer for each of {list(agents)}, got {sorted(answers)}")
    trace = TranscriptRecorder(query.id, None)
    key, rng = question_rng(seed, query.id)
    runs: list[JudgeRun] = []
    for run_index in range(JUDGE_RUNS):
        order = [a for a in agents]
        rng.shuffle(order)
        trace.record(Decision("judge_order", {"run": run_index, "order": order, "rng_key": key}))
        prompt = render_judge_prompt(query, [(a, answers[a]) for a in order], bank.shots(run_index), templates)
        parsed = None
        for attempt in (1, 2):
            raw = llm.generate(prompt, trace=trace)
            outcome = parse_judge_scores(raw)
            reason = outcome.reason
            if outcome.ok and set(outcome.value) != set(agents):
                reason = f"judged agents {sorted(outcome.value)} do not match {sorted(agents)}"
            trace.record(Parse("judge_scores", raw, reason is None, None, reason))
            if reason is None:
                parsed = outcome.value
                break
        runs.append(JudgeRun(order, attempt, parsed))
        if parsed is None:
            trace.record(Decision("unjudged", {"run": run_index}))
            return QuestionJudgement(query.id, False, runs=runs, events=trace.events)
    averaged = average_runs([r.scores for r in runs])
    return QuestionJudgement(query.id, True, averaged, runs, events=trace.events)
