"""Comparison agents: one-shot search, and a ReAct loop with a rephrasing step."""

from __future__ import annotations

import logging

from srsa.context import AgentContext
from srsa.core import (
    AgentAnswer,
    AgentKind,
    Parse,
    QueryRecord,
    Section,
    StopReason,
    SupportingDocuments,
    TranscriptRecorder,
    to_data,
)
from srsa.llm import GatewayError
from srsa.protocol import (
    extract_search_query,
    parse_react_step,
    render_rag_prompt,
    render_react_close_prompt,
    render_react_rephrase_prompt,
    render_react_thought_prompt,
)

log = logging.getLogger(__name__)

REACT_MAX_ITERATIONS = 5


def run_simple(ctx: AgentContext, query: QueryRecord) -> AgentAnswer:
    """Search the raw query text once, then answer from those hits."""
    trace = TranscriptRecorder(query.id, AgentKind.SIMPLE, ctx.templates.digest)
    try:
        response = ctx.search.search(ctx.request(query.text), trace)
        docs = SupportingDocuments((Section("search", response.hits),))
        answer = ctx.llm.generate(render_rag_prompt(query, docs, ctx.templates), ctx.config.gen_params, trace)
    except GatewayError as exc:
        log.warning("simple run for %s stopped on backend error: %s", query.id, exc)
        trace.decision("backend_error", error=type(exc).__name__, message=str(exc))
        return AgentAnswer("", trace.finish("", StopReason.BACKEND_ERROR))
    return AgentAnswer(answer, trace.finish(answer))


def run_react(ctx: AgentContext, query: QueryRecord, max_iterations: int = REACT_MAX_ITERATIONS) -> AgentAnswer:
    """Thought/Action/Observation loop over the search tool.

    Observations are carried forward as raw hits with no compression, and when
    the iteration budget runs out the closing call sees the whole history.
    """
    trace = TranscriptRecorder(query.id, AgentKind.REACT, ctx.templates.digest)
    params = ctx.config.gen_params
    history: list[tuple[str, str, tuple]] = []
    try:
        raw = ctx.llm.generate(render_react_rephrase_prompt(query, ctx.templates), params, trace)
        rephrased = extract_search_query(raw) or query.text
        trace.decision("rephrased_query", query=rephrased)

        for iteration in range(1, max_iterations + 1):
            raw = ctx.llm.generate(render_react_thought_prompt(query, rephrased, history, ctx.templates), params, trace)
            outcome = parse_react_step(raw)
            trace.record(Parse("react_step", raw, outcome.ok, to_data(outcome.value), outcome.reason))
            if not outcome.ok:
                trace.decision("react_unparseable_as_final", iteration=iteration, reason=outcome.reason)
                answer = raw.strip()
                return AgentAnswer(answer, trace.finish(answer))
            step = outcome.value
            if step.action == "final":
                trace.decision("react_final", iteration=iteration)
                return AgentAnswer(step.text, trace.finish(step.text))
            response = ctx.search.search(ctx.request(step.text), trace)
            history.append((raw.strip(), step.text, response.hits))

        trace.decision("react_max_iterations", iterations=max_iterations)
        answer = ctx.llm.generate(render_react_close_prompt(query, rephrased, history, ctx.templates), params, trace)
    except GatewayError as exc:
        log.warning("ReAct run for %s stopped on backend error: %s", query.id, exc)
        trace.decision("backend_error", error=type(exc).__name__, message=str(exc))
        return AgentAnswer("", trace.finish("", StopReason.BACKEND_ERROR))
    return AgentAnswer(answer, trace.finish(answer, StopReason.MAX_ITERATIONS))
