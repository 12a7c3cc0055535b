"""The three search strategies, final-answer generation and the full routed agent."""

from __future__ import annotations

import enum
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from srsa.context import AgentContext
from srsa.core import (
    AgentAnswer,
    AgentKind,
    Parse,
    QueryRecord,
    SearchCall,
    SearchResponse,
    Section,
    StopReason,
    Strategy,
    StrategyChoice,
    SupportingDocuments,
    TranscriptRecorder,
    to_data,
)
from srsa.llm import GatewayError, now_context
from srsa.protocol import (
    extract_search_query,
    parse_planning_decision,
    parse_subquestions,
    render_parallel_prompt,
    render_planning_prompt,
    render_rag_prompt,
    render_rewrite_prompt,
    render_summary_prompt,
)
from srsa.router import route
from srsa.search import cache_key

log = logging.getLogger(__name__)


class PlanningStop(str, enum.Enum):
    SUFFICIENT = "sufficient"
    MAX_ITERATIONS = "max_iterations"


@dataclass
class PlanningState:
    current_query: str
    iteration: int = 1
    first_step_hits: SearchResponse | None = None
    step_summaries: list[tuple[int, str]] = field(default_factory=list)
    stop_reason: PlanningStop | None = None

    @property
    def memory(self) -> list[tuple[int, str]]:
        # compressed results of every iteration after the first, in order
        return list(self.step_summaries)


def _search_or_empty(ctx: AgentContext, query: str, trace: TranscriptRecorder | None) -> SearchResponse:
    request = ctx.request(query)
    try:
        return ctx.search.search(request, trace)
    except GatewayError as exc:
        if trace is not None:
            trace.decision("search_error", query=query, error=type(exc).__name__, message=str(exc))
        return SearchResponse(cache_key(request))


def direct_search(
    ctx: AgentContext, query: QueryRecord, choice: StrategyChoice, trace: TranscriptRecorder | None = None
) -> SupportingDocuments:
    rephrased = extract_search_query(choice.suggestions)
    if not rephrased:
        prompt = render_rewrite_prompt(query, now_context(ctx.clock), ctx.templates)
        rephrased = extract_search_query(ctx.llm.generate(prompt, ctx.config.gen_params, trace)) or query.text
    if trace is not None:
        trace.decision("rephrased_query", query=rephrased)
    response = ctx.search.search(ctx.request(rephrased), trace)
    return SupportingDocuments((Section("direct", response.hits),))


def parallel_search(
    ctx: AgentContext, query: QueryRecord, choice: StrategyChoice, trace: TranscriptRecorder | None = None
) -> SupportingDocuments:
    rephrased = extract_search_query(choice.suggestions) or query.text
    prompt = render_parallel_prompt(rephrased, choice.suggestions, ctx.templates)
    raw = ctx.llm.generate(prompt, ctx.config.gen_params, trace)
    outcome = parse_subquestions(raw, ctx.config.max_subquestions)
    if trace is not None:
        trace.record(Parse("subquestions", raw, outcome.ok, outcome.value, outcome.reason))
    if not outcome.ok:
        if trace is not None:
            trace.decision("degrade_to_direct", reason=outcome.reason, query=query.text)
        response = ctx.search.search(ctx.request(query.text), trace)
        return SupportingDocuments((Section("direct (degraded)", response.hits),))

    subquestions = outcome.value
    requests = [ctx.request(q) for q in subquestions]

    def fetch(request):
        try:
            return ctx.search.fetch(request)
        except GatewayError as exc:
            return exc

    workers = max(1, min(ctx.config.search_workers, len(requests)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(fetch, requests))

    # events and sections follow sub-question order, not completion order
    sections = []
    for i, (request, result) in enumerate(zip(requests, results), 1):
        label = f"sub-question {i}: {request.query}"
        if isinstance(result, GatewayError):
            if trace is not None:
                trace.decision("search_error", query=request.query, error=type(result).__name__, message=str(result))
            sections.append(Section(label))
            continue
        if trace is not None:
            trace.record(SearchCall(request, result))
        sections.append(Section(label, result.hits))
    return SupportingDocuments(tuple(sections))


def run_planning(
    ctx: AgentContext, query: QueryRecord, choice: StrategyChoice, trace: TranscriptRecorder | None = None
) -> tuple[SupportingDocuments, PlanningState]:
    max_iter = ctx.config.max_iterations
    state = PlanningState(current_query=extract_search_query(choice.suggestions) or query.text)
    state.first_step_hits = _search_or_empty(ctx, state.current_query, trace)
    first = state.first_step_hits.hits
    latest_hits = first

    while True:
        i = state.iteration
        if i >= 2:
            prompt = render_summary_prompt(query, state.current_query, latest_hits, ctx.templates)
            summary = ctx.llm.generate(prompt, ctx.config.gen_params, trace).strip()
            state.step_summaries.append((i, summary))

        prompt = render_planning_prompt(
            query, choice.suggestions, i, max_iter, state.current_query, first, state.memory, ctx.templates
        )
        raw = ctx.llm.generate(prompt, ctx.config.gen_params, trace)
        outcome = parse_planning_decision(raw)
        if trace is not None:
            trace.record(Parse("planning_decision", raw, outcome.ok, to_data(outcome.value), outcome.reason))

        if not outcome.ok:
            # unreadable reasoning: answer with what we have rather than loop blind
            if trace is not None:
                trace.decision("planning_failsafe", iteration=i, reason=outcome.reason)
            state.stop_reason = PlanningStop.SUFFICIENT
            break
        decision = outcome.value
        if decision.sufficient:
            state.stop_reason = PlanningStop.SUFFICIENT
            break
        if i >= max_iter:
            state.stop_reason = PlanningStop.MAX_ITERATIONS
            break

        if decision.rewritten_query:
            next_query, source = decision.rewritten_query, "rewrite"
        elif decision.explore_points:
            next_query, source = decision.explore_points[0], "explore"
        else:
            next_query, source = state.current_query, "repeat"
        if trace is not None:
            trace.decision("planning_next", iteration=i + 1, query=next_query, source=source)
        state.current_query = next_query
        state.iteration += 1
        latest_hits = _search_or_empty(ctx, next_query, trace).hits

    if trace is not None:
        trace.decision("planning_stop", iterations=state.iteration, stop_reason=state.stop_reason.value)
    sections = [Section("first step", first)]
    sections += [Section(f"iteration {i} summary", summary=text) for i, text in state.step_summaries]
    return SupportingDocuments(tuple(sections)), state


def planning_search(
    ctx: AgentContext, query: QueryRecord, choice: StrategyChoice, trace: TranscriptRecorder | None = None
) -> SupportingDocuments:
    return run_planning(ctx, query, choice, trace)[0]


STRATEGIES = {
    Strategy.DIRECT: direct_search,
    Strategy.PARALLEL: parallel_search,
    Strategy.PLANNING: planning_search,
}


def final_answer(
    ctx: AgentContext, query: QueryRecord, docs: SupportingDocuments, trace: TranscriptRecorder | None = None
) -> str:
    return ctx.llm.generate(render_rag_prompt(query, docs, ctx.templates), ctx.config.gen_params, trace)


def _documents_summary(docs: SupportingDocuments) -> list[dict]:
    return [
        {"label": s.label, "hits": len(s.hits), "summary": s.summary is not None}
        for s in docs.sections
    ]


def run_srsa(ctx: AgentContext, query: QueryRecord) -> AgentAnswer:
    trace = TranscriptRecorder(query.id, AgentKind.SRSA, ctx.templates.digest)
    try:
        time = now_context(ctx.clock)
        trace.decision("time_context", **to_data(time))
        choice = route(ctx, query, time, trace)
        docs = STRATEGIES[choice.strategy](ctx, query, choice, trace)
        trace.decision("documents", sections=_documents_summary(docs))
        answer = final_answer(ctx, query, docs, trace)
    except GatewayError as exc:
        log.warning("SRSA run for %s stopped on backend error: %s", query.id, exc)
        trace.decision("backend_error", error=type(exc).__name__, message=str(exc))
        return AgentAnswer("", trace.finish("", StopReason.BACKEND_ERROR))
    return AgentAnswer(answer, trace.finish(answer, StopReason.COMPLETED))
