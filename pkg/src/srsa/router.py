from __future__ import annotations

from srsa.context import AgentContext
from srsa.core import Parse, QueryRecord, StrategyChoice, TranscriptRecorder, to_data
from srsa.llm import TimeContext
from srsa.protocol import parse_router_output, render_router_prompt


def route(
    ctx: AgentContext, query: QueryRecord, time: TimeContext, trace: TranscriptRecorder | None = None
) -> StrategyChoice:
    """Classify ``query`` with a single model call.

    Malformed output is never retried: it falls back to Direct, which is how
    weak instruction followers end up behaving in practice.
    """
    prompt = render_router_prompt(query, time, ctx.templates)
    raw = ctx.llm.generate(prompt, ctx.config.gen_params, trace)
    choice = parse_router_output(raw)
    if trace is not None:
        trace.record(
            Parse(
                "router",
                raw,
                ok=not choice.fallback_applied,
                value=to_data(choice),
                reason="no valid STRATEGY line; Direct imposed" if choice.fallback_applied else None,
            )
        )
        trace.decision(
            "route",
            strategy=choice.strategy.value,
            suggestions=choice.suggestions,
            fallback_applied=choice.fallback_applied,
        )
    return choice
