"""Strategy-router search agent: routing, search strategies, baselines and evaluation."""

from srsa.core import (
    AgentAnswer,
    AgentKind,
    Domain,
    GenParams,
    QueryRecord,
    SearchHit,
    SearchRequest,
    Strategy,
    StrategyChoice,
    SupportingDocuments,
    Transcript,
    canonical_bytes,
    content_digest,
)

__version__ = "0.1.0"

__all__ = [
    "AgentAnswer",
    "AgentKind",
    "Domain",
    "GenParams",
    "QueryRecord",
    "SearchHit",
    "SearchRequest",
    "Strategy",
    "StrategyChoice",
    "SupportingDocuments",
    "Transcript",
    "canonical_bytes",
    "content_digest",
]
