"""Domain types, canonical encoding and content digests.

Every record type is a frozen dataclass. ``to_data``/``from_data`` map them to
plain JSON values and back; ``canonical_bytes`` is the compact, key-sorted
encoding used for cache keys and digests.
"""

from __future__ import annotations

import dataclasses
import enum
import hashlib
import json
import math
import threading
import typing
from dataclasses import dataclass, field
from typing import Any, Union

DIGEST_HEX_LEN = 64


class Domain(str, enum.Enum):
    SHOPPING = "shopping"
    RESEARCH = "research"
    TRAVEL = "travel"
    DIGITAL_DEVICES = "digital_devices"
    OTHER = "other"


class Strategy(str, enum.Enum):
    DIRECT = "Direct"
    PARALLEL = "Parallel"
    PLANNING = "Planning"


class Depth(str, enum.Enum):
    BASIC = "basic"
    ADVANCED = "advanced"


class Topic(str, enum.Enum):
    GENERAL = "general"
    NEWS = "news"


class AgentKind(str, enum.Enum):
    SRSA = "SRSA"
    SIMPLE = "Simple"
    REACT = "ReAct"

    @classmethod
    def parse(cls, name: str) -> AgentKind:
        for kind in cls:
            if kind.value.lower() == name.strip().lower():
                return kind
        raise ValueError(f"unknown agent kind: {name!r}")


class StopReason(str, enum.Enum):
    COMPLETED = "completed"
    MAX_ITERATIONS = "max_iterations"
    BACKEND_ERROR = "backend_error"


@dataclass(frozen=True)
class QueryRecord:
    id: str
    domain: Domain
    text: str
    asked_at: str | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("QueryRecord.id must be non-empty")
        if not self.text.strip():
            raise ValueError("QueryRecord.text must be non-empty")


@dataclass(frozen=True)
class StrategyChoice:
    strategy: Strategy
    suggestions: str = ""
    fallback_applied: bool = False

    def __post_init__(self) -> None:
        if self.fallback_applied and self.strategy is not Strategy.DIRECT:
            raise ValueError("fallback choice must be Direct")


@dataclass(frozen=True)
class GenParams:
    temperature: float = 0.0
    n_responses: int = 1
    max_tokens: int | None = None

    def __post_init__(self) -> None:
        if self.n_responses < 1:
            raise ValueError("n_responses must be positive")
        if self.max_tokens is not None and self.max_tokens < 1:
            raise ValueError("max_tokens must be positive when set")


@dataclass(frozen=True)
class PromptText:
    """A fixed instruction (``system``) plus the variable inputs (``user``)."""

    system: str
    user: str

    def __post_init__(self) -> None:
        if not self.system:
            raise ValueError("PromptText.system must be non-empty")


@dataclass(frozen=True)
class SearchRequest:
    query: str
    depth: Depth = Depth.ADVANCED
    topic: Topic = Topic.GENERAL
    max_results: int = 5

    def __post_init__(self) -> None:
        if not self.query.strip():
            raise ValueError("SearchRequest.query must be non-empty")
        if self.max_results < 1:
            raise ValueError("max_results must be >= 1")


@dataclass(frozen=True)
class SearchHit:
    title: str
    url: str
    content: str
    score: float = 0.0

    def __post_init__(self) -> None:
        if not self.url:
            raise ValueError("SearchHit.url must be non-empty")
        if not self.content:
            raise ValueError("SearchHit.content must be non-empty")
        if not math.isfinite(self.score):
            raise ValueError("SearchHit.score must be finite")


@dataclass(frozen=True)
class SearchResponse:
    request_digest: str
    hits: tuple[SearchHit, ...] = ()
    answered_at: str = ""
    from_cache: bool = False


@dataclass(frozen=True)
class Section:
    """One labelled block of supporting material: either hits or a summary."""

    label: str
    hits: tuple[SearchHit, ...] = ()
    summary: str | None = None

    def __post_init__(self) -> None:
        if self.summary is not None and self.hits:
            raise ValueError("a section holds hits or a summary, not both")


@dataclass(frozen=True)
class SupportingDocuments:
    sections: tuple[Section, ...] = ()

    def __post_init__(self) -> None:
        labels = [s.label for s in self.sections]
        if len(labels) != len(set(labels)):
            raise ValueError(f"duplicate section labels: {labels}")

    @property
    def is_empty(self) -> bool:
        return all(not s.hits and not s.summary for s in self.sections)


@dataclass(frozen=True)
class LlmCall:
    prompt: PromptText
    params: GenParams
    completion: str
    attempts: int = 1
    event: str = "llm_call"


@dataclass(frozen=True)
class SearchCall:
    request: SearchRequest
    response: SearchResponse
    event: str = "search_call"


@dataclass(frozen=True)
class Parse:
    kind: str
    raw: str
    ok: bool
    value: Any = None
    reason: str | None = None
    event: str = "parse"


@dataclass(frozen=True)
class Decision:
    kind: str
    payload: Any = None
    event: str = "decision"


Event = Union[LlmCall, SearchCall, Parse, Decision]
_EVENT_TYPES: dict[str, type] = {"llm_call": LlmCall, "search_call": SearchCall, "parse": Parse, "decision": Decision}


@dataclass(frozen=True)
class Transcript:
    query_id: str
    agent_kind: AgentKind
    events: tuple[Event, ...] = ()
    final_answer: str = ""
    stop_reason: StopReason = StopReason.COMPLETED
    template_digest: str = ""

    def llm_calls(self) -> list[LlmCall]:
        return [e for e in self.events if isinstance(e, LlmCall)]

    def search_calls(self) -> list[SearchCall]:
        return [e for e in self.events if isinstance(e, SearchCall)]

    def decisions(self, kind: str | None = None) -> list[Decision]:
        return [e for e in self.events if isinstance(e, Decision) and (kind is None or e.kind == kind)]


METRICS = ("informativeness", "completeness", "novelty", "actionability")


@dataclass(frozen=True)
class JudgeScores:
    agent: str
    informativeness: int
    completeness: int
    novelty: int
    actionability: int
    justifications: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for metric in METRICS:
            value = getattr(self, metric)
            if isinstance(value, bool) or not isinstance(value, int) or not 0 <= value <= 5:
                raise ValueError(f"{metric} must be an integer in [0, 5], got {value!r}")

    def score(self, metric: str) -> int:
        return getattr(self, metric)


@dataclass(frozen=True)
class AgentAnswer:
    answer: str
    transcript: Transcript


class TranscriptRecorder:
    """Append-only event log for one agent run; safe to share between threads."""

    def __init__(self, query_id: str, agent_kind: AgentKind | None, template_digest: str = "") -> None:
        self.query_id = query_id
        self.agent_kind = agent_kind
        self.template_digest = template_digest
        self._events: list[Event] = []
        self._lock = threading.Lock()

    def record(self, event: Event) -> None:
        with self._lock:
            self._events.append(event)

    def decision(self, kind: str, **payload: Any) -> None:
        self.record(Decision(kind, payload))

    @property
    def events(self) -> tuple[Event, ...]:
        with self._lock:
            return tuple(self._events)

    def finish(self, final_answer: str, stop_reason: StopReason = StopReason.COMPLETED) -> Transcript:
        return Transcript(
            query_id=self.query_id,
            agent_kind=self.agent_kind,
            events=self.events,
            final_answer=final_answer,
            stop_reason=stop_reason,
            template_digest=self.template_digest,
        )


# -- encoding -----------------------------------------------------------------

_hints_cache: dict[type, dict[str, Any]] = {}


def _hints(cls: type) -> dict[str, Any]:
    if cls not in _hints_cache:
        _hints_cache[cls] = typing.get_type_hints(cls)
    return _hints_cache[cls]


def to_data(value: Any) -> Any:
    """Convert a core value into plain JSON-compatible data (dataclass field order kept)."""
    if isinstance(value, enum.Enum):
        return value.value
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {f.name: to_data(getattr(value, f.name)) for f in dataclasses.fields(value)}
    if isinstance(value, (list, tuple)):
        return [to_data(v) for v in value]
    if isinstance(value, dict):
        return {str(k): to_data(v) for k, v in value.items()}
    return value


def _from(tp: Any, data: Any) -> Any:
    if tp is Any:
        return data
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if tp is Event or (origin is Union and set(args) == set(_EVENT_TYPES.values())):
        return from_data(_EVENT_TYPES[data["event"]], data)
    if origin is Union or type(tp).__name__ == "UnionType":
        if data is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)]
        return _from(inner[0], data)
    if origin is tuple:
        return tuple(_from(args[0], v) for v in data)
    if origin is list:
        return [_from(args[0], v) for v in data]
    if origin is dict:
        return {k: _from(args[1], v) for k, v in data.items()}
    if isinstance(tp, type) and issubclass(tp, enum.Enum):
        return tp(data)
    if isinstance(tp, type) and dataclasses.is_dataclass(tp):
        return from_data(tp, data)
    if tp is float:
        return float(data)
    return data


def from_data(cls: type, data: dict[str, Any]) -> Any:
    """Rebuild a core dataclass from ``to_data`` output."""
    hints = _hints(cls)
    kwargs = {f.name: _from(hints[f.name], data[f.name]) for f in dataclasses.fields(cls) if f.name in data}
    return cls(**kwargs)


_REGISTRY: dict[str, type] = {
    cls.__name__: cls
    for cls in (
        QueryRecord,
        StrategyChoice,
        GenParams,
        PromptText,
        SearchRequest,
        SearchHit,
        SearchResponse,
        Section,
        SupportingDocuments,
        LlmCall,
        SearchCall,
        Parse,
        Decision,
        Transcript,
        JudgeScores,
    )
}


def canonical_bytes(value: Any) -> bytes:
    """Deterministic byte encoding of a core value, tagged with its type name."""
    envelope = {"type": type(value).__name__, "value": to_data(value)}
    return json.dumps(envelope, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False).encode(
        "utf-8"
    )


def decode_canonical(blob: bytes) -> Any:
    envelope = json.loads(blob.decode("utf-8"))
    return from_data(_REGISTRY[envelope["type"]], envelope["value"])


def content_digest(value: Any) -> str:
    return hashlib.sha256(canonical_bytes(value)).hexdigest()


def dump_json(value: Any) -> str:
    """Human-readable JSON for files on disk (runs/, cache/)."""
    return json.dumps(to_data(value), indent=2, ensure_ascii=False) + "\n"


def load_json(cls: type, text: str) -> Any:
    return from_data(cls, json.loads(text))
