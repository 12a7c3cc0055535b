from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime
from typing import Callable

from srsa.core import Depth, GenParams, SearchRequest, Topic
from srsa.llm import LLMGateway, system_clock
from srsa.protocol import DEFAULT_MAX_SUBQUESTIONS, TemplateSet, default_templates
from srsa.search import SearchGateway


@dataclass
class AgentConfig:
    max_iterations: int = 5
    max_subquestions: int = DEFAULT_MAX_SUBQUESTIONS
    search_depth: Depth = Depth.ADVANCED
    search_topic: Topic = Topic.GENERAL
    max_results: int = 5
    search_workers: int = 4
    gen_params: GenParams = field(default_factory=GenParams)

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.max_subquestions < 1:
            raise ValueError("max_subquestions must be >= 1")


@dataclass
class AgentContext:
    """Everything an agent run needs besides the query itself."""

    llm: LLMGateway
    search: SearchGateway
    templates: TemplateSet = field(default_factory=default_templates)
    config: AgentConfig = field(default_factory=AgentConfig)
    clock: Callable[[], datetime] = system_clock

    def request(self, query: str) -> SearchRequest:
        cfg = self.config
        return SearchRequest(query, cfg.search_depth, cfg.search_topic, cfg.max_results)
