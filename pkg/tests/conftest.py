from __future__ import annotations

import json
import os
from pathlib import Path

import pytest

from srsa.context import AgentConfig, AgentContext
from srsa.core import Domain, QueryRecord, SearchHit
from srsa.llm import LLMGateway, ScriptedLLM, fixed_clock
from srsa.search import MockSearchBackend, SearchCache, SearchGateway

TESTS = Path(__file__).parent
GOLDEN = TESTS / "golden"
SCRIPTS = TESTS / "fixtures" / "scripts"
CLOCK = "2024-07-01T09:00:00+00:00"


def hit(n: int | str, query: str = "q") -> SearchHit:
    return SearchHit(title=f"title {n}", url=f"https://example.org/{query}/{n}", content=f"content {n} for {query}", score=0.5)


def make_ctx(
    completions=(),
    fixtures: dict | None = None,
    cache_dir: Path | None = None,
    **config,
) -> tuple[AgentContext, ScriptedLLM, MockSearchBackend]:
    stub = ScriptedLLM(completions)
    backend = MockSearchBackend(fixtures or {})
    clock = fixed_clock(CLOCK)
    search = SearchGateway(backend, SearchCache(cache_dir) if cache_dir else None, clock=clock, sleep=lambda s: None)
    ctx = AgentContext(LLMGateway(stub, sleep=lambda s: None), search, config=AgentConfig(**config), clock=clock)
    return ctx, stub, backend


@pytest.fixture
def query() -> QueryRecord:
    return QueryRecord(
        "q-test",
        Domain.TRAVEL,
        "I'm in New York next Saturday and it will rain all day. We like art and coffee. What should we do?",
    )


def load_golden_json(name: str):
    return json.loads((GOLDEN / name).read_text(encoding="utf-8"))


# -- golden end-to-end paths ---------------------------------------------------------

GOLDEN_PATHS = {
    "srsa_direct": ("srsa", "q-direct", "shopping",
                    "I edit photos and play games and want a 34-inch ultrawide for about $600. Which one?"),
    "srsa_parallel": ("srsa", "q-parallel", "travel",
                      "Should I take the train or fly from Boston to New York next month?"),
    "srsa_planning": ("srsa", "q-planning", "travel",
                      "I'm in New York next Saturday and it will rain all day. We like art and coffee. What should we do?"),
    "simple": ("simple", "q-simple", "digital_devices",
               "My Pixel 7 battery drains overnight when idle. Why, and how do I fix it?"),
    "react": ("react", "q-react", "travel", "Plan three days in Lisbon for a first visit."),
}
REGEN_GOLDEN = os.environ.get("SRSA_REGEN_GOLDEN") == "1"


def strip_wall_clock(data):
    """Drop ``answered_at`` anywhere in a JSON tree; it is the only wall-clock field."""
    if isinstance(data, dict):
        return {k: strip_wall_clock(v) for k, v in data.items() if k != "answered_at"}
    if isinstance(data, list):
        return [strip_wall_clock(v) for v in data]
    return data


def run_golden_path(name: str, workdir: Path) -> tuple[int, bytes]:
    """Run one scripted path through ``srsa ask`` and return (exit code, normalized transcript bytes)."""
    from srsa.cli import main

    agent, qid, domain, text = GOLDEN_PATHS[name]
    out = workdir / name
    code = main([
        "ask", text, "--agent", agent, "--id", qid, "--domain", domain, "--out", str(out),
        "--cache-dir", str(workdir / f"cache-{name}"), "--stub-script", str(SCRIPTS / f"{name}.json"),
    ])
    (path,) = out.glob("*.json")
    data = strip_wall_clock(json.loads(path.read_text(encoding="utf-8")))
    return code, (json.dumps(data, indent=2, ensure_ascii=False, sort_keys=True) + "\n").encode("utf-8")


def golden_transcript_path(name: str) -> Path:
    return GOLDEN / "transcripts" / f"{name}.json"


# -- acceptance reporting ----------------------------------------------------------------

ACCEPTANCE_RESULTS: dict[int, tuple[str, bool, str]] = {}


def record_acceptance(number: int, title: str, ok: bool, detail: str = "") -> None:
    ACCEPTANCE_RESULTS[number] = (title, ok, detail)
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}" + (f" ({detail})" if detail else "")
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        title, ok, detail = ACCEPTANCE_RESULTS[number]
        suffix = f" ({detail})" if detail else ""
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}{suffix}")
