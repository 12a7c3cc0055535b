"""Command-line entry point: ask, batch, judge, report, cache."""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

from srsa.baselines import run_react, run_simple
from srsa.context import AgentConfig, AgentContext
from srsa.core import (
    AgentAnswer,
    AgentKind,
    Domain,
    QueryRecord,
    StopReason,
    Transcript,
    dump_json,
    load_json,
    to_data,
)
from srsa.dataset import DatasetError, dump_cqed, load_cqed
from srsa.evalkit.judge import ExampleBank, QuestionJudgement, judge_question
from srsa.evalkit.report import build_report
from srsa.llm import HttpChatBackend, LLMGateway, ScriptedLLM, fixed_clock, now_context, system_clock
from srsa.protocol import TemplateSet, render_react_rephrase_prompt, render_router_prompt
from srsa.search import MockSearchBackend, SearchCache, SearchGateway, TavilyBackend, TAVILY_ENDPOINT
from srsa.strategies import run_srsa

log = logging.getLogger("srsa")

DEFAULT_LLM_ENDPOINT = "https://api.openai.com/v1/chat/completions"
DEFAULT_LLM_MODEL = "gpt-4o-mini"
ENV_KEYS = {
    "llm_endpoint": "LLM_ENDPOINT",
    "llm_api_key": "LLM_API_KEY",
    "llm_model": "LLM_MODEL",
    "search_endpoint": "SEARCH_ENDPOINT",
    "search_api_key": "SEARCH_API_KEY",
}
DEFAULTS: dict[str, Any] = {
    "llm_endpoint": DEFAULT_LLM_ENDPOINT,
    "llm_api_key": None,
    "llm_model": DEFAULT_LLM_MODEL,
    "search_endpoint": TAVILY_ENDPOINT,
    "search_api_key": None,
    "retries": 3,
    "timeout": 60.0,
    "cache_dir": "cache",
    "max_iterations": 5,
    "jobs": 4,
    "template_dir": None,
    "seed": 0,
}
RUNNERS: dict[AgentKind, Callable[..., AgentAnswer]] = {
    AgentKind.SRSA: run_srsa,
    AgentKind.SIMPLE: run_simple,
    AgentKind.REACT: lambda ctx, query: run_react(ctx, query, ctx.config.max_iterations),
}


class ConfigError(Exception):
    """Unusable configuration; exits with status 2."""


def resolve_config(args: argparse.Namespace, environ: dict[str, str] | None = None) -> dict[str, Any]:
    """Merge settings with precedence flags > environment > config file > defaults."""
    environ = os.environ if environ is None else environ
    config = dict(DEFAULTS)
    if getattr(args, "config", None):
        config.update(json.loads(Path(args.config).read_text(encoding="utf-8")))
    for key, var in ENV_KEYS.items():
        if environ.get(var):
            config[key] = environ[var]
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            config[key] = value
    return config


def redacted(config: dict[str, Any]) -> dict[str, Any]:
    return {k: ("***" if k.endswith("api_key") and v else v) for k, v in config.items()}


@dataclass
class StubScript:
    llm: list[str] = field(default_factory=list)
    runs: dict[str, list[str]] = field(default_factory=dict)
    judge: list[str] | dict[str, list[str]] = field(default_factory=list)
    search: dict[str, list[dict]] = field(default_factory=dict)
    clock: str | None = None

    @classmethod
    def load(cls, path: str | os.PathLike) -> StubScript:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            llm=list(data.get("llm", [])),
            runs={k: list(v) for k, v in data.get("runs", {}).items()},
            judge=data.get("judge", []),
            search=dict(data.get("search", {})),
            clock=data.get("clock"),
        )

    def completions_for(self, query_id: str, agent: str) -> list[str]:
        """Script for one batch run: ``"<id>/<agent>"`` beats ``"<agent>"`` beats the shared ``llm`` list."""
        for key in (f"{query_id}/{agent}", agent):
            if key in self.runs:
                return list(self.runs[key])
        return list(self.llm)


class Backends:
    """Builds gateways for either real HTTP backends or a stub script."""

    def __init__(self, config: dict[str, Any], stub: StubScript | None, use_cache: bool = True) -> None:
        self.config = config
        self.stub = stub
        self.clock = fixed_clock(stub.clock) if stub and stub.clock else system_clock
        if stub is None:
            for key in ("llm_api_key", "search_api_key"):
                if not config.get(key):
                    raise ConfigError(f"{ENV_KEYS[key]} is not set; export it or pass --stub-script")
            self._http_llm = HttpChatBackend(
                config["llm_endpoint"], config["llm_api_key"], config["llm_model"], float(config["timeout"])
            )
            search_backend = TavilyBackend(config["search_api_key"], config["search_endpoint"], float(config["timeout"]))
        else:
            search_backend = MockSearchBackend.from_data(stub.search)
        cache = SearchCache(config["cache_dir"]) if config.get("cache_dir") else None
        self.search = SearchGateway(
            search_backend, cache, use_cache=use_cache, retries=int(config["retries"]), clock=self.clock
        )
        self.templates = TemplateSet(config.get("template_dir"))
        self.agent_config = AgentConfig(max_iterations=int(config["max_iterations"]))

    def llm(self, completions: list[str] | None = None) -> LLMGateway:
        if self.stub is not None:
            return LLMGateway(ScriptedLLM(completions or []), retries=int(self.config["retries"]))
        return LLMGateway(self._http_llm, retries=int(self.config["retries"]))

    def context(self, llm: LLMGateway) -> AgentContext:
        return AgentContext(llm, self.search, self.templates, self.agent_config, self.clock)


def transcript_path(out_dir: Path, query_id: str, kind: AgentKind) -> Path:
    return out_dir / f"{query_id}.{kind.value}.json"


def write_transcript(out_dir: Path, transcript: Transcript) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = transcript_path(out_dir, transcript.query_id, transcript.agent_kind)
    tmp = path.with_suffix(".json.tmp")
    tmp.write_text(dump_json(transcript), encoding="utf-8")
    os.replace(tmp, path)
    return path


def read_transcript(path: Path) -> Transcript:
    return load_json(Transcript, path.read_text(encoding="utf-8"))


def _agent_list(text: str) -> list[AgentKind]:
    try:
        return [AgentKind.parse(a) for a in text.split(",") if a.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


# -- commands ----------------------------------------------------------------------


def cmd_ask(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    kind = AgentKind.parse(args.agent)
    query_id = args.id or "ask-" + hashlib.sha256(args.query.encode("utf-8")).hexdigest()[:12]
    query = QueryRecord(query_id, Domain(args.domain), args.query)
    stub = StubScript.load(args.stub_script) if args.stub_script else None

    if args.dry_run:
        templates = TemplateSet(config.get("template_dir"))
        clock = fixed_clock(stub.clock) if stub and stub.clock else system_clock
        if kind is AgentKind.SRSA:
            prompt = render_router_prompt(query, now_context(clock), templates)
        elif kind is AgentKind.REACT:
            prompt = render_react_rephrase_prompt(query, templates)
        else:
            print(json.dumps({"search_query": query.text}, ensure_ascii=False))
            return 0
        print(f"[system]\n{prompt.system}\n\n[user]\n{prompt.user}")
        return 0

    backends = Backends(config, stub, use_cache=not args.no_cache)
    ctx = backends.context(backends.llm(stub.llm if stub else None))
    result = RUNNERS[kind](ctx, query)
    path = write_transcript(Path(args.out), result.transcript)
    if result.transcript.stop_reason is StopReason.BACKEND_ERROR:
        err = result.transcript.decisions("backend_error")
        detail = err[-1].payload if err else {}
        print(json.dumps({"error": "backend_error", **detail, "transcript": str(path)}), file=sys.stderr)
        return 1
    print(result.answer)
    print(f"\ntranscript: {path}")
    return 0


def _run_one(backends: Backends, stub: StubScript | None, record: QueryRecord, kind: AgentKind, out: Path) -> dict:
    completions = stub.completions_for(record.id, kind.value) if stub else None
    ctx = backends.context(backends.llm(completions))
    try:
        result = RUNNERS[kind](ctx, record)
    except Exception as exc:  # isolate per-run failures; the batch goes on
        log.exception("run %s/%s crashed", record.id, kind.value)
        return {"query_id": record.id, "agent": kind.value, "status": "crashed", "error": repr(exc)}
    write_transcript(out, result.transcript)
    status = "failed" if result.transcript.stop_reason is StopReason.BACKEND_ERROR else "completed"
    return {"query_id": record.id, "agent": kind.value, "status": status}


def _is_complete(path: Path) -> bool:
    if not path.exists():
        return False
    try:
        return read_transcript(path).stop_reason is not StopReason.BACKEND_ERROR
    except (ValueError, KeyError, TypeError):
        return False


def cmd_batch(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    try:
        records = load_cqed(args.dataset)
    except (DatasetError, OSError) as exc:
        print(f"error: cannot load dataset: {exc}", file=sys.stderr)
        return 1
    stub = StubScript.load(args.stub_script) if args.stub_script else None
    backends = Backends(config, stub, use_cache=not args.no_cache)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "dataset.jsonl").write_text(dump_cqed(records), encoding="utf-8")
    effective = redacted(config) | {
        "agents": [a.value for a in args.agents],
        "dataset": str(args.dataset),
        "stub_script": args.stub_script,
        "no_cache": args.no_cache,
        "template_digest": backends.templates.digest,
    }
    (out / "config.json").write_text(json.dumps(effective, indent=2) + "\n", encoding="utf-8")

    pending, skipped = [], []
    for record in records:
        for kind in args.agents:
            if not args.force and _is_complete(transcript_path(out, record.id, kind)):
                skipped.append({"query_id": record.id, "agent": kind.value, "status": "skipped"})
            else:
                pending.append((record, kind))
    with ThreadPoolExecutor(max_workers=max(1, int(config["jobs"]))) as pool:
        results = list(pool.map(lambda rk: _run_one(backends, stub, rk[0], rk[1], out), pending))

    failures = [r for r in results if r["status"] != "completed"]
    summary = {
        "runs_total": len(records) * len(args.agents),
        "completed": sum(r["status"] == "completed" for r in results),
        "skipped_already_complete": len(skipped),
        "failed": failures,
        "search_backend_calls": backends.search.backend_calls,
        "search_cache_hits": backends.search.cache_hits,
    }
    (out / "batch_summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    print(json.dumps(summary, indent=2))
    return 0


def _collect_answers(run_dir: Path, record: QueryRecord) -> tuple[dict[str, str], str | None] | None:
    answers: dict[str, str] = {}
    strategy = None
    for kind in AgentKind:
        path = transcript_path(run_dir, record.id, kind)
        if not path.exists():
            return None
        transcript = read_transcript(path)
        if transcript.stop_reason is StopReason.BACKEND_ERROR or not transcript.final_answer.strip():
            return None
        answers[kind.value] = transcript.final_answer
        if kind is AgentKind.SRSA:
            routed = transcript.decisions("route")
            strategy = routed[0].payload["strategy"] if routed else None
    return answers, strategy


def cmd_judge(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    if args.judge_model:
        config["llm_model"] = args.judge_model
    run_dir = Path(args.run_dir)
    try:
        records = load_cqed(run_dir / "dataset.jsonl")
    except (DatasetError, OSError) as exc:
        print(f"error: cannot load run dataset: {exc}", file=sys.stderr)
        return 1
    stub = StubScript.load(args.stub_script) if args.stub_script else None
    backends = Backends(config, stub)
    bank = ExampleBank.load(args.bank)

    shared_llm = None
    jobs = max(1, int(config["jobs"]))
    if stub is None:
        shared_llm = backends.llm()
    elif isinstance(stub.judge, list):
        # one FIFO for all questions only stays deterministic when sequential
        shared_llm, jobs = backends.llm(list(stub.judge)), 1

    work, skipped = [], []
    for record in records:
        collected = _collect_answers(run_dir, record)
        if collected is None:
            skipped.append(record.id)
        else:
            work.append((record, *collected))

    def judge_one(item) -> QuestionJudgement:
        record, answers, strategy = item
        llm = shared_llm or backends.llm(list(stub.judge.get(record.id, [])))
        try:
            result = judge_question(llm, record, answers, bank, config["seed"], backends.templates)
        except Exception as exc:
            log.warning("judging %s failed: %s", record.id, exc)
            result = QuestionJudgement(record.id, False)
        result.srsa_strategy = strategy
        return result

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        judgements = list(pool.map(judge_one, work))

    judge_dir = run_dir / "judge"
    judge_dir.mkdir(exist_ok=True)
    for j in judgements:
        (judge_dir / f"{j.query_id}.json").write_text(
            json.dumps({"query_id": j.query_id, "events": to_data(j.events)}, indent=2, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )
    scores = {
        "version": 1,
        "seed": config["seed"],
        "bank_size": len(bank.examples),
        "questions": [j.to_record() for j in judgements],
        "skipped_missing_answers": skipped,
        "unjudged": [j.query_id for j in judgements if not j.judged],
    }
    out = Path(args.out) if args.out else run_dir / "scores.json"
    out.write_text(json.dumps(scores, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    print(f"judged {sum(j.judged for j in judgements)} of {len(records)} questions "
          f"({len(scores['unjudged'])} unjudged, {len(skipped)} skipped); scores: {out}")
    return 0


def load_scores(path: str | os.PathLike) -> tuple[list[QuestionJudgement], int, int]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    questions = [QuestionJudgement.from_record(q) for q in data["questions"]]
    return questions, len(data.get("unjudged", [])), len(data.get("skipped_missing_answers", []))


def cmd_report(args: argparse.Namespace) -> int:
    questions, unjudged, skipped = load_scores(args.scores)
    pairs = [tuple(args.compare)] if args.compare else None
    try:
        doc = build_report(questions, pairs, unjudged, skipped)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    doc.write(args.out)
    print(doc.text, end="")
    return 0


def cmd_cache(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    cache = SearchCache(config["cache_dir"])
    if args.action == "clear":
        print(f"removed {cache.clear()} cached responses from {cache.root}")
    else:
        print(f"{len(cache)} cached responses in {cache.root}")
    return 0


# -- parser -------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="srsa", description="Strategy-router search agent and evaluation kit.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON config file (lowest precedence after defaults)")
        p.add_argument("--cache-dir", dest="cache_dir")
        p.add_argument("--template-dir", dest="template_dir")
        p.add_argument("--jobs", type=int)
        p.add_argument("--stub-script", dest="stub_script", help="JSON script for the scripted LLM and mock search")

    ask = sub.add_parser("ask", help="run one query through an agent")
    common(ask)
    ask.add_argument("query")
    ask.add_argument("--agent", default="srsa", choices=["srsa", "simple", "react"])
    ask.add_argument("--id", help="query id used for the transcript file name")
    ask.add_argument("--domain", default="other", choices=[d.value for d in Domain])
    ask.add_argument("--out", default="runs")
    ask.add_argument("--max-iter", dest="max_iterations", type=int)
    ask.add_argument("--no-cache", action="store_true")
    ask.add_argument("--dry-run", action="store_true", help="print the first prompt and exit without calling backends")
    ask.set_defaults(func=cmd_ask)

    batch = sub.add_parser("batch", help="run agents over a dataset")
    common(batch)
    batch.add_argument("--dataset", required=True)
    batch.add_argument("--agents", type=_agent_list, default=list(AgentKind), help="comma-separated, e.g. srsa,simple")
    batch.add_argument("--agent", dest="agents", type=_agent_list, help=argparse.SUPPRESS)
    batch.add_argument("--out", required=True)
    batch.add_argument("--max-iter", dest="max_iterations", type=int)
    batch.add_argument("--no-cache", action="store_true")
    batch.add_argument("--force", action="store_true", help="rerun pairs that already have a completed transcript")
    batch.set_defaults(func=cmd_batch)

    judge = sub.add_parser("judge", help="score a run directory with the LLM judge")
    common(judge)
    judge.add_argument("run_dir")
    judge.add_argument("--out")
    judge.add_argument("--bank", help="directory of judging examples")
    judge.add_argument("--seed", type=int)
    judge.add_argument("--judge-model", dest="judge_model")
    judge.set_defaults(func=cmd_judge)

    report = sub.add_parser("report", help="win rates, CIs and t-tests from a scores file")
    report.add_argument("scores")
    report.add_argument("--out", default="report")
    report.add_argument("--compare", nargs=2, metavar=("A", "B"), help="e.g. simple react, or direct planning")
    report.set_defaults(func=cmd_report)

    cache = sub.add_parser("cache", help="inspect or clear the search cache")
    cache.add_argument("action", choices=["stats", "clear"])
    cache.add_argument("--cache-dir", dest="cache_dir")
    cache.add_argument("--config")
    cache.set_defaults(func=cmd_cache)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
