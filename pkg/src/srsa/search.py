"""Web search gateway with a Tavily-compatible adapter, a mock backend and a flat-file cache."""

from __future__ import annotations

import json
import logging
import os
import tempfile
import threading
import time
from datetime import datetime
from pathlib import Path
from typing import Callable, Iterable, Mapping, Protocol

import httpx

from srsa.core import (
    SearchCall,
    SearchHit,
    SearchRequest,
    SearchResponse,
    TranscriptRecorder,
    content_digest,
    dump_json,
    load_json,
)
from srsa.llm import BackendUnreachable, GatewayError, system_clock

log = logging.getLogger(__name__)

TAVILY_ENDPOINT = "https://api.tavily.com/search"


class QuotaExhausted(GatewayError):
    pass


class MalformedResponse(GatewayError):
    pass


class SearchBackend(Protocol):
    def fetch(self, request: SearchRequest) -> list[SearchHit]: ...


def cache_key(request: SearchRequest) -> str:
    return content_digest(request)


class TavilyBackend:
    def __init__(
        self,
        api_key: str,
        endpoint: str = TAVILY_ENDPOINT,
        timeout: float = 30.0,
        client: httpx.Client | None = None,
    ) -> None:
        self.api_key = api_key
        self.endpoint = endpoint
        self.timeout = timeout
        self._client = client or httpx.Client(timeout=timeout)

    def build_body(self, request: SearchRequest) -> dict:
        return {
            "query": request.query,
            "search_depth": request.depth.value,
            "topic": request.topic.value,
            "max_results": request.max_results,
            "api_key": self.api_key,
        }

    def encode_body(self, request: SearchRequest) -> bytes:
        return json.dumps(self.build_body(request), separators=(",", ":"), ensure_ascii=False).encode("utf-8")

    def fetch(self, request: SearchRequest) -> list[SearchHit]:
        try:
            resp = self._client.post(
                self.endpoint,
                content=self.encode_body(request),
                headers={"Content-Type": "application/json"},
                timeout=self.timeout,
            )
        except httpx.TransportError as exc:
            raise BackendUnreachable(str(exc)) from exc
        # Tavily signals plan/credit exhaustion with 429 and 432
        if resp.status_code in (429, 432):
            raise QuotaExhausted(f"search quota exhausted (status {resp.status_code})")
        if resp.status_code >= 500:
            raise BackendUnreachable(f"status {resp.status_code}")
        if resp.status_code >= 400:
            raise MalformedResponse(f"search rejected with status {resp.status_code}: {resp.text[:200]}")
        try:
            payload = resp.json()
        except ValueError as exc:
            raise MalformedResponse(f"response is not JSON: {exc}") from exc
        return parse_results(payload)


def parse_results(payload: object) -> list[SearchHit]:
    if not isinstance(payload, dict) or not isinstance(payload.get("results"), list):
        raise MalformedResponse("response lacks a results[] array")
    hits = []
    for item in payload["results"]:
        if not isinstance(item, dict):
            raise MalformedResponse("results[] entry is not an object")
        try:
            hits.append(
                SearchHit(
                    title=str(item.get("title") or ""),
                    url=str(item.get("url") or ""),
                    content=str(item.get("content") or ""),
                    score=float(item.get("score") or 0.0),
                )
            )
        except ValueError as exc:
            log.warning("dropping unusable search result %r: %s", item.get("url"), exc)
    return hits


class MockSearchBackend:
    """Pure mapping from query string to fixture hits; unknown queries yield no hits."""

    def __init__(self, fixtures: Mapping[str, Iterable[SearchHit]] | None = None) -> None:
        self.fixtures = {q: list(hits) for q, hits in (fixtures or {}).items()}
        self.calls: list[SearchRequest] = []
        self._lock = threading.Lock()

    @classmethod
    def from_data(cls, data: Mapping[str, list[dict]]) -> MockSearchBackend:
        return cls({q: [SearchHit(**h) for h in hits] for q, hits in data.items()})

    def fetch(self, request: SearchRequest) -> list[SearchHit]:
        with self._lock:
            self.calls.append(request)
        return list(self.fixtures.get(request.query, []))


class SearchCache:
    """Content-addressed flat files: ``<root>/<digest>.json``."""

    def __init__(self, root: str | os.PathLike) -> None:
        self.root = Path(root)

    def path(self, digest: str) -> Path:
        return self.root / f"{digest}.json"

    def get(self, digest: str) -> SearchResponse | None:
        path = self.path(digest)
        if not path.exists():
            return None
        try:
            return load_json(SearchResponse, path.read_text(encoding="utf-8"))
        except (ValueError, KeyError, TypeError) as exc:
            log.warning("ignoring corrupt cache entry %s: %s", path, exc)
            return None

    def put(self, response: SearchResponse) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=self.root, suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(dump_json(response))
        os.replace(tmp, self.path(response.request_digest))

    def clear(self) -> int:
        removed = 0
        if self.root.exists():
            for path in self.root.glob("*.json"):
                path.unlink()
                removed += 1
        return removed

    def __len__(self) -> int:
        return len(list(self.root.glob("*.json"))) if self.root.exists() else 0


class SearchGateway:
    def __init__(
        self,
        backend: SearchBackend,
        cache: SearchCache | None = None,
        use_cache: bool = True,
        retries: int = 3,
        backoff: float = 0.5,
        clock: Callable[[], datetime] = system_clock,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        self.backend = backend
        self.cache = cache
        self.use_cache = use_cache
        self.retries = retries
        self.backoff = backoff
        self.clock = clock
        self._sleep = sleep
        self._lock = threading.Lock()
        self.backend_calls = 0
        self.cache_hits = 0

    def fetch(self, request: SearchRequest) -> SearchResponse:
        """Resolve a request through the cache or the backend without touching any transcript."""
        digest = cache_key(request)
        if self.cache is not None and self.use_cache:
            cached = self.cache.get(digest)
            if cached is not None:
                with self._lock:
                    self.cache_hits += 1
                return SearchResponse(cached.request_digest, cached.hits, cached.answered_at, from_cache=True)
        hits = self._call_backend(request)
        response = SearchResponse(
            request_digest=digest,
            hits=tuple(hits[: request.max_results]),
            answered_at=self.clock().isoformat(),
            from_cache=False,
        )
        if self.cache is not None:
            self.cache.put(response)
        return response

    def _call_backend(self, request: SearchRequest) -> list[SearchHit]:
        for attempt in range(1, self.retries + 1):
            with self._lock:
                self.backend_calls += 1
            try:
                return self.backend.fetch(request)
            except GatewayError as exc:
                if not exc.retryable or attempt == self.retries:
                    raise
                delay = self.backoff * 2 ** (attempt - 1)
                log.warning("search failed (attempt %d/%d): %s; retrying in %.2fs", attempt, self.retries, exc, delay)
                self._sleep(delay)
        raise AssertionError("unreachable")

    def search(self, request: SearchRequest, trace: TranscriptRecorder | None = None) -> SearchResponse:
        response = self.fetch(request)
        if trace is not None:
            trace.record(SearchCall(request, response))
        return response
