"""Text generation gateway: HTTP chat-completions adapter, scripted stub, time context."""

from __future__ import annotations

import logging
import threading
import time
from collections import deque
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Callable, Iterable, Protocol

import httpx

from srsa.core import GenParams, LlmCall, PromptText, TranscriptRecorder

log = logging.getLogger(__name__)


class GatewayError(Exception):
    """Base class for backend failures surfaced by the LLM and search gateways."""

    retryable = False


class BackendUnreachable(GatewayError):
    retryable = True


class BackendRejected(GatewayError):
    def __init__(self, status: int, detail: str = "") -> None:
        super().__init__(f"backend rejected request with status {status}: {detail[:200]}")
        self.status = status


class EmptyCompletion(GatewayError):
    pass


class LLMBackend(Protocol):
    def complete(self, prompt: PromptText, params: GenParams) -> str: ...


class ScriptedLLM:
    """FIFO stub: the k-th call returns the k-th scripted completion, whatever the prompt."""

    def __init__(self, completions: Iterable[str] = (), record_prompts: bool = True) -> None:
        self._queue: deque[str] = deque(completions)
        self._lock = threading.Lock()
        self.record_prompts = record_prompts
        self.prompts: list[PromptText] = []

    def push(self, *completions: str) -> None:
        with self._lock:
            self._queue.extend(completions)

    @property
    def remaining(self) -> int:
        with self._lock:
            return len(self._queue)

    def complete(self, prompt: PromptText, params: GenParams) -> str:
        with self._lock:
            if self.record_prompts:
                self.prompts.append(prompt)
            if not self._queue:
                raise EmptyCompletion("stub exhausted")
            return self._queue.popleft()


class HttpChatBackend:
    """OpenAI-style ``/chat/completions`` client."""

    def __init__(
        self,
        endpoint: str,
        api_key: str,
        model: str,
        timeout: float = 60.0,
        client: httpx.Client | None = None,
    ) -> None:
        self.endpoint = endpoint
        self.api_key = api_key
        self.model = model
        self.timeout = timeout
        self._client = client or httpx.Client(timeout=timeout)

    def build_body(self, prompt: PromptText, params: GenParams) -> dict:
        body: dict = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": prompt.system},
                {"role": "user", "content": prompt.user},
            ],
            "temperature": params.temperature,
            "n": params.n_responses,
        }
        # absent max_tokens lets the server use the full context window
        if params.max_tokens is not None:
            body["max_tokens"] = params.max_tokens
        return body

    def complete(self, prompt: PromptText, params: GenParams) -> str:
        try:
            resp = self._client.post(
                self.endpoint,
                json=self.build_body(prompt, params),
                headers={"Authorization": f"Bearer {self.api_key}"},
                timeout=self.timeout,
            )
        except httpx.TransportError as exc:
            raise BackendUnreachable(str(exc)) from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            raise BackendUnreachable(f"status {resp.status_code}")
        if resp.status_code >= 400:
            raise BackendRejected(resp.status_code, resp.text)
        try:
            content = resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise EmptyCompletion(f"unparseable completion payload: {exc}") from exc
        return content or ""


class LLMGateway:
    """``generate`` with bounded retries; every successful call is logged to the transcript."""

    def __init__(
        self,
        backend: LLMBackend,
        retries: int = 3,
        backoff: float = 0.5,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        if retries < 1:
            raise ValueError("retries must be >= 1")
        self.backend = backend
        self.retries = retries
        self.backoff = backoff
        self._sleep = sleep

    def generate(
        self,
        prompt: PromptText,
        params: GenParams | None = None,
        trace: TranscriptRecorder | None = None,
    ) -> str:
        params = params or GenParams()
        if params.n_responses != 1:
            raise ValueError("only single-candidate generation is supported")
        for attempt in range(1, self.retries + 1):
            try:
                completion = self.backend.complete(prompt, params)
                break
            except GatewayError as exc:
                if not exc.retryable or attempt == self.retries:
                    raise
                delay = self.backoff * 2 ** (attempt - 1)
                log.warning("llm call failed (attempt %d/%d): %s; retrying in %.2fs", attempt, self.retries, exc, delay)
                self._sleep(delay)
        if not completion.strip():
            raise EmptyCompletion("backend returned an empty completion")
        if trace is not None:
            trace.record(LlmCall(prompt, params, completion, attempts=attempt))
        return completion


_WEEKDAYS = ("Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday")


def _weekday_name(moment: datetime) -> str:
    # locale-independent, unlike strftime("%A")
    return _WEEKDAYS[moment.weekday()]


@dataclass(frozen=True)
class TimeContext:
    date: str
    weekday: str
    timezone_label: str

    def __post_init__(self) -> None:
        if _weekday_name(datetime.fromisoformat(self.date)) != self.weekday:
            raise ValueError(f"weekday {self.weekday} inconsistent with {self.date}")

    def render(self) -> str:
        return f"Current date: {self.date} ({self.weekday}, {self.timezone_label})"


def system_clock() -> datetime:
    return datetime.now(timezone.utc)


def fixed_clock(moment: datetime | str) -> Callable[[], datetime]:
    if isinstance(moment, str):
        moment = datetime.fromisoformat(moment.replace("Z", "+00:00"))
    if moment.tzinfo is None:
        moment = moment.replace(tzinfo=timezone.utc)
    return lambda: moment


def now_context(clock: Callable[[], datetime] = system_clock) -> TimeContext:
    moment = clock()
    label = (moment.tzname() if moment.tzinfo else None) or "UTC"
    return TimeContext(date=moment.date().isoformat(), weekday=_weekday_name(moment), timezone_label=label)
