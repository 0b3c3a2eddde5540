"""LLM clients: a mock backed by the analytic planner, transcript replay, and HTTP."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import httpx

from kinoplan.actions import emit_actions
from kinoplan.description import parse_description
from kinoplan.errors import LlmClientError, PromptError, ReplayMiss
from kinoplan.oracle import PlannerConfig, plan
from kinoplan.prompting import (
    CURRENT_MARKER,
    STAGE1_MARKER,
    STAGE2_MARKER,
    extract_description,
    parse_task,
    render_sequence_plan,
)

log = logging.getLogger(__name__)

API_KEY_ENV = "KINOPLAN_LLM_API_KEY"


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class MockOracleClient:
    """Answers both stages by running the analytic planner on the prompt's object.

    Stateless: the stage, the task and the description are all read back out of
    the prompt text.
    """

    config: PlannerConfig = field(default_factory=PlannerConfig)

    def complete(self, prompt: str) -> str:
        if STAGE2_MARKER in prompt:
            current = prompt[prompt.rindex(CURRENT_MARKER):]
            obj = parse_description(extract_description(current))
            task = parse_task(current)
            return "```\n" + emit_actions(plan(obj, task, self.config)) + "\n```\n"
        if STAGE1_MARKER in prompt:
            obj = parse_description(extract_description(prompt))
            task = parse_task(prompt)
            return render_sequence_plan(obj, task, self.config) + "\n"
        raise PromptError("prompt is neither a stage-1 nor a stage-2 prompt")


class ReplayClient:
    """Serves recorded responses keyed by the SHA-256 of the prompt."""

    def __init__(self, transcripts: list[dict] | None = None):
        self._responses: dict[str, str] = {}
        for entry in transcripts or []:
            self._responses[entry["prompt_hash"]] = entry["response"]

    @classmethod
    def load(cls, path: str | Path) -> "ReplayClient":
        return cls(json.loads(Path(path).read_text(encoding="utf-8")))

    def complete(self, prompt: str) -> str:
        key = prompt_hash(prompt)
        try:
            return self._responses[key]
        except KeyError:
            raise ReplayMiss(f"no recorded response for prompt {key[:12]}") from None


class RecordingClient:
    """Wraps another client and keeps every exchange for later replay."""

    def __init__(self, inner):
        self.inner = inner
        self._lock = threading.Lock()
        self._records: dict[str, str] = {}

    def complete(self, prompt: str) -> str:
        response = self.inner.complete(prompt)
        with self._lock:
            self._records[prompt_hash(prompt)] = response
        return response

    def transcripts(self) -> list[dict]:
        with self._lock:
            return [{"prompt_hash": h, "response": r} for h, r in sorted(self._records.items())]

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.transcripts(), indent=2) + "\n", encoding="utf-8")


class HttpClient:
    """Chat-completion client for a JSON HTTP endpoint.

    The API key comes from ``KINOPLAN_LLM_API_KEY`` only. Calls are spaced at
    least ``1 / rate_limit`` seconds apart across threads; 429 and 5xx replies
    are retried with exponential backoff.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        rate_limit: float = 1.0,
        timeout: float = 60.0,
        max_retries: int = 3,
        temperature: float = 0.0,
        backoff: float = 1.0,
        transport: httpx.BaseTransport | None = None,
    ):
        if rate_limit <= 0:
            raise ValueError("rate_limit must be positive")
        self.endpoint = endpoint
        self.model = model
        self.min_interval = 1.0 / rate_limit
        self.max_retries = max_retries
        self.temperature = temperature
        self.backoff = backoff
        self._http = httpx.Client(timeout=timeout, transport=transport)
        self._lock = threading.Lock()
        self._next_slot = 0.0

    def __repr__(self) -> str:
        return f"HttpClient(endpoint={self.endpoint!r}, model={self.model!r})"

    def _wait_turn(self) -> None:
        with self._lock:
            now = time.monotonic()
            slot = max(now, self._next_slot)
            self._next_slot = slot + self.min_interval
        if slot > now:
            time.sleep(slot - now)

    def payload(self, prompt: str) -> dict:
        return {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.temperature,
        }

    def complete(self, prompt: str) -> str:
        key = os.environ.get(API_KEY_ENV)
        if not key:
            raise LlmClientError(f"environment variable {API_KEY_ENV} is not set")
        headers = {"Authorization": f"Bearer {key}", "Content-Type": "application/json"}
        delay = self.backoff
        for attempt in range(self.max_retries + 1):
            self._wait_turn()
            try:
                resp = self._http.post(self.endpoint, json=self.payload(prompt), headers=headers)
            except httpx.HTTPError as exc:
                err = LlmClientError(f"request failed: {type(exc).__name__}")
            else:
                if resp.status_code == 200:
                    try:
                        return resp.json()["choices"][0]["message"]["content"]
                    except (ValueError, KeyError, IndexError, TypeError):
                        raise LlmClientError("malformed chat-completion response") from None
                err = LlmClientError(f"HTTP {resp.status_code}")
                if resp.status_code != 429 and resp.status_code < 500:
                    raise err
            if attempt < self.max_retries:
                log.warning("LLM call failed (%s); retrying in %.1fs", err, delay)
                time.sleep(delay)
                delay *= 2
        raise err

    def close(self) -> None:
        self._http.close()
