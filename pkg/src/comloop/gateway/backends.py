"""Completion backends and the logging gateway that fronts them.

Three interchangeable backends cover the run modes:

* ScriptedBackend answers from a routing table, for tests and reproducible
  demo runs. No network, byte-deterministic.
* LiveBackend talks to an OpenAI-compatible chat endpoint with retries.
* ReplayBackend re-serves a previous run's logged responses, verifying
  hashes so silent divergence is impossible.

The Gateway wraps whichever backend is active, records every exchange to a
per-lane JSONL log, and meters token usage. Lanes keep concurrent agents'
logs from interleaving: each worker writes only to its own file.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from typing import Callable, Optional, Protocol, Sequence

from ..errors import GatewayError
from .templates import TEMPLATE_ROLES, render_prompt
from .types import (
    CompletionRequest,
    CompletionResponse,
    TokenUsage,
    UsageLedger,
    estimate_tokens,
)

PROMPT_HEAD_CHARS = 200


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class Backend(Protocol):
    def complete(self, request: CompletionRequest, lane: str) -> CompletionResponse: ...


class ScriptedBackend:
    """Routes each request to exactly one table entry and replays its answers.

    An entry is a mapping with optional ``role`` and ``contains`` matchers
    and a non-empty ``responses`` list. ``contains`` may be one substring or
    a list of substrings that must all occur in the prompt. A request
    matches an entry when the role agrees (if given) and every substring is
    present (if given). Each entry hands out its responses in order and then
    sticks on the last one, so a re-asked prompt keeps getting the same
    final answer.
    """

    def __init__(self, entries: Sequence[dict]) -> None:
        self._entries = []
        for index, entry in enumerate(entries):
            responses = entry.get("responses")
            if not isinstance(responses, list) or not responses:
                raise GatewayError(f"scripted entry {index} has no responses")
            contains = entry.get("contains")
            if isinstance(contains, str):
                contains = (contains,)
            elif contains is not None:
                contains = tuple(contains)
            self._entries.append(
                {
                    "role": entry.get("role"),
                    "contains": contains,
                    "responses": list(responses),
                    "cursor": 0,
                }
            )
        self._lock = threading.Lock()

    @classmethod
    def from_json(cls, path: str) -> "ScriptedBackend":
        try:
            with open(path, "r", encoding="utf-8") as handle:
                entries = json.load(handle)
        except (OSError, json.JSONDecodeError) as exc:
            raise GatewayError(f"cannot load scripted backend from {path}: {exc}") from exc
        if not isinstance(entries, list):
            raise GatewayError(f"scripted backend file {path} must hold a list of entries")
        return cls(entries)

    def _matches(self, entry: dict, request: CompletionRequest) -> bool:
        if entry["role"] is not None and entry["role"] != request.role_tag:
            return False
        if entry["contains"] is not None:
            return all(needle in request.prompt for needle in entry["contains"])
        return True

    def complete(self, request: CompletionRequest, lane: str = "") -> CompletionResponse:
        with self._lock:
            hits = [e for e in self._entries if self._matches(e, request)]
            head = request.prompt[:PROMPT_HEAD_CHARS]
            if not hits:
                raise GatewayError(
                    f"no scripted entry matches role {request.role_tag!r}, "
                    f"prompt head: {head!r}"
                )
            if len(hits) > 1:
                matchers = [(e["role"], e["contains"]) for e in hits]
                raise GatewayError(
                    f"{len(hits)} scripted entries match role {request.role_tag!r} "
                    f"({matchers}), prompt head: {head!r}"
                )
            entry = hits[0]
            text = entry["responses"][min(entry["cursor"], len(entry["responses"]) - 1)]
            entry["cursor"] += 1
        usage = TokenUsage(estimate_tokens(request.prompt), estimate_tokens(text))
        return CompletionResponse(text=text, usage=usage)


class LiveBackend:
    """OpenAI-compatible chat endpoint with bounded retries (1s, 4s, 16s)."""

    network_calls = 0  # class-wide, so tests can assert zero traffic

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key: Optional[str] = None,
        transport: Optional[Callable] = None,
        sleeper: Callable[[float], None] = time.sleep,
        max_attempts: int = 3,
        timeout: float = 120.0,
    ) -> None:
        self.endpoint = endpoint
        self.model = model
        self.api_key = api_key
        self._transport = transport or self._default_transport
        self._sleep = sleeper
        self.max_attempts = max_attempts
        self.timeout = timeout

    def _default_transport(self, url: str, payload: dict, headers: dict, timeout: float) -> dict:
        import requests

        response = requests.post(url, json=payload, headers=headers, timeout=timeout)
        response.raise_for_status()
        return response.json()

    def complete(self, request: CompletionRequest, lane: str = "") -> CompletionResponse:
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": request.prompt}],
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last_error: Optional[Exception] = None
        for attempt in range(self.max_attempts):
            if attempt:
                self._sleep(4.0 ** (attempt - 1))
            try:
                LiveBackend.network_calls += 1
                body = self._transport(self.endpoint, payload, headers, self.timeout)
                choice = body["choices"][0]["message"]["content"]
                usage = body.get("usage") or {}
                return CompletionResponse(
                    text=choice,
                    usage=TokenUsage(
                        int(usage.get("prompt_tokens", estimate_tokens(request.prompt))),
                        int(usage.get("completion_tokens", estimate_tokens(choice))),
                    ),
                )
            except Exception as exc:
                last_error = exc
        raise GatewayError(
            f"completion failed after {self.max_attempts} attempts: {last_error}"
        ) from last_error


class ReplayBackend:
    """Serves responses from a previous run's lane logs, verifying hashes.

    Divergence is reported loudly: a prompt whose hash differs from the one
    logged at the same position means some earlier response changed the
    course of the run, and a response whose stored hash no longer matches
    its text means the log was edited.
    """

    def __init__(self, log_dir: str) -> None:
        self._lanes: dict = {}
        self._cursors: dict = {}
        self._lock = threading.Lock()
        if not os.path.isdir(log_dir):
            raise GatewayError(f"replay log directory does not exist: {log_dir}")
        for name in sorted(os.listdir(log_dir)):
            if not name.endswith(".jsonl"):
                continue
            lane = name[: -len(".jsonl")]
            entries = []
            path = os.path.join(log_dir, name)
            with open(path, "r", encoding="utf-8") as handle:
                for line_no, line in enumerate(handle):
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        entries.append(json.loads(line))
                    except json.JSONDecodeError as exc:
                        raise GatewayError(
                            f"replay log {path} line {line_no + 1} is not JSON: {exc}"
                        ) from exc
            self._lanes[lane] = entries
            self._cursors[lane] = 0

    def complete(self, request: CompletionRequest, lane: str) -> CompletionResponse:
        with self._lock:
            entries = self._lanes.get(lane)
            if entries is None:
                raise GatewayError(f"replay has no log for lane {lane!r}")
            index = self._cursors[lane]
            if index >= len(entries):
                raise GatewayError(
                    f"replay diverged: lane {lane!r} asks for call {index} but its "
                    f"log holds only {len(entries)}"
                )
            entry = entries[index]
            self._cursors[lane] = index + 1
        if _sha256(entry["response"]) != entry["response_sha256"]:
            raise GatewayError(
                f"replay log for lane {lane!r} was edited: response at call "
                f"{index} no longer matches its recorded hash"
            )
        if _sha256(request.prompt) != entry["prompt_sha256"]:
            raise GatewayError(
                f"replay diverged at call {index} of lane {lane!r}: prompt hash "
                f"{_sha256(request.prompt)[:12]} != logged {entry['prompt_sha256'][:12]}"
            )
        usage = entry.get("usage") or {}
        return CompletionResponse(
            text=entry["response"],
            usage=TokenUsage(
                int(usage.get("prompt_tokens", 0)), int(usage.get("completion_tokens", 0))
            ),
        )


class Gateway:
    """Front door for all completions: renders, routes, logs, meters."""

    def __init__(
        self,
        backend: Backend,
        log_dir: Optional[str] = None,
        ledger: Optional[UsageLedger] = None,
    ) -> None:
        self.backend = backend
        self.log_dir = log_dir
        self.ledger = ledger or UsageLedger()
        self._lock = threading.Lock()
        self._counters: dict = {}
        if log_dir:
            os.makedirs(log_dir, exist_ok=True)

    def ask(self, lane: str, template: str, context: dict) -> str:
        """Render ``template`` with ``context`` and return the backend's text."""
        prompt = render_prompt(template, context)
        role = TEMPLATE_ROLES[template]
        request = CompletionRequest(template=template, role_tag=role, prompt=prompt)
        response = self.backend.complete(request, lane)
        self.ledger.record(response.usage)
        self._log(lane, request, response)
        return response.text

    def for_lane(self, lane: str) -> Callable[[str, dict], str]:
        """Bind a lane name so workers cannot accidentally cross streams."""

        def ask(template: str, context: dict) -> str:
            return self.ask(lane, template, context)

        return ask

    def _log(self, lane: str, request: CompletionRequest, response: CompletionResponse) -> None:
        if not self.log_dir:
            return
        with self._lock:
            index = self._counters.get(lane, 0)
            self._counters[lane] = index + 1
        record = {
            "index": index,
            "template": request.template,
            "role": request.role_tag,
            "prompt_sha256": _sha256(request.prompt),
            "prompt": request.prompt,
            "response": response.text,
            "response_sha256": _sha256(response.text),
            "usage": {
                "prompt_tokens": response.usage.prompt_tokens,
                "completion_tokens": response.usage.completion_tokens,
            },
        }
        path = os.path.join(self.log_dir, f"{lane}.jsonl")
        with open(path, "a", encoding="utf-8") as handle:
            handle.write(json.dumps(record, sort_keys=True) + "\n")
