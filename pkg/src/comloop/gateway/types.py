"""Shared request/response/usage types for the completion gateway."""

from __future__ import annotations

import threading
from dataclasses import dataclass, field


@dataclass(frozen=True, slots=True)
class TokenUsage:
    prompt_tokens: int = 0
    completion_tokens: int = 0

    @property
    def total_tokens(self) -> int:
        return self.prompt_tokens + self.completion_tokens

    def __add__(self, other: "TokenUsage") -> "TokenUsage":
        return TokenUsage(
            self.prompt_tokens + other.prompt_tokens,
            self.completion_tokens + other.completion_tokens,
        )


@dataclass(frozen=True, slots=True)
class CompletionRequest:
    """One rendered prompt headed for a backend.

    ``template`` and ``role_tag`` are routing metadata: scripted backends
    match on them, logs record them. Only ``prompt`` reaches a live model.
    """

    template: str
    role_tag: str
    prompt: str


@dataclass(frozen=True, slots=True)
class CompletionResponse:
    text: str
    usage: TokenUsage = field(default_factory=TokenUsage)


def estimate_tokens(text: str) -> int:
    """Crude length-based stand-in used where no real tokenizer is in play."""
    return max(1, len(text) // 4)


class UsageLedger:
    """Thread-safe running total of token spend across all lanes."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._usage = TokenUsage()
        self._calls = 0

    def record(self, usage: TokenUsage) -> None:
        with self._lock:
            self._usage = self._usage + usage
            self._calls += 1

    @property
    def usage(self) -> TokenUsage:
        with self._lock:
            return self._usage

    @property
    def calls(self) -> int:
        with self._lock:
            return self._calls

    def as_dict(self) -> dict:
        with self._lock:
            return {
                "calls": self._calls,
                "prompt_tokens": self._usage.prompt_tokens,
                "completion_tokens": self._usage.completion_tokens,
                "total_tokens": self._usage.total_tokens,
            }
