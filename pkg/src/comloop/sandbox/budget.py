"""Wall-clock and step budgets plus output truncation helpers."""

from __future__ import annotations

import threading
from dataclasses import dataclass

from ..errors import ConfigError

WITHIN = "within"
SESSION_EXHAUSTED = "session_exhausted"
RUN_EXHAUSTED = "run_exhausted"

DEFAULT_TRUNCATE_CHARS = 20_000
ELISION = "[... {dropped} characters elided ...]"


@dataclass(frozen=True, slots=True)
class Budget:
    """Nested wall-clock limits in seconds; cell <= session <= run."""

    run_wall: float = 24 * 3600.0
    session_wall: float = 5 * 3600.0
    cell_wall: float = 2 * 3600.0
    max_steps: int = 30

    def __post_init__(self) -> None:
        if min(self.run_wall, self.session_wall, self.cell_wall) <= 0:
            raise ConfigError("all wall budgets must be positive")
        if not (self.cell_wall <= self.session_wall <= self.run_wall):
            raise ConfigError(
                f"budgets must nest: cell {self.cell_wall} <= session {self.session_wall} <= run {self.run_wall}"
            )
        if self.max_steps < 1:
            raise ConfigError("max_steps must be at least 1")


class RunUsage:
    """Thread-safe wall-clock accumulator across every session of a run."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._total = 0.0
        self._cells = 0

    def add(self, seconds: float) -> None:
        with self._lock:
            self._total += seconds
            self._cells += 1

    @property
    def total(self) -> float:
        with self._lock:
            return self._total

    @property
    def cells(self) -> int:
        with self._lock:
            return self._cells


def enforce_budgets(session, budget: Budget) -> str:
    """Pure check of accumulated elapsed time against the budget."""
    run_elapsed = session.run_usage.total if session.run_usage is not None else session.elapsed
    if run_elapsed > budget.run_wall:
        return RUN_EXHAUSTED
    if session.elapsed > budget.session_wall:
        return SESSION_EXHAUSTED
    return WITHIN


def truncate_output(text: str, limit: int = DEFAULT_TRUNCATE_CHARS) -> tuple[str, bool]:
    """Keep the head and tail halves of oversized output, flagging the cut."""
    if len(text) <= limit:
        return text, False
    half = limit // 2
    dropped = len(text) - 2 * half
    marker = "\n" + ELISION.format(dropped=dropped) + "\n"
    return text[:half] + marker + text[-half:], True
