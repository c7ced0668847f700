"""Run records produced by coding agents and selection of the best one."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .errors import MetricsError
from .leaderboard import HIGHER, LOWER


@dataclass(frozen=True, slots=True)
class RunRecord:
    """Outcome of one coding-agent run against one solution draft."""

    run_id: str
    iteration: int
    draft_id: str
    steps: int
    success: bool
    validation_score: float | None = None
    submission_file: str | None = None  # test-set submission, relative to the run dir
    validation_file: str | None = None
    notes: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        if self.success and self.validation_score is None:
            raise MetricsError(f"run {self.run_id} marked successful without a validation score")


def select_best_run(records: Sequence[RunRecord], direction: str) -> RunRecord:
    """Best graded run; ties go to the earlier iteration, then the smaller run id."""
    if direction not in (HIGHER, LOWER):
        raise MetricsError(f"unknown direction {direction!r}")
    candidates = [r for r in records if r.success and r.validation_score is not None]
    if not candidates:
        raise MetricsError("no valid run to select")

    def order(record: RunRecord):
        oriented = -record.validation_score if direction == HIGHER else record.validation_score
        return (oriented, record.iteration, record.run_id)

    return min(candidates, key=order)
