"""Structured assessments of published work and of the team's own runs."""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import AgentError
from ..gateway.templates import SCORE_LABELS

SCORE_MIN = 0
SCORE_MAX = 10


@dataclass(frozen=True, slots=True)
class Report:
    """One analyzed artifact: what it does, how good it is, where it breaks."""

    subject: str
    pipeline_summary: str
    component_scores: tuple  # ints aligned with SCORE_LABELS
    weaknesses: str

    def __post_init__(self) -> None:
        if len(self.component_scores) != len(SCORE_LABELS):
            raise AgentError(
                f"report for {self.subject!r} must carry exactly "
                f"{len(SCORE_LABELS)} scores"
            )
        for label, score in zip(SCORE_LABELS, self.component_scores):
            if not isinstance(score, int) or not SCORE_MIN <= score <= SCORE_MAX:
                raise AgentError(
                    f"report for {self.subject!r}: {label} score {score!r} "
                    f"is outside {SCORE_MIN}..{SCORE_MAX}"
                )

    def score(self, label: str) -> int:
        try:
            return self.component_scores[SCORE_LABELS.index(label)]
        except ValueError:
            raise AgentError(f"unknown score label {label!r}") from None

    @property
    def mean_score(self) -> float:
        return sum(self.component_scores) / len(self.component_scores)

    def digest(self) -> str:
        scores = ", ".join(
            f"{label} {value}" for label, value in zip(SCORE_LABELS, self.component_scores)
        )
        return (
            f"{self.subject}: {self.pipeline_summary}\n"
            f"  scores: {scores}\n"
            f"  weaknesses: {self.weaknesses}"
        )


def report_from_block(block: dict) -> tuple:
    """Build a Report from one parsed block, clamping stray scores.

    Returns (report, warnings); a score outside 0..10 is clamped to the
    nearer bound and noted rather than rejected, since a mostly-usable
    assessment beats a discarded one.
    """
    warnings = []
    scores = []
    for label in SCORE_LABELS:
        raw = block["scores"][label]
        clamped = min(SCORE_MAX, max(SCORE_MIN, raw))
        if clamped != raw:
            warnings.append(
                f"report {block['subject']!r}: clamped {label} score {raw} to {clamped}"
            )
        scores.append(clamped)
    report = Report(
        subject=block["subject"],
        pipeline_summary=block["pipeline"],
        component_scores=tuple(scores),
        weaknesses=block["weaknesses"],
    )
    return report, warnings
