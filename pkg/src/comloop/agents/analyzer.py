"""Analyzer agent: turns sampled community artifacts into reports and ideas."""

from __future__ import annotations

from typing import Callable, Sequence

from ..community import Discussion, Kernel
from ..errors import ParseError
from ..gateway.parsing import parse_tagged
from .ideas import Idea
from .reports import Report, report_from_block

MAX_REASKS = 2

Ask = Callable[[str, dict], str]


def render_discussion(discussion: Discussion) -> str:
    parts = [discussion.body.strip()]
    for tier, text in discussion.comments:
        parts.append(f"[comment, {tier}] {text.strip()}")
    return "\n\n".join(part for part in parts if part)


def analyze_kernels(
    ask: Ask,
    task_description: str,
    kernels: Sequence[Kernel],
    max_reasks: int = MAX_REASKS,
) -> tuple:
    """Assess each sampled kernel; an artifact that defeats the parser
    ``max_reasks + 1`` times is skipped, never fatal.

    Every report's subject is pinned to the kernel's real key, whatever the
    response called it: downstream credit tracing matches on exact keys.
    """
    reports: list = []
    warnings: list = []
    for kernel in kernels:
        context = {
            "task_description": task_description,
            "artifact_name": kernel.key,
            "artifact_body": kernel.body,
        }
        block = None
        for attempt in range(max_reasks + 1):
            text = ask("analyzer_kernels", context)
            try:
                block = parse_tagged("report", text)[0]
                break
            except ParseError as exc:
                warnings.append(
                    f"kernel {kernel.key}: unparseable assessment "
                    f"(attempt {attempt + 1}): {exc}"
                )
        if block is None:
            warnings.append(f"kernel {kernel.key}: skipped after repeated parse failures")
            continue
        report, clamps = report_from_block(dict(block, subject=kernel.key))
        warnings.extend(clamps)
        reports.append(report)
    return reports, warnings


def extract_discussion_ideas(
    ask: Ask,
    task_description: str,
    discussions: Sequence[Discussion],
    iteration: int,
    max_reasks: int = MAX_REASKS,
) -> tuple:
    """Mine each sampled discussion for actionable ideas; same skip policy."""
    ideas: list = []
    warnings: list = []
    for discussion in discussions:
        context = {
            "task_description": task_description,
            "artifact_name": discussion.key,
            "artifact_body": render_discussion(discussion),
        }
        texts = None
        for attempt in range(max_reasks + 1):
            response = ask("analyzer_discussions", context)
            try:
                texts = parse_tagged("idea_list", response)
                break
            except ParseError as exc:
                warnings.append(
                    f"discussion {discussion.key}: unparseable idea list "
                    f"(attempt {attempt + 1}): {exc}"
                )
        if texts is None:
            warnings.append(
                f"discussion {discussion.key}: skipped after repeated parse failures"
            )
            continue
        ideas.extend(
            Idea(text=text, source=discussion.key, iteration=iteration) for text in texts
        )
    return ideas, warnings


def reports_digest(reports: Sequence[Report]) -> str:
    if not reports:
        return "(no published work has been assessed yet)"
    return "\n\n".join(report.digest() for report in reports)
