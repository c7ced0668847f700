"""Coding agent: drives one sandbox session from a draft to a graded run."""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

from ..bundle.grading import VALIDATION, grade
from ..bundle.loader import CompetitionBundle
from ..community import HIGHER
from ..errors import ParseError
from ..gateway.parsing import parse_monitor_action, parse_tagged
from ..runs import RunRecord
from ..sandbox.budget import WITHIN, enforce_budgets
from ..sandbox.session import STATUS_GUEST_DEAD, Session, execute_cell
from .drafts import SolutionDraft
from .reports import Report, report_from_block

MAX_REASKS = 2

Ask = Callable[[str, dict], str]


@dataclass(frozen=True, slots=True)
class CellRun:
    step: int
    goal: str
    code: str
    status: str
    output: str
    error: Optional[str]
    wall_time: float
    validation_score: Optional[float] = None


@dataclass(frozen=True, slots=True)
class CodingResult:
    record: RunRecord
    report: Optional[Report]
    cells: tuple
    warnings: tuple


def make_monitor(ask: Ask) -> Callable[[str, str], str]:
    """Cell monitor backed by a completion; parse trouble surfaces as an
    exception, which the session treats as CONTINUE."""

    def monitor(goal: str, output: str) -> str:
        return parse_monitor_action(ask("monitor", {"goal": goal, "output": output}))

    return monitor


def public_file_listing(bundle: CompetitionBundle, mount: str = "data") -> str:
    """The files a cell can reach, with sizes, at guest-visible paths."""
    lines = []
    base = bundle.public_dir if bundle.prepared else bundle.data_dir
    for path in sorted(base.rglob("*")):
        if path.is_file():
            rel = path.relative_to(base)
            lines.append(f"../input/{mount}/{rel} ({path.stat().st_size} bytes)")
    return "\n".join(lines) if lines else "(no files)"


def _resolve_in_working(session: Session, relpath: str) -> Optional[Path]:
    candidate = os.path.realpath(os.path.join(session.working_dir, relpath))
    root = os.path.realpath(session.working_dir)
    if candidate == root or not candidate.startswith(root + os.sep):
        return None
    return Path(candidate)


def solution_body(cells: tuple) -> str:
    """Concatenate the run's successful cells into one publishable script."""
    parts = []
    for cell in cells:
        if cell.status == "ok" and cell.code.strip():
            parts.append(f"# {cell.goal}\n{cell.code.strip()}")
    return "\n\n".join(parts)


def run_coding_agent(
    ask: Ask,
    session: Session,
    bundle: CompetitionBundle,
    draft: SolutionDraft,
    iteration: int,
    max_steps: int = 30,
    monitor: Optional[Callable[[str, str], str]] = None,
    poll_interval: float = 30.0,
    deterministic: bool = False,
    max_reasks: int = MAX_REASKS,
) -> CodingResult:
    """Run the draft to completion, a budget stop, or a dead guest.

    Each loop turn asks for one cell, executes it, grades any predictions it
    declared, and feeds the outcome back. The run is successful once it holds
    both a graded validation score and a test-split submission file.
    """
    run_id = f"run-{draft.draft_id}"
    direction = bundle.metric.direction
    warnings: list = []
    cells: list = []
    best_score: Optional[float] = None
    validation_file: Optional[str] = None
    submission_file: Optional[str] = None
    completed = False

    context: dict = {
        "task_description": bundle.spec.description,
        "metric_name": bundle.spec.metric_name,
        "file_listing": public_file_listing(bundle),
        "draft": draft.body,
    }
    template = "coder_first_cell"

    for step in range(1, max_steps + 1):
        budget_state = enforce_budgets(session, session.budget)
        if budget_state != WITHIN:
            warnings.append(f"stopping at step {step}: {budget_state}")
            break

        parsed = None
        for attempt in range(max_reasks + 1):
            response = ask(template, context)
            try:
                parsed = parse_tagged("cell_response", response)
                break
            except ParseError as exc:
                warnings.append(f"step {step}: unparseable cell (attempt {attempt + 1}): {exc}")
        if parsed is None:
            warnings.append(f"step {step}: giving up after repeated parse failures")
            break

        if parsed["goal"] is None and parsed["code"] is None:
            completed = True
            break

        goal, code = parsed["goal"], parsed["code"]
        outcome = execute_cell(
            session,
            code,
            goal=goal,
            monitor=monitor,
            poll_interval=poll_interval,
        )

        score_line = None
        cell_score: Optional[float] = None
        if parsed["validation_submission"]:
            declared = parsed["validation_submission"]
            path = _resolve_in_working(session, declared)
            if path is None:
                score_line = f"validation submission path {declared!r} escapes the workspace"
                warnings.append(f"step {step}: {score_line}")
            else:
                eval_report = grade(bundle, path, target=VALIDATION)
                if eval_report.success:
                    cell_score = eval_report.score
                    score_line = f"validation score: {eval_report.score:.6f}"
                    if _improves(cell_score, best_score, direction):
                        best_score = cell_score
                        validation_file = declared
                else:
                    score_line = f"validation grading failed: {eval_report.message}"
        if parsed["submission"]:
            declared = parsed["submission"]
            path = _resolve_in_working(session, declared)
            if path is not None and path.exists():
                submission_file = declared
            else:
                warnings.append(
                    f"step {step}: declared test submission {declared!r} was not written"
                )

        cells.append(
            CellRun(
                step=step,
                goal=goal,
                code=code,
                status=outcome.status,
                output=outcome.output,
                error=outcome.error,
                wall_time=0.0 if deterministic else outcome.wall_time,
                validation_score=cell_score,
            )
        )

        if outcome.status == STATUS_GUEST_DEAD:
            warnings.append(f"step {step}: guest died; abandoning the run")
            break

        context = {
            "goal": goal,
            "code": code,
            "feedback": _feedback(outcome, score_line, deterministic),
            "step": step + 1,
            "max_steps": max_steps,
        }
        template = "coder_revision"

    report = None
    if cells:
        report, report_warnings = _final_report(ask, draft, cells, run_id, max_reasks)
        warnings.extend(report_warnings)

    success = best_score is not None and submission_file is not None
    if completed and not success:
        warnings.append("run signalled completion without a graded submission")
    record = RunRecord(
        run_id=run_id,
        iteration=iteration,
        draft_id=draft.draft_id,
        steps=len(cells),
        success=success,
        validation_score=best_score,
        submission_file=submission_file,
        validation_file=validation_file,
        notes=tuple(warnings),
    )
    return CodingResult(
        record=record, report=report, cells=tuple(cells), warnings=tuple(warnings)
    )


def _improves(candidate: float, incumbent: Optional[float], direction: str) -> bool:
    if incumbent is None:
        return True
    return candidate > incumbent if direction == HIGHER else candidate < incumbent


def _feedback(outcome, score_line: Optional[str], deterministic: bool) -> str:
    seconds = 0.0 if deterministic else outcome.wall_time
    lines = [
        f"status: {outcome.status}",
        f"execution time: {seconds:.1f}s",
    ]
    if outcome.error:
        lines.append(f"error:\n{outcome.error}")
    lines.append(f"output:\n{outcome.output}" if outcome.output else "output: (none)")
    if score_line:
        lines.append(score_line)
    return "\n".join(lines)


def _history_digest(cells: list) -> str:
    lines = []
    for cell in cells:
        summary = f"step {cell.step}: {cell.goal} [{cell.status}]"
        if cell.validation_score is not None:
            summary += f" (validation score {cell.validation_score:.6f})"
        lines.append(summary)
    return "\n".join(lines)


def _final_report(
    ask: Ask, draft: SolutionDraft, cells: list, run_id: str, max_reasks: int
) -> tuple:
    warnings: list = []
    context = {"draft": draft.body, "history_digest": _history_digest(cells)}
    for attempt in range(max_reasks + 1):
        response = ask("coder_report", context)
        try:
            block = parse_tagged("report", response)[0]
        except ParseError as exc:
            warnings.append(f"final report unparseable (attempt {attempt + 1}): {exc}")
            continue
        report, clamps = report_from_block(dict(block, subject=run_id))
        warnings.extend(clamps)
        return report, warnings
    warnings.append("final report skipped after repeated parse failures")
    return None, warnings
