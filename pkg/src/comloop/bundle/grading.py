"""Submission grading. Never raises: every defect becomes a failure report."""

from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

from ..errors import BundleError
from .loader import CompetitionBundle

VALIDATION = "validation"
TEST = "test"


@dataclass(frozen=True, slots=True)
class EvalReport:
    score: float | None
    success: bool
    message: str

    def __post_init__(self) -> None:
        if self.success != (self.score is not None):
            raise BundleError("eval report success flag must track score presence")
        if not self.success and not self.message:
            raise BundleError("failed eval report needs a message")
        if self.score is not None and not math.isfinite(self.score):
            raise BundleError("eval report score must be finite")

    def to_json_bytes(self) -> bytes:
        """Exactly {"score": <6-decimal float|null>, "success": <bool>, "message": <str>}."""
        score = "null" if self.score is None else f"{self.score:.6f}"
        success = "true" if self.success else "false"
        message = _json_string(self.message)
        return f'{{"score": {score}, "success": {success}, "message": {message}}}'.encode("utf-8")


def _json_string(text: str) -> str:
    import json

    return json.dumps(text, ensure_ascii=True)


@dataclass(frozen=True, slots=True)
class Submission:
    header: tuple[str, str]
    rows: tuple[tuple[str, str], ...]
    source: str = "memory"  # or "file"

    @classmethod
    def from_text(cls, text: str, source: str = "memory") -> "Submission":
        try:
            rows = list(csv.reader(io.StringIO(text)))
        except csv.Error as exc:
            raise BundleError(f"not parseable as CSV: {exc}") from exc
        rows = [r for r in rows if r]  # drop blank lines
        if not rows:
            raise BundleError("submission is empty")
        header = tuple(cell.strip() for cell in rows[0])
        if len(header) != 2:
            raise BundleError(f"submission header must have exactly two columns, got {len(header)}")
        body = []
        for i, row in enumerate(rows[1:], start=2):
            if len(row) != 2:
                raise BundleError(f"submission line {i} has {len(row)} cells, expected 2")
            body.append((row[0].strip(), row[1].strip()))
        return cls(header=header, rows=tuple(body), source=source)  # type: ignore[arg-type]

    @classmethod
    def from_csv(cls, path: Path) -> "Submission":
        return cls.from_text(Path(path).read_text(encoding="utf-8"), source="file")


def _load_truth(bundle: CompetitionBundle, target: str) -> dict[str, str]:
    if target == VALIDATION:
        path = bundle.private_dir / "validate.csv"
        if not path.exists():
            raise BundleError("bundle has no validation labels; run the splitter first")
    elif target == TEST:
        path = bundle.answers_dir / "test.csv"
        if not path.exists():
            raise BundleError("bundle ships no held-out test labels")
    else:
        raise BundleError(f"unknown grading target {target!r}")
    truth: dict[str, str] = {}
    with path.open(encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        next(reader)
        for row in reader:
            truth[row[0].strip()] = row[1].strip()
    return truth


def grade(bundle: CompetitionBundle, submission: Submission | Path | str, target: str = VALIDATION) -> EvalReport:
    """Score a submission against validation or test truth.

    Any defect (unreadable file, wrong header, duplicate/missing/extra ids,
    unparseable values) produces success=false with the first defect named.
    The report is also written to private/eval_report.json.
    """
    try:
        report = _grade_inner(bundle, submission, target)
    except Exception as exc:  # the grader contract: do not raise
        report = EvalReport(score=None, success=False, message=f"grader error: {exc}")
    _write_report(bundle, report)
    return report


def _grade_inner(bundle: CompetitionBundle, submission: Submission | Path | str, target: str) -> EvalReport:
    def failure(message: str) -> EvalReport:
        return EvalReport(score=None, success=False, message=message)

    if isinstance(submission, (str, Path)):
        path = Path(submission)
        if not path.exists():
            return failure(f"submission file not found: {path.name}")
        try:
            submission = Submission.from_csv(path)
        except (BundleError, UnicodeDecodeError) as exc:
            return failure(f"unreadable submission {path.name}: {exc}")

    try:
        expected_header = bundle.sample_submission_header()
    except (BundleError, OSError, IndexError) as exc:
        return failure(f"bundle sample submission unusable: {exc}")
    if submission.header != expected_header:
        return failure(
            f"wrong header: expected {','.join(expected_header)} got {','.join(submission.header)}"
        )

    truth = _load_truth(bundle, target)

    seen: set[str] = set()
    for row_id, _ in submission.rows:
        if row_id in seen:
            return failure(f"duplicate id {row_id!r} in submission")
        seen.add(row_id)

    metric = bundle.metric
    values: dict[str, object] = {}
    for row_id, raw in submission.rows:
        if metric.needs_numeric:
            try:
                value = float(raw)
            except (TypeError, ValueError):
                return failure(f"unparseable value {raw!r} for id {row_id!r}")
            if not math.isfinite(value):
                return failure(f"non-finite value for id {row_id!r}")
            values[row_id] = value
        else:
            values[row_id] = raw

    missing = [row_id for row_id in truth if row_id not in values]
    if missing:
        return failure(f"submission misses {len(missing)} required ids, first: {missing[0]!r}")
    extra = [row_id for row_id in values if row_id not in truth]
    if extra:
        return failure(f"submission has {len(extra)} unknown ids, first: {extra[0]!r}")

    ordered_ids = list(truth)
    predictions = [values[row_id] for row_id in ordered_ids]
    if metric.needs_numeric or metric.binary_truth:
        try:
            truths = [float(truth[row_id]) for row_id in ordered_ids]
        except (TypeError, ValueError):
            return failure(f"bundle truth for target {target!r} is not numeric")
    else:
        truths = [truth[row_id] for row_id in ordered_ids]
    if metric.binary_truth and any(t not in (0.0, 1.0) for t in truths):
        return failure(f"metric {metric.name!r} needs 0/1 truth labels")

    try:
        score = float(metric.compute(truths, predictions))
    except (BundleError, ArithmeticError, ValueError) as exc:
        return failure(f"metric {metric.name!r} failed: {exc}")
    if not math.isfinite(score):
        return failure(f"metric {metric.name!r} produced a non-finite score")
    return EvalReport(score=score, success=True, message="")


def _write_report(bundle: CompetitionBundle, report: EvalReport) -> None:
    private = bundle.private_dir
    try:
        private.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(dir=private, prefix=".eval_report_")
        with os.fdopen(fd, "wb") as handle:
            handle.write(report.to_json_bytes())
        os.replace(tmp_name, private / "eval_report.json")
    except OSError:
        pass  # reporting to disk is best-effort; the caller already has the report
