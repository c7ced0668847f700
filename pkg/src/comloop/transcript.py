"""Serialization of run artifacts into the run directory.

Everything written here must be byte-stable for deterministic runs: sorted
keys, no timestamps, no absolute paths, trailing newline. Two identically
configured scripted runs must produce identical files.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

from .runs import RunRecord


def dump_json(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def write_json(path: Path, payload) -> None:
    """Write atomically so a crashed run never leaves half a file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w", encoding="utf-8") as handle:
        handle.write(dump_json(payload))
    os.replace(tmp_name, path)


def record_as_dict(record: RunRecord) -> dict:
    return {
        "run_id": record.run_id,
        "iteration": record.iteration,
        "draft_id": record.draft_id,
        "steps": record.steps,
        "success": record.success,
        "validation_score": record.validation_score,
        "submission_file": record.submission_file,
        "validation_file": record.validation_file,
        "notes": list(record.notes),
    }


def report_as_dict(report) -> dict:
    return {
        "subject": report.subject,
        "pipeline_summary": report.pipeline_summary,
        "component_scores": list(report.component_scores),
        "weaknesses": report.weaknesses,
    }


def iteration_as_dict(result) -> dict:
    """Flatten one IterationResult; no wall-clock data belongs in here."""
    return {
        "iteration": result.iteration,
        "sampled_kernels": list(result.sampled_kernels),
        "sampled_discussions": list(result.sampled_discussions),
        "reports": [report_as_dict(r) for r in result.reports],
        "ideas_added": result.ideas_added,
        "paths": [list(p) for p in result.paths],
        "drafts": [
            {
                "draft_id": d.draft_id,
                "is_baseline": d.is_baseline,
                "referenced_artifacts": [str(a) for a in d.referenced_artifacts],
                "body": d.body,
            }
            for d in result.drafts
        ],
        "records": [record_as_dict(r.record) for r in result.results],
        "published": list(result.published),
        "best_run": result.best.run_id if result.best else None,
        "warnings": list(result.warnings),
    }


def append_jsonl(path: Path, payload) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a", encoding="utf-8") as handle:
        handle.write(json.dumps(payload, sort_keys=True) + "\n")
