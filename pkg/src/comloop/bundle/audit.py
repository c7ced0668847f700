"""Leakage audit: make sure nothing under public/ reproduces validation labels."""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass
from pathlib import Path

from .loader import CompetitionBundle
from .splitting import SplitManifest


@dataclass(frozen=True, slots=True)
class LeakViolation:
    path: str  # relative to the scanned public directory
    id_column: int
    value_column: int
    matched_rows: int

    def describe(self) -> str:
        return (
            f"{self.path}: column {self.value_column} reproduces validation labels "
            f"for {self.matched_rows} validation ids found in column {self.id_column}"
        )


def _values_equal(a: str, b: str) -> bool:
    a, b = a.strip(), b.strip()
    if a == b:
        return True
    try:
        fa, fb = float(a), float(b)
    except (TypeError, ValueError):
        return False
    return math.isclose(fa, fb, rel_tol=1e-9, abs_tol=1e-12)


def _table_rows(data: bytes) -> list[list[str]] | None:
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError:
        return None
    if not text.strip():
        return None
    try:
        rows = list(csv.reader(io.StringIO(text)))
    except csv.Error:
        return None
    return rows or None


def scan_for_leaks(public_dir: Path, labels_by_id: dict[str, str]) -> list[LeakViolation]:
    """Flag any table under public_dir whose columns map validation ids to labels.

    Symlinks are resolved before reading, so a linked private file is caught.
    Every row is treated as data (a header row simply never matches an id).
    A column pair is a violation only if every validation id present in the
    file maps to its exact label, with at least two hits (one when only one
    validation row exists), which keeps constant-placeholder columns clean.
    """
    public_dir = Path(public_dir)
    required_hits = min(2, len(labels_by_id)) or 1
    violations: list[LeakViolation] = []
    for dirpath, _dirnames, filenames in os.walk(public_dir, followlinks=True):
        for name in sorted(filenames):
            path = Path(dirpath) / name
            rows = _table_rows(Path(os.path.realpath(path)).read_bytes())
            if rows is None:
                continue
            width = max(len(r) for r in rows)
            rel = path.relative_to(public_dir).as_posix()
            for id_col in range(width):
                hits = [
                    (i, row[id_col].strip())
                    for i, row in enumerate(rows)
                    if id_col < len(row) and row[id_col].strip() in labels_by_id
                ]
                if len(hits) < required_hits:
                    continue
                for value_col in range(width):
                    if value_col == id_col:
                        continue
                    matched = 0
                    for row_index, row_id in hits:
                        row = rows[row_index]
                        if value_col >= len(row) or not _values_equal(row[value_col], labels_by_id[row_id]):
                            matched = -1
                            break
                        matched += 1
                    if matched >= required_hits:
                        violations.append(
                            LeakViolation(path=rel, id_column=id_col, value_column=value_col, matched_rows=matched)
                        )
    return violations


def audit_no_leakage(bundle: CompetitionBundle, manifest: SplitManifest) -> list[LeakViolation]:
    """Scan the bundle's public tree against the hidden validation labels."""
    label_path = bundle.root / manifest.validation_label_file
    labels: dict[str, str] = {}
    with label_path.open(encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        next(reader)  # header
        for row in reader:
            labels[row[0].strip()] = row[1]
    return scan_for_leaks(bundle.public_dir, labels)
