"""Deterministic train/validation materialization for a bundle.

The splitter carves the bundled training data into a 90/10 (configurable)
train/validation pair, writes the participant-visible tree under public/
(original layout plus validate files, labels stripped from validation
inputs) and hides the validation labels under private/.
"""

from __future__ import annotations

import csv
import json
import random
import shutil
from dataclasses import dataclass
from pathlib import Path

from ..errors import BundleError
from .loader import CompetitionBundle


@dataclass(frozen=True, slots=True)
class SplitManifest:
    seed: int
    ratio: float
    stratify_on: str | None
    train_ids: tuple[str, ...]
    validation_ids: tuple[str, ...]
    validation_label_file: str  # relative to the bundle root
    warnings: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        return {
            "seed": self.seed,
            "ratio": self.ratio,
            "stratify_on": self.stratify_on,
            "train_ids": list(self.train_ids),
            "validation_ids": list(self.validation_ids),
            "validation_label_file": self.validation_label_file,
            "warnings": list(self.warnings),
        }

    @classmethod
    def load(cls, bundle: CompetitionBundle) -> "SplitManifest":
        path = bundle.private_dir / "split_manifest.json"
        if not path.exists():
            raise BundleError(f"bundle {bundle.spec.slug!r} has not been prepared (no split manifest)")
        raw = json.loads(path.read_text(encoding="utf-8"))
        return cls(
            seed=raw["seed"],
            ratio=raw["ratio"],
            stratify_on=raw.get("stratify_on"),
            train_ids=tuple(raw["train_ids"]),
            validation_ids=tuple(raw["validation_ids"]),
            validation_label_file=raw["validation_label_file"],
            warnings=tuple(raw.get("warnings", ())),
        )


def _read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    with path.open(encoding="utf-8", newline="") as handle:
        rows = list(csv.reader(handle))
    if not rows:
        raise BundleError(f"{path.name} is empty")
    return rows[0], rows[1:]


def _write_csv(path: Path, header: list[str], rows: list[list[str]]) -> None:
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _apportion_validation(groups: dict[str, list[int]], n_validation: int) -> dict[str, int]:
    """Largest-remainder apportionment of validation rows across classes.

    Per-class counts deviate from the exact fractional target by at most one
    row, and the total matches n_validation (capped so no class is emptied).
    """
    total = sum(len(rows) for rows in groups.values())
    quotas = {label: n_validation * len(rows) / total for label, rows in groups.items()}
    counts = {label: min(int(quota), len(groups[label]) - 1) for label, quota in quotas.items()}
    leftover = n_validation - sum(counts.values())
    by_remainder = sorted(groups, key=lambda lab: (-(quotas[lab] - int(quotas[lab])), lab))
    for label in by_remainder:
        if leftover <= 0:
            break
        if counts[label] < len(groups[label]) - 1:
            counts[label] += 1
            leftover -= 1
    # if caps blocked the exact total, hand remaining rows to the largest classes
    if leftover > 0:
        for label in sorted(groups, key=lambda lab: (-len(groups[lab]), lab)):
            while leftover > 0 and counts[label] < len(groups[label]) - 1:
                counts[label] += 1
                leftover -= 1
    return counts


def split_dataset(
    bundle: CompetitionBundle,
    ratio: float = 0.9,
    stratify_on: str | None = None,
    seed: int = 0,
) -> SplitManifest:
    """Materialize public/ and private/ from data/; returns the split manifest."""
    if not (0.0 < ratio < 1.0):
        raise BundleError(f"split ratio must be in (0, 1), got {ratio}")
    if stratify_on is None:
        stratify_on = bundle.spec.stratify_on

    header, rows = _read_csv(bundle.data_dir / "train.csv")
    id_col, target_col = bundle.spec.id_column, bundle.spec.target_column
    for needed in (id_col, target_col):
        if needed not in header:
            raise BundleError(f"train.csv has no {needed!r} column")
    if stratify_on is not None and stratify_on not in header:
        raise BundleError(f"stratify column {stratify_on!r} does not exist in train.csv")

    id_idx = header.index(id_col)
    target_idx = header.index(target_col)
    warnings: list[str] = []
    rng = random.Random(seed)
    n_validation = round((1.0 - ratio) * len(rows))

    if stratify_on is None:
        order = list(range(len(rows)))
        rng.shuffle(order)
        validation_rows = set(order[:n_validation])
    else:
        strat_idx = header.index(stratify_on)
        groups: dict[str, list[int]] = {}
        for i, row in enumerate(rows):
            groups.setdefault(row[strat_idx], []).append(i)
        eligible = {}
        for label in sorted(groups):
            if len(groups[label]) < 2:
                warnings.append(f"class {label!r} has a single row; forced into train")
            else:
                eligible[label] = groups[label]
        if not eligible:
            raise BundleError("stratified split impossible: every class has a single row")
        counts = _apportion_validation(eligible, n_validation)
        validation_rows = set()
        for label in sorted(eligible):
            members = list(eligible[label])
            rng.shuffle(members)
            validation_rows.update(members[: counts[label]])

    train_rows = [row for i, row in enumerate(rows) if i not in validation_rows]
    val_rows = [row for i, row in enumerate(rows) if i in validation_rows]

    public, private = bundle.public_dir, bundle.private_dir
    for directory in (public, private):
        if directory.exists():
            shutil.rmtree(directory)
        directory.mkdir(parents=True)

    # public/ mirrors data/ with train.csv replaced by the reduced split
    for entry in sorted(bundle.data_dir.iterdir()):
        if entry.name == "train.csv":
            continue
        if entry.is_dir():
            shutil.copytree(entry, public / entry.name)
        else:
            shutil.copy2(entry, public / entry.name)
    _write_csv(public / "train.csv", header, train_rows)

    inputs_header = [c for c in header if c != target_col]
    keep = [i for i, c in enumerate(header) if c != target_col]
    _write_csv(public / "validate.csv", inputs_header, [[row[i] for i in keep] for row in val_rows])
    shutil.copy2(bundle.sample_submission_path, public / "sample_submission.csv")

    placeholder = _sample_placeholder(bundle)
    sub_header = list(bundle.sample_submission_header())
    _write_csv(
        public / "validate_sample_submission.csv",
        sub_header,
        [[row[id_idx], placeholder] for row in val_rows],
    )
    _write_csv(private / "validate.csv", [id_col, target_col], [[row[id_idx], row[target_idx]] for row in val_rows])

    manifest = SplitManifest(
        seed=seed,
        ratio=ratio,
        stratify_on=stratify_on,
        train_ids=tuple(row[id_idx] for row in train_rows),
        validation_ids=tuple(row[id_idx] for row in val_rows),
        validation_label_file="private/validate.csv",
        warnings=tuple(warnings),
    )
    (private / "split_manifest.json").write_text(
        json.dumps(manifest.as_dict(), indent=1, sort_keys=True) + "\n", encoding="utf-8"
    )
    return manifest


def _sample_placeholder(bundle: CompetitionBundle) -> str:
    lines = bundle.sample_submission_path.read_text(encoding="utf-8").splitlines()
    if len(lines) > 1 and "," in lines[1]:
        return lines[1].split(",", 1)[1].strip()
    return "0"
