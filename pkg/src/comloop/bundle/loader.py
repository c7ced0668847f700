"""Competition bundle loading and validation.

A bundle directory packages everything one competition needs offline:

    spec.json               task description, metric, deadline, column roles
    data/                   participant-visible files (train.csv, test.csv, ...)
    sample_submission.csv   header contract for graded submissions
    answers/test.csv        held-out test labels (harness only, never mounted)
    leaderboard.csv         final standings, rank,score, best first
    community/              artifact corpus (see comloop.community.load_corpus)
    public/ private/        materialized by the splitter

Missing pieces are reported by component name: task description, dataset,
grader, leaderboard, or community artifacts.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from ..errors import BundleError
from ..leaderboard import FrozenLeaderboard
from .scoring import MetricSpec, get_metric, registered_metrics

DIFFICULTIES = ("low", "medium", "high")


@dataclass(frozen=True, slots=True)
class CompetitionSpec:
    slug: str
    description: str
    metric_name: str
    deadline: float
    difficulty: str = "medium"
    id_column: str = "id"
    target_column: str = "target"
    stratify_on: str | None = None

    def __post_init__(self) -> None:
        if not self.slug:
            raise BundleError("competition slug must be non-empty")
        if not math.isfinite(self.deadline):
            raise BundleError(f"competition {self.slug!r} deadline must be a finite timestamp")
        if self.difficulty not in DIFFICULTIES:
            raise BundleError(f"competition {self.slug!r} difficulty must be one of {DIFFICULTIES}")


@dataclass(frozen=True, slots=True)
class CompetitionBundle:
    root: Path
    spec: CompetitionSpec
    metric: MetricSpec
    board: FrozenLeaderboard

    @property
    def data_dir(self) -> Path:
        return self.root / "data"

    @property
    def public_dir(self) -> Path:
        return self.root / "public"

    @property
    def private_dir(self) -> Path:
        return self.root / "private"

    @property
    def answers_dir(self) -> Path:
        return self.root / "answers"

    @property
    def community_dir(self) -> Path:
        return self.root / "community"

    @property
    def sample_submission_path(self) -> Path:
        return self.root / "sample_submission.csv"

    @property
    def prepared(self) -> bool:
        return (self.private_dir / "validate.csv").exists()

    def sample_submission_header(self) -> tuple[str, str]:
        first = self.sample_submission_path.read_text(encoding="utf-8").splitlines()[0]
        cells = tuple(cell.strip() for cell in first.split(","))
        if len(cells) != 2:
            raise BundleError(f"sample submission must have exactly two columns, got {first!r}")
        return cells  # type: ignore[return-value]


def _missing(component: str, detail: str) -> BundleError:
    return BundleError(f"bundle is missing its {component} component: {detail}")


def load_bundle(root: Path) -> CompetitionBundle:
    """Validate the five bundle components and return the typed handle."""
    root = Path(root)
    if not root.is_dir():
        raise BundleError(f"bundle directory {root} does not exist")

    spec_path = root / "spec.json"
    if not spec_path.exists():
        raise _missing("task description", "spec.json not found")
    try:
        raw = json.loads(spec_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise _missing("task description", f"spec.json is not valid JSON ({exc})") from exc
    if not raw.get("description"):
        raise _missing("task description", "spec.json has no description text")

    metric_raw = raw.get("metric") or {}
    metric_name = metric_raw.get("name")
    if not metric_name:
        raise _missing("grader", "spec.json declares no metric")
    try:
        metric = get_metric(metric_name)
    except BundleError as exc:
        raise _missing("grader", f"{exc}; registered: {', '.join(registered_metrics())}") from exc

    spec = CompetitionSpec(
        slug=raw.get("slug", ""),
        description=raw["description"],
        metric_name=metric_name,
        deadline=float(raw.get("deadline", math.nan)),
        difficulty=raw.get("difficulty", "medium"),
        id_column=raw.get("id_column", "id"),
        target_column=raw.get("target_column", "target"),
        stratify_on=raw.get("stratify_on"),
    )

    data_dir = root / "data"
    if not data_dir.is_dir():
        raise _missing("dataset", "data/ directory not found")
    for required in ("train.csv", "test.csv"):
        if not (data_dir / required).exists():
            raise _missing("dataset", f"data/{required} not found")
    if not (root / "sample_submission.csv").exists():
        raise _missing("dataset", "sample_submission.csv not found")

    board_path = root / "leaderboard.csv"
    if not board_path.exists():
        raise _missing("leaderboard", "leaderboard.csv not found")
    try:
        board = FrozenLeaderboard.from_csv(board_path, metric.direction)
    except Exception as exc:
        raise _missing("leaderboard", str(exc)) from exc

    if not (root / "community").is_dir():
        raise _missing("community artifacts", "community/ directory not found")

    return CompetitionBundle(root=root, spec=spec, metric=metric, board=board)


def list_bundles(root: Path) -> tuple[Path, ...]:
    """Enumerate bundle directories (anything holding a spec.json) under root."""
    root = Path(root)
    return tuple(sorted(p.parent for p in root.glob("*/spec.json")))
