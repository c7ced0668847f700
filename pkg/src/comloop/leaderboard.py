"""Leaderboard comparison metrics: win rate, median position, medal brackets.

A frozen leaderboard is the final standing of a competition, best entry
first. All comparisons are strict: matching an existing entry exactly beats
nobody and never crosses the median.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .errors import MetricsError

HIGHER = "higher"
LOWER = "lower"

GOLD = "gold"
SILVER = "silver"
BRONZE = "bronze"
NONE = "none"


@dataclass(frozen=True, slots=True)
class FrozenLeaderboard:
    entries: tuple[float, ...]  # best-first
    direction: str

    def __post_init__(self) -> None:
        if not self.entries:
            raise MetricsError("a leaderboard needs at least one entry")
        if self.direction not in (HIGHER, LOWER):
            raise MetricsError(f"unknown leaderboard direction {self.direction!r}")
        for value in self.entries:
            if not math.isfinite(value):
                raise MetricsError("leaderboard entries must be finite")
        for a, b in zip(self.entries, self.entries[1:]):
            ordered = a >= b if self.direction == HIGHER else a <= b
            if not ordered:
                raise MetricsError("leaderboard entries must be sorted best-first")

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def median(self) -> float:
        n = len(self.entries)
        ordered = sorted(self.entries)
        if n % 2 == 1:
            return ordered[n // 2]
        return (ordered[n // 2 - 1] + ordered[n // 2]) / 2.0

    @classmethod
    def from_csv(cls, path: Path, direction: str) -> "FrozenLeaderboard":
        rows = list(csv.DictReader(Path(path).open(encoding="utf-8", newline="")))
        if not rows or "rank" not in rows[0] or "score" not in rows[0]:
            raise MetricsError(f"leaderboard file {Path(path).name} needs rank,score columns")
        try:
            parsed = [(int(r["rank"]), float(r["score"])) for r in rows]
        except (TypeError, ValueError) as exc:
            raise MetricsError(f"leaderboard file {Path(path).name} has a non-numeric row: {exc}") from exc
        parsed.sort()
        if [rank for rank, _ in parsed] != list(range(1, len(parsed) + 1)):
            raise MetricsError(f"leaderboard file {Path(path).name} ranks must be dense 1..N")
        return cls(entries=tuple(score for _, score in parsed), direction=direction)


def _is_worse(entry: float, score: float, direction: str) -> bool:
    return entry < score if direction == HIGHER else entry > score


def _is_better(entry: float, score: float, direction: str) -> bool:
    return entry > score if direction == HIGHER else entry < score


def win_rate(score: float | None, board: FrozenLeaderboard) -> float:
    """Fraction of the board strictly beaten; no valid submission scores 0."""
    if score is None:
        return 0.0
    worse = sum(1 for entry in board.entries if _is_worse(entry, score, board.direction))
    return worse / len(board)


def above_median(score: float | None, board: FrozenLeaderboard) -> bool:
    if score is None:
        return False
    return _is_better(score, board.median, board.direction)


def virtual_rank(score: float, board: FrozenLeaderboard) -> int:
    better = sum(1 for entry in board.entries if _is_better(entry, score, board.direction))
    return 1 + better


@dataclass(frozen=True, slots=True)
class Cutoff:
    fixed: int = 0
    pct: float = 0.0

    def ranks(self, n_teams: int) -> int:
        return self.fixed + math.floor(self.pct * n_teams)


@dataclass(frozen=True, slots=True)
class Bracket:
    max_teams: int | None  # None = open-ended
    gold: Cutoff
    silver: Cutoff
    bronze: Cutoff


@dataclass(frozen=True, slots=True)
class MedalRule:
    """Rank cutoffs per team-count bracket; the default table ships as data."""

    brackets: tuple[Bracket, ...]

    def cutoffs(self, n_teams: int) -> tuple[int, int, int]:
        for bracket in self.brackets:
            if bracket.max_teams is None or n_teams <= bracket.max_teams:
                gold = max(1, bracket.gold.ranks(n_teams))
                silver = max(gold, bracket.silver.ranks(n_teams))
                bronze = max(silver, bracket.bronze.ranks(n_teams))
                return min(gold, n_teams), min(silver, n_teams), min(bronze, n_teams)
        raise MetricsError(f"no medal bracket covers {n_teams} teams")

    @classmethod
    def from_mapping(cls, payload: dict) -> "MedalRule":
        brackets = []
        for raw in payload["brackets"]:
            brackets.append(
                Bracket(
                    max_teams=raw.get("max_teams"),
                    gold=_cutoff(raw["gold"]),
                    silver=_cutoff(raw["silver"]),
                    bronze=_cutoff(raw["bronze"]),
                )
            )
        return cls(brackets=tuple(brackets))

    @classmethod
    def from_json(cls, path: Path) -> "MedalRule":
        return cls.from_mapping(json.loads(Path(path).read_text(encoding="utf-8")))


def _cutoff(raw: dict) -> Cutoff:
    return Cutoff(fixed=int(raw.get("fixed", 0)), pct=float(raw.get("pct", 0.0)))


def default_medal_rule() -> MedalRule:
    payload = json.loads(resources.files("comloop").joinpath("data/medal_rule.json").read_text(encoding="utf-8"))
    return MedalRule.from_mapping(payload)


def assign_medal(score: float | None, board: FrozenLeaderboard, rule: MedalRule | None = None) -> str:
    if score is None:
        return NONE
    rule = rule or default_medal_rule()
    rank = virtual_rank(score, board)
    gold, silver, bronze = rule.cutoffs(len(board))
    if rank <= gold:
        return GOLD
    if rank <= silver:
        return SILVER
    if rank <= bronze:
        return BRONZE
    return NONE


# --- cross-competition aggregation ----------------------------------------------


@dataclass(frozen=True, slots=True)
class OutcomeRow:
    """One competition's final result for a single engine run."""

    competition: str
    valid_submission: bool
    score: float | None
    win_rate: float
    above_median: bool
    medal: str

    def __post_init__(self) -> None:
        if self.medal not in (GOLD, SILVER, BRONZE, NONE):
            raise MetricsError(f"unknown medal {self.medal!r}")
        if self.medal != NONE and not self.valid_submission:
            raise MetricsError("a medal requires a valid submission")


@dataclass(frozen=True, slots=True)
class AggregateSummary:
    competitions: int
    valid_submission_rate: float
    any_medal_rate: float
    above_median_rate: float
    mean_win_rate: float

    def as_dict(self) -> dict:
        return {
            "competitions": self.competitions,
            "valid_submission_rate": self.valid_submission_rate,
            "any_medal_rate": self.any_medal_rate,
            "above_median_rate": self.above_median_rate,
            "mean_win_rate": self.mean_win_rate,
        }


def aggregate(rows: Sequence[OutcomeRow]) -> AggregateSummary:
    if not rows:
        raise MetricsError("cannot aggregate an empty result table")
    n = len(rows)
    return AggregateSummary(
        competitions=n,
        valid_submission_rate=sum(1 for r in rows if r.valid_submission) / n,
        any_medal_rate=sum(1 for r in rows if r.medal != NONE) / n,
        above_median_rate=sum(1 for r in rows if r.above_median) / n,
        mean_win_rate=sum(r.win_rate for r in rows) / n,
    )


def format_aggregate(summary: AggregateSummary) -> str:
    lines = [
        f"competitions        {summary.competitions}",
        f"valid submissions   {summary.valid_submission_rate * 100:.2f}%",
        f"any medal           {summary.any_medal_rate * 100:.2f}%",
        f"above median        {summary.above_median_rate * 100:.2f}%",
        f"mean win rate       {summary.mean_win_rate * 100:.2f}%",
    ]
    return "\n".join(lines)


def iter_outcomes(records: Iterable[dict]) -> list[OutcomeRow]:
    return [
        OutcomeRow(
            competition=r["competition"],
            valid_submission=bool(r["valid_submission"]),
            score=r.get("score"),
            win_rate=float(r.get("win_rate", 0.0)),
            above_median=bool(r.get("above_median", False)),
            medal=r.get("medal", NONE),
        )
        for r in records
    ]
