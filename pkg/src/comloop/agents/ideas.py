"""The idea pool: deduplicated technique suggestions carried across iterations."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator

_WS = re.compile(r"\s+")


def normalize_idea(text: str) -> str:
    """Casefold and collapse whitespace so trivial rewordings collide."""
    return _WS.sub(" ", text.strip()).casefold()


@dataclass(frozen=True, slots=True)
class Idea:
    text: str
    source: str = ""  # artifact key or agent lane the idea came from
    iteration: int = 0

    @property
    def normalized(self) -> str:
        return normalize_idea(self.text)


@dataclass
class IdeaPool:
    """Ordered, duplicate-free collection of ideas.

    Insertion order is the order of first appearance; a later duplicate
    (after normalization) never displaces or re-ranks the original.
    """

    _ideas: list = field(default_factory=list)
    _seen: set = field(default_factory=set)

    def add(self, idea: Idea) -> bool:
        key = idea.normalized
        if not key or key in self._seen:
            return False
        self._seen.add(key)
        self._ideas.append(idea)
        return True

    def extend(self, ideas: Iterable[Idea]) -> int:
        return sum(1 for idea in ideas if self.add(idea))

    def __len__(self) -> int:
        return len(self._ideas)

    def __iter__(self) -> Iterator[Idea]:
        return iter(self._ideas)

    def __contains__(self, text: str) -> bool:
        return normalize_idea(text) in self._seen

    def texts(self) -> tuple:
        return tuple(idea.text for idea in self._ideas)

    def digest(self, limit: int = 40) -> str:
        """Bullet list for prompting; newest ideas win the tail slots."""
        chosen = self._ideas[-limit:] if limit else list(self._ideas)
        if not chosen:
            return "(no ideas collected yet)"
        return "\n".join(f"- {idea.text}" for idea in chosen)


def merge_memory(existing: IdeaPool, fresh: Iterable[Idea]) -> IdeaPool:
    """Union with existing-first precedence; neither input is mutated."""
    merged = IdeaPool()
    merged.extend(existing)
    merged.extend(fresh)
    return merged
