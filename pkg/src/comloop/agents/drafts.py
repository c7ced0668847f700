"""Solution drafts: the per-worker implementation plans for one iteration."""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from typing import Sequence

from ..community import CommunitySnapshot, KERNEL, ArtifactId
from ..errors import AgentError

BASELINE = re.compile(r"\bbaseline\b", re.IGNORECASE)


@dataclass(frozen=True, slots=True)
class SolutionDraft:
    draft_id: str
    body: str
    is_baseline: bool
    referenced_artifacts: tuple = ()  # ArtifactId entries found in the body

    def __post_init__(self) -> None:
        if not self.body.strip():
            raise AgentError(f"draft {self.draft_id} has an empty body")


def find_referenced_artifacts(body: str, snapshot: CommunitySnapshot) -> tuple:
    """Artifact ids whose keys appear verbatim in the draft text.

    This is how credit edges get built: a draft that names a published
    kernel depends on it, and the implemented result will cite it.
    """
    found = []
    for artifact in snapshot.artifacts():
        if artifact.id.kind == KERNEL and artifact.key in body:
            found.append(artifact.id)
    return tuple(sorted(found, key=lambda a: (a.kind, a.key)))


def build_drafts(
    bodies: Sequence[str], snapshot: CommunitySnapshot, iteration: int
) -> tuple:
    """Turn raw draft texts into SolutionDraft objects with exactly one baseline.

    Returns (drafts, warnings). If the texts mark no draft as a baseline, or
    several, the first draft is designated and the rest are demoted; the
    repair is reported rather than silently applied.
    """
    if not bodies:
        raise AgentError("cannot build drafts from an empty list")
    warnings = []
    drafts = [
        SolutionDraft(
            draft_id=f"t{iteration}-d{i}",
            body=body,
            is_baseline=bool(BASELINE.search(body)),
            referenced_artifacts=find_referenced_artifacts(body, snapshot),
        )
        for i, body in enumerate(bodies)
    ]
    flagged = [d for d in drafts if d.is_baseline]
    if len(flagged) != 1:
        warnings.append(
            f"{len(flagged)} drafts claim the baseline slot; designating the first draft"
        )
        drafts = [replace(d, is_baseline=(i == 0)) for i, d in enumerate(drafts)]
    return tuple(drafts), warnings


def deps_for_publication(draft: SolutionDraft, snapshot: CommunitySnapshot) -> tuple:
    """Dependency ids for publishing this draft's result, all still present."""
    current = snapshot.ids()
    return tuple(a for a in draft.referenced_artifacts if a in current)


__all__ = [
    "SolutionDraft",
    "ArtifactId",
    "find_referenced_artifacts",
    "build_drafts",
    "deps_for_publication",
]
