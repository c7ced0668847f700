"""Proposer agent: refines the idea pool and brainstorms solution paths."""

from __future__ import annotations

from typing import Callable, Sequence

from ..errors import ParseError
from ..gateway.parsing import parse_tagged
from .ideas import Idea, IdeaPool, merge_memory

MIN_PATHS = 4

Ask = Callable[[str, dict], str]


def refine_ideas(
    ask: Ask,
    task_description: str,
    candidates: Sequence[Idea],
    memory: IdeaPool,
    iteration: int,
    max_reasks: int = 2,
) -> tuple:
    """Filter candidate ideas against the pool and merge the survivors.

    Returns (new_pool, warnings). When every ask fails to parse, the
    mechanical fallback keeps all non-duplicate candidates: losing the
    model's judgement is survivable, losing the ideas is not.
    """
    warnings: list = []
    if not candidates:
        return memory, warnings
    context = {
        "task_description": task_description,
        "candidate_ideas": "\n".join(f"- {idea.text}" for idea in candidates),
        "existing_ideas": memory.digest(limit=0),
    }
    kept_texts = None
    for attempt in range(max_reasks + 1):
        response = ask("proposer_filter", context)
        try:
            kept_texts = parse_tagged("idea_list", response)
            break
        except ParseError as exc:
            warnings.append(f"idea filter unparseable (attempt {attempt + 1}): {exc}")
    if kept_texts is None:
        warnings.append("idea filter failed repeatedly; keeping all non-duplicate candidates")
        survivors = list(candidates)
    else:
        survivors = [
            Idea(text=text, source="filter", iteration=iteration) for text in kept_texts
        ]
    return merge_memory(memory, survivors), warnings


def brainstorm_paths(
    ask: Ask,
    task_description: str,
    reports_digest: str,
    memory: IdeaPool,
    n_paths: int = MIN_PATHS,
    max_reasks: int = 1,
) -> tuple:
    """Produce solution paths, each a list of concrete steps.

    Returns (paths, warnings). One re-ask covers a malformed response and
    one more covers a short list; after that, whatever parsed is accepted,
    because the coordinator can still draft from fewer paths.
    """
    warnings: list = []
    context = {
        "task_description": task_description,
        "reports_digest": reports_digest,
        "ideas_digest": memory.digest(),
        "n_paths": n_paths,
    }
    paths: list = []
    for attempt in range(max_reasks + 1):
        response = ask("proposer_brainstorm", context)
        try:
            paths = parse_tagged("solution_paths", response)
        except ParseError as exc:
            warnings.append(f"brainstorm unparseable (attempt {attempt + 1}): {exc}")
            continue
        if len(paths) >= n_paths:
            return paths, warnings
        warnings.append(
            f"brainstorm returned {len(paths)} paths, wanted {n_paths} "
            f"(attempt {attempt + 1})"
        )
    if not paths:
        warnings.append("brainstorm failed repeatedly; continuing with no fresh paths")
    return paths, warnings


def paths_digest(paths: Sequence[Sequence[str]]) -> str:
    if not paths:
        return "(no candidate paths)"
    blocks = []
    for i, path in enumerate(paths, start=1):
        steps = "\n".join(f"- {step}" for step in path)
        blocks.append(f"Path {i}:\n{steps}")
    return "\n\n".join(blocks)
