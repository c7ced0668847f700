"""Parsers for every response shape an agent may return.

Each parser is total over arbitrary text: it either returns the parsed
structure or raises ParseError. Nothing here may crash with anything else,
because model output is adversarially messy by nature.
"""

from __future__ import annotations

import ast
import re
from typing import Optional

from ..errors import ParseError
from .templates import SCORE_LABELS

SCHEMAS = (
    "idea_list",
    "solution_paths",
    "cell_response",
    "monitor_action",
    "report",
    "draft_list",
)

PATH_MARKER = re.compile(r"^===SOLUTION_PATH_(\d+)===\s*$", re.MULTILINE)
SEPARATOR = re.compile(r"^===SEPARATOR===\s*$", re.MULTILINE)
BLOCK_HEADER = re.compile(r"^=== (.+?) ===\s*$", re.MULTILINE)
CELL_TAGS = ("goal", "code", "validation_submission", "submission")


def parse_tagged(schema: str, text: str):
    """Parse ``text`` according to ``schema``; the single entry point."""
    try:
        parser = _PARSERS[schema]
    except KeyError:
        raise ParseError(f"unknown response schema {schema!r}") from None
    if not isinstance(text, str):
        raise ParseError(f"{schema}: response is not text")
    try:
        return parser(text)
    except ParseError:
        raise
    except Exception as exc:  # totality: anything unexpected becomes ParseError
        raise ParseError(f"{schema}: {exc}") from exc


def parse_idea_list(text: str) -> list:
    starts = [i for i, ch in enumerate(text) if ch == "["]
    if not starts:
        raise ParseError("idea_list: no list literal in response")
    saw_literal = False
    for start in starts:
        position = start
        while True:
            end = text.find("]", position)
            if end < 0:
                break
            try:
                value = ast.literal_eval(text[start : end + 1])
            except (ValueError, SyntaxError):
                position = end + 1
                continue
            saw_literal = True
            if isinstance(value, list) and all(isinstance(item, str) for item in value):
                return [item.strip() for item in value if item.strip()]
            break  # parsed, wrong shape: try the next opening bracket
    if saw_literal:
        raise ParseError("idea_list: literal is not a list of strings")
    raise ParseError("idea_list: unterminated list literal")


def parse_solution_paths(text: str) -> list:
    markers = list(PATH_MARKER.finditer(text))
    if not markers:
        raise ParseError("solution_paths: no ===SOLUTION_PATH_N=== markers")
    paths = []
    for i, marker in enumerate(markers):
        stop = markers[i + 1].start() if i + 1 < len(markers) else len(text)
        segment = text[marker.end() : stop]
        bullets = [
            line.strip()[2:].strip()
            for line in segment.splitlines()
            if line.strip().startswith("- ")
        ]
        bullets = [b for b in bullets if b]
        if bullets:
            paths.append(bullets)
    if not paths:
        raise ParseError("solution_paths: markers present but no '- ' bullets")
    return paths


def _extract_tag(text: str, name: str) -> Optional[str]:
    match = re.search(rf"<{name}>(.*?)</{name}>", text, re.DOTALL)
    if match is None:
        return None
    content = match.group(1).strip()
    return content or None


def parse_cell_response(text: str) -> dict:
    if not any(f"<{tag}>" in text for tag in CELL_TAGS):
        raise ParseError("cell_response: none of the expected tags present")
    fields = {tag: _extract_tag(text, tag) for tag in CELL_TAGS}
    if (fields["goal"] is None) != (fields["code"] is None):
        raise ParseError(
            "cell_response: <goal> and <code> must be both filled or both "
            "empty (both empty signals completion)"
        )
    return fields


def parse_monitor_action(text: str) -> str:
    words = set(re.findall(r"\b(CONTINUE|STOP)\b", text))
    if len(words) != 1:
        raise ParseError("monitor_action: expected exactly one of CONTINUE or STOP")
    return words.pop()


def parse_report(text: str) -> list:
    headers = list(BLOCK_HEADER.finditer(text))
    if not headers:
        raise ParseError("report: no '=== name ===' block header")
    blocks = []
    for i, header in enumerate(headers):
        stop = headers[i + 1].start() if i + 1 < len(headers) else len(text)
        body = text[header.end() : stop]
        blocks.append(_parse_report_block(header.group(1).strip(), body))
    return blocks


def _parse_report_block(subject: str, body: str) -> dict:
    pipeline = _labeled_line(body, "Pipeline")
    if pipeline is None:
        raise ParseError(f"report: block {subject!r} is missing its Pipeline line")
    scores = {}
    for label in SCORE_LABELS:
        raw = _labeled_line(body, label)
        if raw is None:
            raise ParseError(f"report: block {subject!r} is missing its {label} score")
        match = re.search(r"-?\d+", raw)
        if match is None:
            raise ParseError(
                f"report: block {subject!r} has a non-numeric {label} score: {raw!r}"
            )
        scores[label] = int(match.group())
    weak_match = re.search(r"^Weaknesses:\s*(.*)", body, re.MULTILINE | re.DOTALL)
    if weak_match is None:
        raise ParseError(f"report: block {subject!r} is missing its Weaknesses line")
    return {
        "subject": subject,
        "pipeline": pipeline,
        "scores": scores,
        "weaknesses": weak_match.group(1).strip(),
    }


def _labeled_line(body: str, label: str) -> Optional[str]:
    match = re.search(rf"^{label}:\s*(.*)$", body, re.MULTILINE)
    return match.group(1).strip() if match else None


def parse_draft_list(text: str) -> list:
    drafts = [part.strip() for part in SEPARATOR.split(text)]
    drafts = [part for part in drafts if part]
    if not drafts:
        raise ParseError("draft_list: response holds no drafts")
    return drafts


_PARSERS = {
    "idea_list": parse_idea_list,
    "solution_paths": parse_solution_paths,
    "cell_response": parse_cell_response,
    "monitor_action": parse_monitor_action,
    "report": parse_report,
    "draft_list": parse_draft_list,
}
