"""Evaluator agent: synthesizes and verifies a bundle's offline grading kit.

The generated scripts are an independent reimplementation of the grading
path, written into the bundle so a competition can be scored with nothing
but its own files. Verification runs the kit inside a sandbox session
against the bundle's own sample submission and cross-checks the score
against the built-in grader before accepting anything.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

from ..bundle.grading import VALIDATION, grade
from ..bundle.loader import CompetitionBundle
from ..errors import AgentError, ParseError
from ..sandbox.session import STATUS_OK, close_session, open_session
from ..sandbox.session import execute_cell

MAX_ROUNDS = 5
SCORE_TOLERANCE = 1e-6

Ask = Callable[[str, dict], str]

SCRIPT_BLOCK = re.compile(
    r"current_file:\s*(?P<name>\S+)\s*\n"
    r"explanation:\s*(?P<explanation>.*?)\n"
    r"```python\n(?P<body>.*?)```",
    re.DOTALL,
)


@dataclass(frozen=True, slots=True)
class EvalKit:
    scripts: dict  # relative filename -> file body
    entry: str  # the grader script's filename
    verified: bool
    rounds: int
    warnings: tuple


def parse_script_blocks(text: str) -> dict:
    """Extract current_file/explanation/fenced-code blocks; order-preserving."""
    scripts = {}
    for match in SCRIPT_BLOCK.finditer(text):
        name = match.group("name").strip()
        if "/" in name or "\\" in name or name.startswith("."):
            raise ParseError(f"script block names a suspicious path {name!r}")
        scripts[name] = match.group("body")
    if not scripts:
        raise ParseError("response holds no script blocks")
    return scripts


def _entry_script(scripts: dict) -> str:
    for name in scripts:
        if "grade" in name.lower():
            return name
    return next(iter(scripts))


def synthesize_eval_scripts(
    ask: Ask,
    bundle: CompetitionBundle,
    workdir: Path,
    max_rounds: int = MAX_ROUNDS,
    guest_cmd=None,
) -> EvalKit:
    """Generate the kit, then verify-and-fix until it grades correctly.

    Returns an EvalKit; ``verified`` is False when the fix budget ran out,
    never silently True. The caller decides whether an unverified kit is
    acceptable.
    """
    if not bundle.prepared:
        raise AgentError("cannot synthesize a grading kit before the dataset is split")

    spec = bundle.spec
    file_lines = [
        str(p.relative_to(bundle.root))
        for p in sorted(bundle.root.rglob("*"))
        if p.is_file() and "answers" not in p.parts
    ]
    context = {
        "task_description": spec.description,
        "metric_name": spec.metric_name,
        "id_column": spec.id_column,
        "target_column": spec.target_column,
        "file_listing": "\n".join(file_lines),
    }

    warnings: list = []
    scripts: Optional[dict] = None
    for attempt in range(3):
        response = ask("evaluator_scripts", context)
        try:
            scripts = parse_script_blocks(response)
            break
        except ParseError as exc:
            warnings.append(f"script synthesis unparseable (attempt {attempt + 1}): {exc}")
    if scripts is None:
        raise AgentError("evaluator produced no parseable scripts in three attempts")

    entry = _entry_script(scripts)
    reference = grade(bundle, bundle.public_dir / "validate_sample_submission.csv", VALIDATION)

    session = open_session(
        str(Path(workdir) / "eval_kit"),
        input_mounts={"bundle": str(bundle.public_dir), "truth": str(bundle.private_dir)},
        guest_cmd=guest_cmd,
        session_id="eval-kit",
    )
    rounds = 0
    verified = False
    try:
        for rounds in range(1, max_rounds + 1):
            error = _verify_once(session, scripts, entry, reference)
            if error is None:
                verified = True
                break
            warnings.append(f"verification round {rounds}: {error}")
            fixed = _ask_for_fix(ask, entry, scripts[entry], error, warnings)
            if fixed is None:
                break
            name, body = fixed
            if name not in scripts:
                warnings.append(f"fix round {rounds} introduced new file {name}")
            scripts[name] = body
            entry = _entry_script(scripts)
    finally:
        close_session(session)

    if not verified:
        warnings.append(f"grading kit unverified after {rounds} rounds")
    return EvalKit(
        scripts=scripts,
        entry=entry,
        verified=verified,
        rounds=rounds,
        warnings=tuple(warnings),
    )


def _verify_once(session, scripts: dict, entry: str, reference) -> Optional[str]:
    """One end-to-end check; None when the kit behaves, else the defect."""
    working = Path(session.working_dir)
    for name, body in scripts.items():
        (working / name).write_text(body, encoding="utf-8")
    report_path = working / "eval_report.json"
    if report_path.exists():
        report_path.unlink()

    shim = (
        "import runpy, sys\n"
        f"sys.argv = [{entry!r}, '../input/bundle/validate_sample_submission.csv', "
        "'../input/truth/validate.csv']\n"
        f"runpy.run_path({entry!r}, run_name='__main__')\n"
    )
    outcome = execute_cell(session, shim, goal=f"run {entry} on the sample submission")
    if outcome.status != STATUS_OK:
        return f"{entry} crashed: {outcome.error or outcome.status}\n{outcome.output}"

    if not report_path.exists():
        return f"{entry} ran but wrote no eval_report.json"
    try:
        produced = json.loads(report_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        return f"eval_report.json is not valid JSON: {exc}"
    if set(produced) != {"score", "success", "message"}:
        return (
            "eval_report.json must carry exactly the keys score, success, "
            f"message; got {sorted(produced)}"
        )
    if not isinstance(produced["success"], bool):
        return "eval_report.json success must be a boolean"
    if not isinstance(produced["message"], str):
        return "eval_report.json message must be a string"
    score = produced["score"]
    if score is not None and not isinstance(score, (int, float)):
        return "eval_report.json score must be a number or null"

    if reference.success:
        if not produced["success"]:
            return (
                "the kit rejects the bundle's own sample submission: "
                f"{produced['message']}"
            )
        if score is None or not math.isfinite(float(score)):
            return "the kit graded the sample submission without a finite score"
        if abs(float(score) - reference.score) > SCORE_TOLERANCE:
            return (
                f"score mismatch on the sample submission: kit says {float(score):.6f}, "
                f"the bundled grader says {reference.score:.6f}"
            )
    return None


def _ask_for_fix(
    ask: Ask, name: str, body: str, error: str, warnings: list
) -> Optional[tuple]:
    context = {"script_name": name, "script_body": body, "error": error}
    for attempt in range(2):
        response = ask("evaluator_fix", context)
        try:
            fixed = parse_script_blocks(response)
        except ParseError as exc:
            warnings.append(f"fix unparseable (attempt {attempt + 1}): {exc}")
            continue
        fixed_name, fixed_body = next(iter(fixed.items()))
        return fixed_name, fixed_body
    return None


def write_kit(bundle: CompetitionBundle, kit: EvalKit) -> Path:
    """Persist the kit under private/scripts/ and return that directory."""
    target = bundle.private_dir / "scripts"
    target.mkdir(parents=True, exist_ok=True)
    for name, body in kit.scripts.items():
        (target / name).write_text(body, encoding="utf-8")
    manifest = {
        "entry": kit.entry,
        "verified": kit.verified,
        "rounds": kit.rounds,
        "files": sorted(kit.scripts),
    }
    (target / "kit.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return target
