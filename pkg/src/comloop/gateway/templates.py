"""Prompt templates for every agent role, plus the renderer.

Placeholders are lowercase identifiers in single braces, e.g. ``{draft}``.
Rendering substitutes exactly those; any other brace in a template is
literal text. Response-format markers used here (the ``===SOLUTION_PATH_N===``
and ``===SEPARATOR===`` fences, the angle-bracket tags, the score-line
labels) must stay in lockstep with ``parsing.py``.
"""

from __future__ import annotations

import re

from ..errors import TemplateError

PLACEHOLDER = re.compile(r"\{([a-z_][a-z0-9_]*)\}")

SCORE_LABELS = ("Novelty", "Feasibility", "Effectiveness", "Efficiency", "Clarity")

REPORT_FORMAT = """=== <name of the work you are describing> ===
Pipeline: <one sentence tracing data in to predictions out>
Novelty: <0-10>
Feasibility: <0-10>
Effectiveness: <0-10>
Efficiency: <0-10>
Clarity: <0-10>
Weaknesses: <the sharpest criticisms you can defend>"""

CELL_FORMAT = """<goal>what this cell is meant to accomplish</goal>
<code>the Python to run</code>
<validation_submission>relative path of the validation-split predictions this cell writes, if any</validation_submission>
<submission>relative path of the test-split predictions this cell writes, if any</submission>"""

TEMPLATES: dict = {
    "analyzer_kernels": """You are studying a shared solution from a modeling competition.

Competition brief:
{task_description}

The solution below is titled "{artifact_name}". Read it closely and write a
structured assessment so that other people can decide what to borrow.

{artifact_body}

Answer in exactly this shape, one block, nothing before or after it:

""" + REPORT_FORMAT + """

Scores are integers from 0 to 10. Ground every number in what the code
actually does, not in what its comments promise.""",

    "analyzer_discussions": """You are mining a competition forum thread for usable ideas.

Competition brief:
{task_description}

Thread "{artifact_name}":

{artifact_body}

List every concrete, actionable technique the thread suggests for this
competition. Answer with a single Python list of short strings and nothing
else, for example:

["target-encode the categorical columns", "ensemble with rank averaging"]

Leave out vague encouragement; keep only steps someone could implement.""",

    "proposer_brainstorm": """You are planning solution strategies for a modeling competition.

Competition brief:
{task_description}

Assessments of published solutions:
{reports_digest}

Idea pool gathered so far:
{ideas_digest}

Propose at least {n_paths} distinct solution paths. Make them genuinely
different in approach, not parameter tweaks of one another. Format each path
exactly like this, numbering upward from 1:

===SOLUTION_PATH_1===
- first concrete step
- second concrete step

===SOLUTION_PATH_2===
- ...

Every line inside a path starts with "- ". No prose outside the paths.""",

    "proposer_filter": """You maintain the idea pool for a competition team.

Competition brief:
{task_description}

Newly suggested ideas:
{candidate_ideas}

Ideas already in the pool:
{existing_ideas}

Return the newly suggested ideas worth keeping: drop duplicates of the
existing pool, drop near-duplicates of each other, drop anything
inapplicable to this competition. Answer with a single Python list of
strings and nothing else.""",

    "coordinator_drafts": """You coordinate a team attacking a modeling competition.

Competition brief:
{task_description}

Candidate solution paths:
{solution_paths}

Idea pool:
{ideas_digest}

Write {n_drafts} implementation drafts, one per teammate. Each draft is a
self-contained plan: data handling, features, model, validation, and which
published work it builds on (name that work explicitly so credit is
traceable). Exactly one draft must be a deliberately simple baseline and
say the word "baseline". Separate consecutive drafts with a line containing
only:

===SEPARATOR===

No text before the first draft or after the last.""",

    "coder_first_cell": """You are implementing a competition solution inside a fresh Python
sandbox. The working directory is empty; competition files are mounted
read-only under ../input/. Validation and test rows are separate files; the
grader scores a two-column CSV (id column then prediction column).

Competition brief:
{task_description}

Metric: {metric_name}

Files available:
{file_listing}

Your assigned draft:
{draft}

Work one cell at a time. Reply with exactly these four tags:

""" + CELL_FORMAT + """

Leave <validation_submission> and <submission> empty in cells that do not
write predictions. Keep each cell small enough to debug from its output.""",

    "coder_revision": """You are continuing work in the same Python sandbox; variables and files
from earlier cells are still present. This is step {step} of at most
{max_steps}.

Previous cell goal:
{goal}

Previous cell code:
{code}

What happened:
{feedback}

Decide the next cell. Reply with the same four tags as before:

""" + CELL_FORMAT + """

If the solution is finished and submissions are written, signal completion
by leaving both the <goal> tag and the <code> tag empty. Leave both empty
or fill both; never one without the other.""",

    "coder_report": """Your competition work is done. Summarize it so teammates can assess and
reuse it without reading the transcript.

Your assigned draft:
{draft}

What your cells did, in order:
{history_digest}

Answer in exactly this shape, one block, nothing before or after it:

""" + REPORT_FORMAT + """

Score your own work honestly; inflated numbers mislead the next iteration.""",

    "evaluator_scripts": """You are writing the offline grading kit for a modeling competition, to run
with no network and no knowledge of any contestant.

Competition brief:
{task_description}

Metric: {metric_name}
Submission format: CSV with columns {id_column},{target_column} (header
included), one row per required id.

Files in the bundle:
{file_listing}

Write the scripts the kit needs (at minimum a grader that reads a
submission path and a truth path, then writes eval_report.json). For each
script answer one block:

current_file: <relative path>
explanation: <what it does and why>
```python
<the complete file>
```

Repeat the block for every file. No other text.""",

    "evaluator_fix": """A grading-kit script failed when executed.

File: {script_name}

Current contents:
{script_body}

Failure:
{error}

Return the corrected file as one block in the same shape:

current_file: {script_name}
explanation: <what was wrong and what changed>
```python
<the complete corrected file>
```""",

    "monitor": """You are watching a long-running code cell to catch runaway work early.

Declared goal of the cell:
{goal}

Output so far:
{output}

If the output is consistent with progress toward the goal, answer CONTINUE.
If it shows a hang, a loop making no progress, or work unrelated to the
goal, answer STOP. Answer with the single word CONTINUE or STOP.""",
}

TEMPLATE_ROLES: dict = {
    "analyzer_kernels": "analyzer",
    "analyzer_discussions": "analyzer",
    "proposer_brainstorm": "proposer",
    "proposer_filter": "proposer",
    "coordinator_drafts": "coordinator",
    "coder_first_cell": "coder",
    "coder_revision": "coder",
    "coder_report": "coder",
    "evaluator_scripts": "evaluator",
    "evaluator_fix": "evaluator",
    "monitor": "monitor",
}


def template_names() -> tuple:
    return tuple(sorted(TEMPLATES))


def render_prompt(name: str, context: dict) -> str:
    """Fill template ``name`` from ``context``; unknown names and missing
    placeholders raise TemplateError."""
    try:
        text = TEMPLATES[name]
    except KeyError:
        raise TemplateError(f"unknown template {name!r}") from None

    def substitute(match: "re.Match[str]") -> str:
        key = match.group(1)
        if key not in context:
            raise TemplateError(f"template {name!r} needs placeholder {key!r}")
        return str(context[key])

    return PLACEHOLDER.sub(substitute, text)
