"""Deterministic toy fixtures: small offline competition bundles for tests and demos.

Everything here is seeded and writes byte-stable files, so two calls with the
same arguments produce identical bundles.
"""

from __future__ import annotations

import json
import random
from pathlib import Path

DEFAULT_DEADLINE = 1_700_000_000.0


def _fmt(value: float) -> str:
    return f"{value:.6f}"


def make_toy_bundle(
    root: Path,
    slug: str = "toy-regression",
    metric: str = "rmse",
    n_train: int = 100,
    n_test: int = 40,
    board_size: int = 50,
    seed: int = 13,
    class_counts: dict[str, int] | None = None,
    stratify: bool = False,
    deadline: float = DEFAULT_DEADLINE,
    with_community: bool = True,
) -> Path:
    """Write a complete bundle directory under `root` and return it.

    Regression metrics get a linear target with noise; accuracy gets string
    labels; auc/log_loss get 0/1 labels. `class_counts` pins exact per-class
    row counts for the classification variants.
    """
    root = Path(root)
    rng = random.Random(seed)
    root.mkdir(parents=True, exist_ok=True)
    (root / "data").mkdir(exist_ok=True)
    (root / "answers").mkdir(exist_ok=True)
    (root / "community").mkdir(exist_ok=True)

    numeric_target = metric in ("rmse", "mae")
    binary_target = metric in ("auc", "log_loss")

    if class_counts is None:
        if binary_target:
            class_counts = {"0": (n_train + 1) // 2, "1": n_train // 2}
        elif not numeric_target:
            class_counts = {"alpha": (n_train + 1) // 2, "beta": n_train // 2}

    def target_for(index: int, x1: float, x2: float) -> str:
        if numeric_target:
            return _fmt(3.0 * x1 - 2.0 * x2 + rng.gauss(0.0, 0.1))
        # walk classes in a fixed order so counts are exact
        remaining = 0
        for label in sorted(class_counts):
            remaining += class_counts[label]
            if index < remaining:
                return label
        return sorted(class_counts)[-1]

    train_rows = []
    for i in range(n_train):
        x1, x2 = rng.uniform(-1, 1), rng.uniform(-1, 1)
        train_rows.append([f"r{i:04d}", _fmt(x1), _fmt(x2), target_for(i, x1, x2)])
    rng.shuffle(train_rows)  # class blocks interleaved, still deterministic

    test_rows, answer_rows = [], []
    for i in range(n_test):
        x1, x2 = rng.uniform(-1, 1), rng.uniform(-1, 1)
        row_id = f"t{i:04d}"
        test_rows.append([row_id, _fmt(x1), _fmt(x2)])
        answer_rows.append([row_id, target_for(i, x1, x2)])

    _write_table(root / "data" / "train.csv", ["id", "x1", "x2", "y"], train_rows)
    _write_table(root / "data" / "test.csv", ["id", "x1", "x2"], test_rows)
    _write_table(root / "answers" / "test.csv", ["id", "y"], answer_rows)

    placeholder = "0.500000" if binary_target else ("alpha" if not numeric_target else "0.000000")
    _write_table(root / "sample_submission.csv", ["id", "y"], [[r[0], placeholder] for r in test_rows])

    higher_better = metric in ("accuracy", "auc")
    scores = sorted((rng.uniform(0.55, 0.99) if higher_better else rng.uniform(0.4, 3.0) for _ in range(board_size)),
                    reverse=higher_better)
    _write_table(root / "leaderboard.csv", ["rank", "score"], [[str(i + 1), _fmt(s)] for i, s in enumerate(scores)])

    spec = {
        "slug": slug,
        "description": (
            f"Predict the y column for every test row of the {slug} table. "
            f"Submissions are scored with {metric}; the file format matches sample_submission.csv."
        ),
        "metric": {"name": metric},
        "deadline": deadline,
        "difficulty": "low",
        "id_column": "id",
        "target_column": "y",
        "stratify_on": "y" if (stratify and not numeric_target) else None,
    }
    (root / "spec.json").write_text(json.dumps(spec, indent=1, sort_keys=True) + "\n", encoding="utf-8")

    if with_community:
        _write_toy_community(root / "community", deadline)
    return root


def _write_table(path: Path, header: list[str], rows: list[list[str]]) -> None:
    lines = [",".join(header)] + [",".join(row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_toy_community(cdir: Path, deadline: float) -> None:
    cdir.mkdir(parents=True, exist_ok=True)

    def meta(name: str, record: dict) -> None:
        (cdir / f"{name}.json").write_text(json.dumps(record, indent=1, sort_keys=True) + "\n", encoding="utf-8")

    (cdir / "mean-predictor.py").write_text(
        "import csv\n"
        "rows = list(csv.reader(open('train.csv')))[1:]\n"
        "mean = sum(float(r[3]) for r in rows) / len(rows)\n"
        "print('constant prediction', mean)\n",
        encoding="utf-8",
    )
    meta(
        "mean-predictor",
        {
            "kind": "kernel",
            "key": "mean-predictor",
            "tier": "contributor",
            "votes": 41,
            "published_at": deadline - 9000,
            "score": 1.9,
            "payload": "mean-predictor.py",
        },
    )

    (cdir / "linear-fit.py").write_text(
        "# ordinary least squares on x1, x2 via the normal equations\n"
        "import csv\n"
        "rows = list(csv.reader(open('train.csv')))[1:]\n"
        "print('fit a linear model y ~ x1 + x2 with', len(rows), 'rows')\n",
        encoding="utf-8",
    )
    meta(
        "linear-fit",
        {
            "kind": "kernel",
            "key": "linear-fit",
            "tier": "expert",
            "votes": 87,
            "published_at": deadline - 5000,
            "score": 0.6,
            "payload": "linear-fit.py",
            "deps": ["dataset:extra-features"],
        },
    )

    (cdir / "overfit-lab.py").write_text("print('memorize the train table, do not do this')\n", encoding="utf-8")
    meta(
        "overfit-lab",
        {
            "kind": "kernel",
            "key": "overfit-lab",
            "tier": "novice",
            "votes": 3,
            "published_at": deadline - 800,
            "payload": "overfit-lab.py",
        },
    )

    (cdir / "extra-features.csv").write_text("id,x1_sq\nr0000,0.25\n", encoding="utf-8")
    meta(
        "extra-features",
        {
            "kind": "dataset",
            "key": "extra-features",
            "published_at": deadline - 20000,
            "payload": "extra-features.csv",
        },
    )

    meta(
        "feature-talk",
        {
            "kind": "discussion",
            "key": "feature-talk",
            "votes": 55,
            "published_at": deadline - 4000,
            "body": (
                "The target looks linear in x1 and x2. Polynomial terms help a little. "
                "Normalizing inputs before fitting also seems to stabilize things."
            ),
            "comments": [["master", "agree, keep the model tiny"], ["novice", "what about trees?"]],
        },
    )
    meta(
        "metric-talk",
        {
            "kind": "discussion",
            "key": "metric-talk",
            "votes": 12,
            "published_at": deadline - 1500,
            "body": "Remember the grader is strict about the submission header and row ids.",
        },
    )


# --- scripted responses for a full two-iteration demo run ---

_CELL_TAGS = (
    "<goal>{goal}</goal>\n<code>{code}</code>\n"
    "<validation_submission>{val}</validation_submission>\n"
    "<submission>{sub}</submission>"
)

_DONE_CELL = _CELL_TAGS.format(goal="", code="", val="", sub="")

_MEAN_TRAIN = """import csv
rows = list(csv.DictReader(open('../input/data/train.csv')))
ys = [float(r['y']) for r in rows]
mean_y = sum(ys) / len(ys)
def predict(row):
    return mean_y
print('trained on', len(rows), 'rows')"""

_LINEAR_TRAIN = """import csv
rows = list(csv.DictReader(open('../input/data/train.csv')))
X = [[1.0, float(r['x1']), float(r['x2'])] for r in rows]
y = [float(r['y']) for r in rows]
n = len(X)
A = [[sum(X[k][i] * X[k][j] for k in range(n)) for j in range(3)] for i in range(3)]
b = [sum(X[k][i] * y[k] for k in range(n)) for i in range(3)]
for i in range(3):
    pivot = A[i][i]
    for j in range(i + 1, 3):
        factor = A[j][i] / pivot
        for m in range(3):
            A[j][m] -= factor * A[i][m]
        b[j] -= factor * b[i]
w = [0.0, 0.0, 0.0]
for i in (2, 1, 0):
    w[i] = (b[i] - sum(A[i][j] * w[j] for j in range(i + 1, 3))) / A[i][i]
def predict(row):
    return w[0] + w[1] * float(row['x1']) + w[2] * float(row['x2'])
print('trained on', n, 'rows')"""

_WRITE_PREDS = """import csv
def write_preds(src, dst):
    rows = list(csv.DictReader(open(src)))
    with open(dst, 'w', newline='') as out:
        writer = csv.writer(out)
        writer.writerow(['id', 'y'])
        for row in rows:
            writer.writerow([row['id'], f'{predict(row):.6f}'])
write_preds('../input/data/validate.csv', 'val_preds.csv')
write_preds('../input/data/test.csv', 'test_preds.csv')
print('wrote val_preds.csv and test_preds.csv')"""

_KERNEL_REPORT = """=== published-work ===
Pipeline: reads train.csv, fits a small estimator, writes one row per required id.
Novelty: 4
Feasibility: 9
Effectiveness: 6
Efficiency: 8
Clarity: 7
Weaknesses: validated on a single split only."""

_RUN_REPORT = """=== finished-run ===
Pipeline: loads the mounted competition files, fits the assigned estimator, writes both submissions.
Novelty: 3
Feasibility: 10
Effectiveness: 6
Efficiency: 9
Clarity: 8
Weaknesses: no ensembling; linear features only."""

_IDEAS = '["normalize the feature columns before fitting", "start from the public linear-fit kernel"]'

_PATHS = """===SOLUTION_PATH_1===
- compute the target mean on the training split
- write the constant prediction for every required id

===SOLUTION_PATH_2===
- fit least squares on x1 and x2 with an intercept
- predict both splits and save the two CSVs

===SOLUTION_PATH_3===
- standardize the features, then fit the linear model
- compare validation scores before picking a submission

===SOLUTION_PATH_4===
- bag several linear fits on bootstrap resamples
- average their predictions per id"""

_DRAFTS_T0 = """DRAFT-ALPHA: keep the baseline simple. Read the training rows, compute the
global mean of the target, and emit it for every validation and test id,
the same trick as the mean-predictor kernel.
===SEPARATOR===
DRAFT-BETA: fit an ordinary least-squares model on x1 and x2 with an
intercept, following the linear-fit kernel, then write predictions for
both splits."""

_DRAFTS_T1 = """DRAFT-GAMMA: refit the least-squares pipeline from run-t0-d1 on the full
training file and regenerate both submissions.
===SEPARATOR===
DRAFT-DELTA: the baseline guard. Reuse the global-mean approach from
run-t0-d0 so the round always has a safe submission."""


def _coder_lane(marker: str, tag: str, train_code: str) -> list[dict]:
    first = _CELL_TAGS.format(goal=f"{tag} step 1", code=train_code, val="", sub="")
    second = _CELL_TAGS.format(
        goal=f"{tag} step 2",
        code=_WRITE_PREDS,
        val="val_preds.csv",
        sub="test_preds.csv",
    )
    return [
        {"role": "coder", "contains": ["fresh Python", marker], "responses": [first]},
        {"role": "coder", "contains": ["This is step", f"{tag} step 1"], "responses": [second]},
        {"role": "coder", "contains": ["This is step", f"{tag} step 2"], "responses": [_DONE_CELL]},
        {"role": "coder", "contains": ["work is done", marker], "responses": [_RUN_REPORT]},
    ]


def make_toy_script(path: Path) -> Path:
    """Write the scripted-backend routing table for a two-iteration demo run
    over the toy regression bundle (two drafts per iteration) and return it."""
    entries: list[dict] = [
        {
            "role": "analyzer",
            "contains": "studying a shared solution",
            "responses": [_KERNEL_REPORT],
        },
        {
            "role": "analyzer",
            "contains": "mining a competition forum thread",
            "responses": [_IDEAS],
        },
        {"role": "proposer", "contains": "maintain the idea pool", "responses": [_IDEAS]},
        {
            "role": "proposer",
            "contains": "planning solution strategies",
            "responses": [_PATHS],
        },
        {"role": "coordinator", "responses": [_DRAFTS_T0, _DRAFTS_T1]},
    ]
    entries += _coder_lane("DRAFT-ALPHA", "alpha", _MEAN_TRAIN)
    entries += _coder_lane("DRAFT-BETA", "beta", _LINEAR_TRAIN)
    entries += _coder_lane("DRAFT-GAMMA", "gamma", _LINEAR_TRAIN)
    entries += _coder_lane("DRAFT-DELTA", "delta", _MEAN_TRAIN)

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(entries, indent=2) + "\n", encoding="utf-8")
    return path
