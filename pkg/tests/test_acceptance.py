"""Acceptance checks: one test per engine contract, one printed verdict each.

Run with `pytest tests/test_acceptance.py -v -s` to see the verdict lines.
Every check here is either an end-to-end behavior or a property verified
against an independently written oracle coded directly in this file.
"""

from __future__ import annotations

import json
import math
import random
import shutil
import time
from collections import Counter
from contextlib import contextmanager
from pathlib import Path

import pytest

from comloop.agents.coder import run_coding_agent
from comloop.agents.drafts import SolutionDraft
from comloop.agents.ideas import Idea, IdeaPool, merge_memory, normalize_idea
from comloop.bundle.audit import audit_no_leakage
from comloop.bundle.grading import TEST, VALIDATION, grade
from comloop.bundle.loader import load_bundle
from comloop.bundle.scoring import get_metric, registered_metrics
from comloop.bundle.splitting import split_dataset
from comloop.community import (
    ArtifactId,
    CommunityCorpus,
    CommunitySnapshot,
    DependencyGraph,
    Dataset,
    Discussion,
    Kernel,
    dependency_closure,
    hash_tree,
    init_community,
    publish,
)
from comloop.config import RunConfig
from comloop.engine import run_engine
from comloop.errors import CommunityError, GraphError, MetricsError
from comloop.fixtures import make_toy_bundle, make_toy_script
from comloop.leaderboard import (
    NONE,
    FrozenLeaderboard,
    OutcomeRow,
    aggregate,
    assign_medal,
    format_aggregate,
    virtual_rank,
    win_rate,
    above_median,
)
from comloop.sandbox.budget import (
    SESSION_EXHAUSTED,
    WITHIN,
    Budget,
    enforce_budgets,
)
from comloop.sandbox.session import (
    STATUS_MONITOR,
    STATUS_TIMEOUT,
    close_session,
    execute_cell,
    open_session,
)


@contextmanager
def criterion(name: str):
    """Print a single machine-readable verdict line per acceptance check.

    The line is printed inline (visible under ``-s``) and recorded in
    ``VERDICTS`` so conftest can repeat it in the terminal summary, which
    pytest never captures.
    """
    try:
        yield
    except BaseException:
        _verdict(f"ACCEPTANCE FAIL {name}")
        raise
    _verdict(f"ACCEPTANCE PASS {name}")


VERDICTS: list = []


def _verdict(line: str) -> None:
    VERDICTS.append(line)
    print(line)


def cell(goal: str, code: str, val: str = "", sub: str = "") -> str:
    return (
        f"<goal>{goal}</goal>\n<code>{code}</code>\n"
        f"<validation_submission>{val}</validation_submission>\n"
        f"<submission>{sub}</submission>"
    )


# --- 1: end-to-end scripted run -----------------------------------------------


def test_end_to_end_scripted_run(tmp_path):
    with criterion("end-to-end scripted run (2 iterations, <60s, byte-reproducible)"):
        started = time.monotonic()
        bundle_dir = make_toy_bundle(tmp_path / "bundle")  # 100 train + 40 test rows
        script = make_toy_script(tmp_path / "script.json")
        config = RunConfig(
            bundle_path=str(bundle_dir),
            backend="scripted",
            script_path=str(script),
            seed=7,
            max_iterations=2,
            n_parallel=2,
            n_drafts=2,
            n_kernel_samples=2,
            n_discussion_samples=1,
        )
        summaries = [run_engine(config, tmp_path / name) for name in ("first", "second")]
        elapsed = time.monotonic() - started
        assert elapsed < 60.0, f"two runs took {elapsed:.1f}s"

        for summary in summaries:
            assert len(summary["iterations"]) >= 2
            for iteration in summary["iterations"]:
                assert len(iteration["published"]) >= 1

        submission = tmp_path / "first" / "submission.csv"
        assert submission.exists()
        report = grade(load_bundle(bundle_dir), submission, target=TEST)
        assert report.success, report.message

        assert hash_tree(tmp_path / "first") == hash_tree(tmp_path / "second")
        assert len(hash_tree(tmp_path / "first")) > 20  # a real artifact tree, not stubs


# --- 2: temporal soundness ------------------------------------------------------


def test_temporal_soundness_over_randomized_corpora():
    with criterion("temporal soundness (1000 corpora x 1000 artifacts, 0 admissions)"):
        rng = random.Random(0xC0FFEE)
        for trial in range(1000):
            deadline = rng.uniform(100.0, 50_000.0)
            kernels, datasets, discussions = [], [], []
            for i in range(1000):
                at = rng.uniform(0.0, 2.0 * deadline)
                kind = i % 3
                if kind == 0:
                    kernels.append(Kernel(f"k{i}", "none", i % 7, at, "x"))
                elif kind == 1:
                    datasets.append(Dataset(f"s{i}", at))
                else:
                    discussions.append(Discussion(f"d{i}", i % 5, at, "x"))
            corpus = CommunityCorpus(
                kernels=tuple(kernels),
                datasets=tuple(datasets),
                discussions=tuple(discussions),
            )
            snapshot = init_community(
                corpus, deadline, k_kernel=1000, k_discussion=1000, dataset_access=True
            )
            late = [a for a in snapshot.artifacts() if a.published_at >= deadline]
            assert late == [], f"trial {trial} admitted {len(late)} post-deadline artifacts"


# --- 3: leakage audit -----------------------------------------------------------


def test_leakage_audit_detects_planted_leaks_only(tmp_path):
    with criterion("leakage audit (50 clean + 50 planted splits, exact flagging)"):
        bundle = load_bundle(make_toy_bundle(tmp_path / "bundle"))
        for seed in range(50):
            manifest = split_dataset(bundle, seed=seed)
            clean = audit_no_leakage(bundle, manifest)
            assert clean == [], f"seed {seed}: false positives {[v.path for v in clean]}"

        truth = bundle.private_dir / "validate.csv"
        for seed in range(50):
            manifest = split_dataset(bundle, seed=1000 + seed)
            if seed % 3 == 0:
                planted = bundle.public_dir / "cache.csv"
                shutil.copy2(truth, planted)
            elif seed % 3 == 1:
                # headerless, shuffled copy buried in a subdirectory
                rows = truth.read_text(encoding="utf-8").splitlines()[1:]
                random.Random(seed).shuffle(rows)
                planted = bundle.public_dir / "deep" / "stash.txt"
                planted.parent.mkdir()
                planted.write_text("\n".join(rows) + "\n", encoding="utf-8")
            else:
                planted = bundle.public_dir / "link.csv"
                planted.symlink_to(truth)
            flagged = sorted({v.path for v in audit_no_leakage(bundle, manifest)})
            expected = planted.relative_to(bundle.public_dir).as_posix()
            assert flagged == [expected], f"seed {seed}: flagged {flagged}"


# --- 4: split exactness ---------------------------------------------------------


def test_stratified_split_is_exact_across_seeds(tmp_path):
    with criterion("stratified 90/10 split ({50,50} -> {5,5} across 100 seeds)"):
        bundle = load_bundle(
            make_toy_bundle(
                tmp_path / "bundle",
                metric="accuracy",
                class_counts={"alpha": 50, "beta": 50},
                stratify=True,
                with_community=False,
            )
        )
        rows = (bundle.data_dir / "train.csv").read_text(encoding="utf-8").splitlines()[1:]
        label_of = {line.split(",")[0]: line.split(",")[3] for line in rows}
        for seed in range(100):
            manifest = split_dataset(bundle, seed=seed)
            counts = Counter(label_of[row_id] for row_id in manifest.validation_ids)
            assert counts == {"alpha": 5, "beta": 5}, f"seed {seed}: {dict(counts)}"


# --- 5: grading oracle equivalence ----------------------------------------------


def brute_metric(name: str, truth: list, preds: list) -> float:
    """Definitions written straight from the textbook formulas."""
    n = len(truth)
    if name == "rmse":
        return math.sqrt(sum((t - p) ** 2 for t, p in zip(truth, preds)) / n)
    if name == "mae":
        return sum(abs(t - p) for t, p in zip(truth, preds)) / n
    if name == "accuracy":
        return sum(1 for t, p in zip(truth, preds) if t == p) / n
    if name == "auc":
        pos = [p for t, p in zip(truth, preds) if t == 1.0]
        neg = [p for t, p in zip(truth, preds) if t == 0.0]
        credit = 0.0
        for a in pos:
            for b in neg:
                credit += 1.0 if a > b else (0.5 if a == b else 0.0)
        return credit / (len(pos) * len(neg))
    if name == "log_loss":
        return -sum(
            t * math.log(p) + (1.0 - t) * math.log(1.0 - p)
            for t, p in zip(truth, preds)
        ) / n
    raise AssertionError(f"no oracle for metric {name!r}")


def random_pair(name: str, rng: random.Random):
    n = rng.randint(5, 40)
    if name in ("rmse", "mae"):
        truth = [rng.uniform(-100.0, 100.0) for _ in range(n)]
        preds = [rng.uniform(-100.0, 100.0) for _ in range(n)]
    elif name == "accuracy":
        labels = ("alpha", "beta", "gamma")
        truth = [rng.choice(labels) for _ in range(n)]
        preds = [rng.choice(labels) for _ in range(n)]
    else:  # auc / log_loss need 0/1 truth with both classes present
        truth = [float(rng.random() < 0.5) for _ in range(n)]
        truth[0], truth[1] = 0.0, 1.0
        if name == "auc" and rng.random() < 0.3:
            grid = [round(rng.random(), 1) for _ in range(4)]  # forced ties
            preds = [rng.choice(grid) for _ in range(n)]
        else:
            preds = [rng.uniform(0.001, 0.999) for _ in range(n)]
    return truth, preds


def test_grading_matches_brute_force_oracles(tmp_path):
    with criterion("grading equivalence (200 random pairs per metric, <=1e-9 relative)"):
        for metric_name in registered_metrics():
            bundle = load_bundle(
                make_toy_bundle(
                    tmp_path / metric_name, metric=metric_name, with_community=False
                )
            )
            split_dataset(bundle, seed=0)
            truth_path = bundle.private_dir / "validate.csv"
            submission = tmp_path / metric_name / "entry.csv"
            rng = random.Random(hash(metric_name) & 0xFFFF)

            for case in range(200):
                truth, preds = random_pair(metric_name, rng)
                ids = [f"v{case}_{i}" for i in range(len(truth))]
                truth_path.write_text(
                    "id,y\n" + "".join(f"{i},{t}\n" for i, t in zip(ids, truth)),
                    encoding="utf-8",
                )
                shuffled = list(zip(ids, preds))
                rng.shuffle(shuffled)
                submission.write_text(
                    "id,y\n" + "".join(f"{i},{p}\n" for i, p in shuffled),
                    encoding="utf-8",
                )
                report = grade(bundle, submission, target=VALIDATION)
                assert report.success, f"{metric_name} case {case}: {report.message}"
                expected = brute_metric(metric_name, truth, preds)
                tolerance = 1e-9 * max(1.0, abs(expected))
                assert abs(report.score - expected) <= tolerance, (
                    f"{metric_name} case {case}: grade {report.score!r} "
                    f"vs oracle {expected!r}"
                )

            produced = json.loads(
                (bundle.private_dir / "eval_report.json").read_text(encoding="utf-8")
            )
            assert sorted(produced) == ["message", "score", "success"]
            assert isinstance(produced["score"], float)
            assert isinstance(produced["success"], bool)
            assert isinstance(produced["message"], str)


# --- 6: leaderboard metrics oracles ---------------------------------------------


def oracle_cutoffs(n: int) -> tuple[int, int, int]:
    """The published bracket table, recomputed with plain arithmetic."""
    if n <= 99:
        gold, silver, bronze = 0.10 * n, 0.20 * n, 0.40 * n
        gold, silver, bronze = math.floor(gold), math.floor(silver), math.floor(bronze)
    elif n <= 249:
        gold, silver, bronze = 10, math.floor(0.20 * n), math.floor(0.40 * n)
    elif n <= 999:
        gold, silver, bronze = 10 + math.floor(0.002 * n), 50, 100
    else:
        gold = 10 + math.floor(0.002 * n)
        silver, bronze = math.floor(0.05 * n), math.floor(0.10 * n)
    gold = max(1, gold)
    silver = max(gold, silver)
    bronze = max(silver, bronze)
    return min(gold, n), min(silver, n), min(bronze, n)


def test_leaderboard_metrics_match_exhaustive_oracles():
    with criterion("leaderboard metrics vs oracles (1000 boards, sizes 1-2000)"):
        rng = random.Random(20_08)
        for trial in range(1000):
            n = rng.randint(1, 2000)
            direction = "higher" if trial % 2 == 0 else "lower"
            entries = sorted(
                (round(rng.uniform(0.0, 100.0), 2) for _ in range(n)),
                reverse=(direction == "higher"),
            )
            board = FrozenLeaderboard(entries=tuple(entries), direction=direction)
            score = rng.choice(entries) if rng.random() < 0.3 else rng.uniform(-10, 110)

            if direction == "higher":
                worse = sum(1 for e in entries if e < score)
                better = sum(1 for e in entries if e > score)
            else:
                worse = sum(1 for e in entries if e > score)
                better = sum(1 for e in entries if e < score)
            ordered = sorted(entries)
            median = (
                ordered[n // 2]
                if n % 2
                else (ordered[n // 2 - 1] + ordered[n // 2]) / 2.0
            )
            beats_median = score > median if direction == "higher" else score < median

            assert win_rate(score, board) == worse / n
            assert above_median(score, board) == beats_median
            rank = 1 + better
            assert virtual_rank(score, board) == rank
            gold, silver, bronze = oracle_cutoffs(n)
            expected = (
                "gold"
                if rank <= gold
                else "silver"
                if rank <= silver
                else "bronze"
                if rank <= bronze
                else "none"
            )
            assert assign_medal(score, board) == expected, (trial, n, rank)

        assert win_rate(None, board) == 0.0
        assert above_median(None, board) is False
        assert assign_medal(None, board) == NONE

        rows = [
            OutcomeRow(f"c{i}", True, 1.0, 0.9, True, ("gold", "silver", "bronze")[i % 3])
            for i in range(27)
        ] + [OutcomeRow(f"c{i}", True, 1.0, 0.1, False, NONE) for i in range(27, 75)]
        text = format_aggregate(aggregate(rows))
        assert "any medal           36.00%" in text


# --- 7: idea memory union law ----------------------------------------------------


def test_idea_memory_obeys_union_law():
    with criterion("idea memory union law (10^4 random merge steps)"):
        rng = random.Random(41)
        vocab = [f"{verb} the {noun}" for verb in ("tune", "scale", "stack", "prune", "fold")
                 for noun in ("trees", "features", "folds", "rates", "targets", "encoders")]

        def scrambled(text: str) -> str:
            out = "".join(c.upper() if rng.random() < 0.5 else c for c in text)
            return ("  " if rng.random() < 0.3 else "") + out.replace(" ", "  ", rng.randint(0, 2))

        pool = IdeaPool()
        for case in range(10_000):
            if case % 250 == 0:
                pool = IdeaPool()
            batch = [Idea(scrambled(rng.choice(vocab))) for _ in range(rng.randint(0, 8))]
            before = {normalize_idea(t) for t in pool.texts()}
            merged = merge_memory(pool, batch)
            after = {normalize_idea(t) for t in merged.texts()}

            assert before <= after  # memory never loses an idea
            fresh = {idea.normalized for idea in batch} - before
            assert len(merged) == len(pool) + len(fresh)
            assert merged.texts()[: len(pool)] == pool.texts()  # stable prefix
            pool = merged


# --- 8: budget enforcement --------------------------------------------------------


def endless_ask(code_cell: str):
    def ask(template: str, context: dict) -> str:
        ask.cell_calls += template in ("coder_first_cell", "coder_revision")
        return code_cell

    ask.cell_calls = 0
    return ask


def test_budget_stops(tmp_path):
    with criterion("budget stops (cell_wall kill <=2.5s, session_wall, max_steps cap)"):
        # cell_wall: a sleeping cell is interrupted within half a second of the limit
        budget = Budget(run_wall=1000.0, session_wall=100.0, cell_wall=2.0)
        session = open_session(str(tmp_path / "walls"), budget=budget)
        try:
            t0 = time.monotonic()
            outcome = execute_cell(session, "import time\ntime.sleep(60)")
            elapsed = time.monotonic() - t0
            assert outcome.status == STATUS_TIMEOUT
            assert elapsed <= 2.5, f"kill took {elapsed:.2f}s"
            follow_up = execute_cell(session, "print('alive')")
            assert follow_up.ok and "alive" in follow_up.output
        finally:
            close_session(session)

        # session_wall: once spent, no further cell starts
        bundle = load_bundle(make_toy_bundle(tmp_path / "bundle", with_community=False))
        split_dataset(bundle, seed=0)
        tight = Budget(run_wall=1000.0, session_wall=1.0, cell_wall=1.0)
        session = open_session(
            str(tmp_path / "session_wall"),
            input_mounts={"data": str(bundle.public_dir)},
            budget=tight,
        )
        try:
            ask = endless_ask(cell("nap", "import time\ntime.sleep(1.2)"))
            draft = SolutionDraft(draft_id="t0-d0", body="baseline nap", is_baseline=True)
            result = run_coding_agent(
                ask, session, bundle, draft, iteration=0, max_steps=30, deterministic=True
            )
            assert result.record.steps == 1  # the second cell never started
            assert any(SESSION_EXHAUSTED in n for n in result.record.notes)
            assert enforce_budgets(session, tight) == SESSION_EXHAUSTED
        finally:
            close_session(session)

        # max_steps: exactly 30 cells run, the 31st is never requested
        session = open_session(
            str(tmp_path / "steps"),
            input_mounts={"data": str(bundle.public_dir)},
            budget=Budget(max_steps=30),
        )
        try:
            ask = endless_ask(cell("spin", "pass"))
            draft = SolutionDraft(draft_id="t0-d1", body="spin forever", is_baseline=True)
            result = run_coding_agent(
                ask, session, bundle, draft, iteration=0, max_steps=30, deterministic=True
            )
            assert result.record.steps == 30
            assert ask.cell_calls == 30  # a 31st cell prompt was never issued
        finally:
            close_session(session)
        transcript = (tmp_path / "steps" / "transcript.jsonl").read_text(encoding="utf-8")
        executed = [json.loads(line) for line in transcript.splitlines()]
        assert sum(1 for e in executed if e["event"] == "cell") == 30


# --- 9: monitor kill path ---------------------------------------------------------


def test_monitor_stop_kills_in_flight_cell(tmp_path):
    with criterion("monitor STOP (busy loop killed within poll_interval + 2s)"):
        session = open_session(str(tmp_path / "watched"))
        try:
            poll_interval = 0.5
            t0 = time.monotonic()
            outcome = execute_cell(
                session,
                "while True:\n    pass",
                goal="spin until stopped",
                monitor=lambda goal, output: "STOP",
                poll_interval=poll_interval,
            )
            elapsed = time.monotonic() - t0
            assert outcome.status == STATUS_MONITOR
            assert elapsed <= poll_interval + 2.0, f"stop took {elapsed:.2f}s"
        finally:
            close_session(session)


# --- 10: dependency graph ----------------------------------------------------------


def brute_reachable(edges: set, start: ArtifactId) -> frozenset:
    out: dict = {}
    for consumer, dependency in edges:
        out.setdefault(consumer, []).append(dependency)
    seen, stack = set(), [start]
    while stack:
        vertex = stack.pop()
        if vertex not in seen:
            seen.add(vertex)
            stack.extend(out.get(vertex, ()))
    return frozenset(seen)


def test_dependency_closure_and_acyclicity():
    with criterion("dependency closure vs brute force (500 DAGs), cycles rejected"):
        rng = random.Random(53)
        for trial in range(500):
            n = rng.randint(1, 50)
            kernels = tuple(Kernel(f"v{i}", "none", 0, float(i), "x") for i in range(n))
            ids = [k.id for k in kernels]
            edges = {
                (ids[i], ids[j])
                for i in range(n)
                for j in range(i)  # consumers come later: edges only point back
                if rng.random() < 0.15
            }
            snapshot = CommunitySnapshot(
                iteration=0,
                kernels=kernels,
                datasets=(),
                discussions=(),
                graph=DependencyGraph(vertices=frozenset(ids), edges=frozenset(edges)),
            )
            for start in rng.sample(ids, k=min(5, n)):
                assert dependency_closure(snapshot, start) == brute_reachable(edges, start)

        a, b = ArtifactId("kernel", "a"), ArtifactId("kernel", "b")
        two_cycle = DependencyGraph(
            vertices=frozenset({a, b}), edges=frozenset({(a, b), (b, a)})
        )
        with pytest.raises(GraphError, match="cycle"):
            two_cycle.validate({a: 1.0, b: 1.0})
        self_loop = DependencyGraph(vertices=frozenset({a}), edges=frozenset({(a, a)}))
        with pytest.raises(GraphError, match="cycle"):
            self_loop.validate({a: 1.0})

        base = Kernel("a", "none", 0, 1.0, "x")
        snapshot = CommunitySnapshot(
            iteration=0,
            kernels=(base,),
            datasets=(),
            discussions=(),
            graph=DependencyGraph(vertices=frozenset({base.id}), edges=frozenset()),
        )
        with pytest.raises(CommunityError):  # a self-referential publish cannot sneak in
            publish(snapshot, Kernel("c", "none", 0, 2.0, "x"), deps=(ArtifactId("kernel", "c"),))
        with pytest.raises(CommunityError):  # nor a duplicate id
            publish(snapshot, Kernel("a", "none", 0, 2.0, "y"))
