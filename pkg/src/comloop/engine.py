"""Top-level run driver: bundle in, graded submission and full transcript out."""

from __future__ import annotations

import shutil
import time
from pathlib import Path
from typing import Optional

from .agents.coordinator import Orchestrator
from .bundle.grading import TEST, grade
from .bundle.loader import CompetitionBundle, load_bundle
from .bundle.splitting import split_dataset
from .community import CommunityStore, load_corpus
from .config import RunConfig, make_backend
from .errors import MetricsError
from .gateway.backends import Gateway
from .leaderboard import (
    above_median,
    assign_medal,
    virtual_rank,
    win_rate,
)
from .runs import RunRecord, select_best_run
from .transcript import (
    append_jsonl,
    iteration_as_dict,
    record_as_dict,
    write_json,
)


def prepare_bundle(config: RunConfig, force: bool = False) -> CompetitionBundle:
    """Load the bundle and materialize its public/private split if needed."""
    bundle = load_bundle(Path(config.bundle_path))
    if force or not bundle.prepared:
        split_dataset(
            bundle,
            seed=config.derive_seed("split"),
            ratio=config.train_ratio,
        )
    return bundle


def run_engine(config: RunConfig, run_dir: Path, guest_cmd: Optional[tuple] = None) -> dict:
    """Execute a full engine run and return the result summary.

    The run directory collects everything needed to audit or replay the run:
    per-lane completion logs, per-session sandbox transcripts, the community
    event log, iteration summaries, and the final submission.
    """
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    started = time.monotonic()

    bundle = prepare_bundle(config)
    corpus = load_corpus(bundle.community_dir)
    store = CommunityStore.initialize(
        corpus,
        bundle.spec.deadline,
        k_kernel=config.k_kernel,
        k_discussion=config.k_discussion,
        dataset_access=config.dataset_access,
        direction=bundle.metric.direction,
        log_dir=run_dir / "community_log",
    )
    gateway = Gateway(make_backend(config), log_dir=str(run_dir / "llm_logs"))
    orchestrator = Orchestrator(
        bundle=bundle,
        store=store,
        gateway=gateway,
        config=config,
        run_dir=run_dir,
        guest_cmd=guest_cmd,
    )

    write_json(run_dir / "config.json", config.as_dict())
    iterations = []
    for _ in range(config.max_iterations):
        result = orchestrator.run_iteration()
        payload = iteration_as_dict(result)
        iterations.append(payload)
        append_jsonl(run_dir / "iterations.jsonl", payload)

    summary = _finalize(config, bundle, orchestrator, iterations, run_dir, started)
    write_json(run_dir / "result.json", summary)
    return summary


def _finalize(
    config: RunConfig,
    bundle: CompetitionBundle,
    orchestrator: Orchestrator,
    iterations: list,
    run_dir: Path,
    started: float,
) -> dict:
    best: Optional[RunRecord] = None
    try:
        best = select_best_run(orchestrator.all_records, bundle.metric.direction)
    except MetricsError:
        pass

    test_report = None
    standing = None
    if best is not None and best.submission_file:
        source = (
            run_dir
            / "sessions"
            / best.draft_id.replace("-", "_")
            / "working"
            / best.submission_file
        )
        if source.exists():
            final_submission = run_dir / "submission.csv"
            shutil.copyfile(source, final_submission)
            graded = grade(bundle, final_submission, target=TEST)
            test_report = {
                "score": graded.score,
                "success": graded.success,
                "message": graded.message,
            }
            if graded.success:
                board = bundle.board
                standing = {
                    "win_rate": win_rate(graded.score, board),
                    "above_median": above_median(graded.score, board),
                    "virtual_rank": virtual_rank(graded.score, board),
                    "medal": assign_medal(graded.score, board),
                }

    return {
        "competition": bundle.spec.slug,
        "metric": bundle.spec.metric_name,
        "backend": config.backend,
        "iterations": iterations,
        "best_run": record_as_dict(best) if best else None,
        "test_report": test_report,
        "standing": standing,
        "published_total": sum(len(i["published"]) for i in iterations),
        "usage": orchestrator.gateway.ledger.as_dict(),
        "elapsed_seconds": 0.0
        if config.is_deterministic
        else round(time.monotonic() - started, 3),
    }
