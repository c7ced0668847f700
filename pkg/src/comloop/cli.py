"""Command-line interface: prepare, run, grade, report, and replay.

Every command prints a short human summary on stdout and leaves a JSON
artifact behind (or at --json-out) so scripts never have to parse prose.

Exit codes: 0 success, 1 graded-but-rejected submission, 2 configuration
or flag errors, 3 broken bundles, 4 infrastructure failures and replay
divergence.
"""

from __future__ import annotations

import argparse
import filecmp
import json
import shlex
import sys
from pathlib import Path
from typing import Optional

from .bundle.grading import TEST, VALIDATION, grade
from .bundle.loader import load_bundle
from .bundle.splitting import split_dataset
from .config import RunConfig
from .engine import run_engine
from .errors import BundleError, ComloopError, ConfigError, MetricsError
from .leaderboard import NONE, OutcomeRow, aggregate, format_aggregate
from .transcript import dump_json, write_json

EXIT_OK = 0
EXIT_REJECTED = 1
EXIT_CONFIG = 2
EXIT_BUNDLE = 3
EXIT_INFRA = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="comloop",
        description="Run sandboxed, community-seeded engineering loops "
        "against offline competition bundles.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    prepare = sub.add_parser("prepare", help="materialize a bundle's public/private split")
    prepare.add_argument("--bundle", required=True, help="bundle directory")
    prepare.add_argument("--seed", type=int, default=0)
    prepare.add_argument("--train-ratio", type=float, default=0.9)
    prepare.add_argument("--force", action="store_true", help="re-split even if prepared")
    prepare.add_argument("--json-out", help="also write the split manifest here")

    run = sub.add_parser("run", help="execute a full engine run from a config file")
    run.add_argument("--config", required=True, help="run configuration JSON")
    run.add_argument("--run-dir", required=True, help="directory to collect run artifacts")
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--max-iterations", type=int, default=None)
    run.add_argument("--n-parallel", type=int, default=None)
    run.add_argument("--backend", default=None, choices=("scripted", "live", "replay"))
    run.add_argument("--script-path", default=None)
    run.add_argument("--replay-dir", default=None)
    run.add_argument("--guest-cmd", default=None, help="alternate guest command line")
    run.add_argument("--json-out", help="also write the result summary here")

    grade_cmd = sub.add_parser("grade", help="score one submission file against a bundle")
    grade_cmd.add_argument("--bundle", required=True)
    grade_cmd.add_argument("--submission", required=True)
    grade_cmd.add_argument("--target", default=VALIDATION, choices=(VALIDATION, TEST))
    grade_cmd.add_argument("--json-out", help="also write the eval report here")

    report = sub.add_parser("report", help="aggregate result.json files into one table")
    report.add_argument("results", nargs="+", help="result.json files from finished runs")
    report.add_argument("--json-out", help="also write the aggregate summary here")

    replay = sub.add_parser("replay", help="re-run from recorded completions and compare")
    replay.add_argument("--run-dir", required=True, help="finished run to replay")
    replay.add_argument("--out", required=True, help="directory for the replayed run")

    return parser


def _emit(payload: dict, json_out: Optional[str]) -> None:
    if json_out:
        write_json(Path(json_out), payload)


def cmd_prepare(args: argparse.Namespace) -> int:
    if not 0.0 < args.train_ratio < 1.0:
        raise ConfigError("--train-ratio must be strictly between 0 and 1")
    bundle = load_bundle(Path(args.bundle))
    if bundle.prepared and not args.force:
        print(f"{bundle.spec.slug}: already prepared (use --force to re-split)")
        manifest = json.loads(
            (bundle.private_dir / "split_manifest.json").read_text(encoding="utf-8")
        )
    else:
        result = split_dataset(bundle, seed=args.seed, ratio=args.train_ratio)
        manifest = result.as_dict()
        print(
            f"{bundle.spec.slug}: split {len(result.train_ids)} train / "
            f"{len(result.validation_ids)} validation rows (seed {args.seed})"
        )
        for warning in result.warnings:
            print(f"  warning: {warning}")
    print(f"manifest: {bundle.private_dir / 'split_manifest.json'}")
    _emit(manifest, args.json_out)
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    config = RunConfig.from_file(
        args.config,
        seed=args.seed,
        max_iterations=args.max_iterations,
        n_parallel=args.n_parallel,
        backend=args.backend,
        script_path=args.script_path,
        replay_dir=args.replay_dir,
    )
    guest_cmd = tuple(shlex.split(args.guest_cmd)) if args.guest_cmd else None
    run_dir = Path(args.run_dir)
    if (run_dir / "result.json").exists():
        raise ConfigError(f"{run_dir} already holds a finished run")

    summary = run_engine(config, run_dir, guest_cmd=guest_cmd)
    best = summary["best_run"]
    if best is None:
        print(f"{summary['competition']}: no run produced a graded submission")
    else:
        print(
            f"{summary['competition']}: best run {best['run_id']} "
            f"validation {best['validation_score']:.6f}"
        )
    if summary["test_report"] and summary["test_report"]["success"]:
        standing = summary["standing"]
        print(
            f"test {summary['metric']} {summary['test_report']['score']:.6f} "
            f"(rank {standing['virtual_rank']}, medal {standing['medal']})"
        )
    print(f"published {summary['published_total']} kernels over "
          f"{len(summary['iterations'])} iterations")
    print(f"result: {run_dir / 'result.json'}")
    _emit(summary, args.json_out)
    return EXIT_OK


def cmd_grade(args: argparse.Namespace) -> int:
    bundle = load_bundle(Path(args.bundle))
    if args.target == VALIDATION and not bundle.prepared:
        raise BundleError("bundle is not prepared; run `comloop prepare` first")
    report = grade(bundle, Path(args.submission), target=args.target)
    payload = {"score": report.score, "success": report.success, "message": report.message}
    if report.success:
        print(f"{args.target} {bundle.spec.metric_name}: {report.score:.6f}")
    else:
        print(f"submission rejected: {report.message}")
    print(f"report: {bundle.private_dir / 'eval_report.json'}")
    _emit(payload, args.json_out)
    return EXIT_OK if report.success else EXIT_REJECTED


def _outcome_row(path: Path) -> OutcomeRow:
    try:
        summary = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read result file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"result file {path} is not valid JSON: {exc}") from exc
    test_report = summary.get("test_report") or {}
    standing = summary.get("standing") or {}
    valid = bool(test_report.get("success"))
    return OutcomeRow(
        competition=summary["competition"],
        valid_submission=valid,
        score=test_report.get("score"),
        win_rate=float(standing.get("win_rate", 0.0)),
        above_median=bool(standing.get("above_median", False)),
        medal=standing.get("medal", NONE),
    )


def cmd_report(args: argparse.Namespace) -> int:
    rows = [_outcome_row(Path(p)) for p in args.results]
    summary = aggregate(rows)
    for row in rows:
        score = "-" if row.score is None else f"{row.score:.6f}"
        print(f"{row.competition:<30} score {score:>12}  medal {row.medal}")
    print()
    print(format_aggregate(summary))
    _emit(summary.as_dict(), args.json_out)
    return EXIT_OK


def cmd_replay(args: argparse.Namespace) -> int:
    run_dir = Path(args.run_dir)
    config_path = run_dir / "config.json"
    if not config_path.exists():
        raise ConfigError(f"{run_dir} holds no config.json; was the run finished?")
    raw = json.loads(config_path.read_text(encoding="utf-8"))
    raw.update(
        {
            "backend": "replay",
            "replay_dir": str(run_dir / "llm_logs"),
            "api_key": None,  # recorded runs never need credentials again
        }
    )
    config = RunConfig(**raw)
    out_dir = Path(args.out)
    if (out_dir / "result.json").exists():
        raise ConfigError(f"{out_dir} already holds a finished run")

    summary = run_engine(config, out_dir)
    checks = {}
    original = json.loads((run_dir / "result.json").read_text(encoding="utf-8"))
    for stale in ("backend",):  # the only field that legitimately differs
        original.pop(stale, None)
    replayed = dict(summary)
    replayed.pop("backend", None)
    checks["result_json"] = dump_json(original) == dump_json(replayed)

    source_sub = run_dir / "submission.csv"
    replay_sub = out_dir / "submission.csv"
    if source_sub.exists() or replay_sub.exists():
        checks["submission_csv"] = (
            source_sub.exists()
            and replay_sub.exists()
            and filecmp.cmp(source_sub, replay_sub, shallow=False)
        )

    identical = all(checks.values())
    verdict = {
        "verdict": "identical" if identical else "diverged",
        "source_run": str(run_dir),
        "checks": checks,
    }
    write_json(out_dir / "replay.json", verdict)
    print(f"replay of {run_dir}: {verdict['verdict']}")
    for name, ok in sorted(checks.items()):
        print(f"  {name}: {'matches' if ok else 'DIFFERS'}")
    print(f"verdict: {out_dir / 'replay.json'}")
    return EXIT_OK if identical else EXIT_INFRA


COMMANDS = {
    "prepare": cmd_prepare,
    "run": cmd_run,
    "grade": cmd_grade,
    "report": cmd_report,
    "replay": cmd_replay,
}


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BundleError, MetricsError) as exc:
        print(f"bundle error: {exc}", file=sys.stderr)
        return EXIT_BUNDLE
    except ComloopError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_INFRA


if __name__ == "__main__":
    sys.exit(main())
