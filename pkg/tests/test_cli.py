"""End-to-end CLI behavior: flags, exit codes, artifacts, and replay."""

import json
from pathlib import Path

import pytest

from comloop.cli import main
from comloop.fixtures import make_toy_bundle, make_toy_script
from comloop.gateway.backends import LiveBackend


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    bundle = make_toy_bundle(root / "bundle")
    script = make_toy_script(root / "script.json")
    config = {
        "bundle_path": str(bundle),
        "backend": "scripted",
        "script_path": str(script),
        "seed": 7,
        "max_iterations": 2,
        "n_parallel": 2,
        "n_drafts": 2,
        "n_kernel_samples": 2,
        "n_discussion_samples": 1,
    }
    config_path = root / "config.json"
    config_path.write_text(json.dumps(config, indent=2), encoding="utf-8")
    return root, bundle, config_path


@pytest.fixture(scope="module")
def finished_run(workspace):
    root, bundle, config_path = workspace
    run_dir = root / "run-a"
    code = main(["run", "--config", str(config_path), "--run-dir", str(run_dir)])
    assert code == 0
    return run_dir


class TestPrepare:
    def test_prepare_splits_and_reports(self, workspace, capsys):
        root, bundle, _ = workspace
        json_out = root / "manifest-copy.json"
        code = main(
            ["prepare", "--bundle", str(bundle), "--seed", "5", "--json-out", str(json_out)]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "split 90 train / 10 validation rows" in out
        assert "split_manifest.json" in out
        manifest = json.loads(json_out.read_text())
        assert manifest["seed"] == 5
        assert (bundle / "private" / "validate.csv").exists()

    def test_prepare_is_idempotent_without_force(self, workspace, capsys):
        root, bundle, _ = workspace
        before = (bundle / "private" / "validate.csv").read_bytes()
        code = main(["prepare", "--bundle", str(bundle), "--seed", "99"])
        assert code == 0
        assert "already prepared" in capsys.readouterr().out
        assert (bundle / "private" / "validate.csv").read_bytes() == before

    def test_same_seed_means_same_split(self, tmp_path, capsys):
        digests = []
        for name in ("one", "two"):
            bundle = make_toy_bundle(tmp_path / name)
            assert main(["prepare", "--bundle", str(bundle), "--seed", "21"]) == 0
            digests.append((bundle / "private" / "validate.csv").read_bytes())
        assert digests[0] == digests[1]

    def test_bad_ratio_is_a_config_error(self, workspace, capsys):
        root, bundle, _ = workspace
        code = main(["prepare", "--bundle", str(bundle), "--train-ratio", "1.5"])
        assert code == 2
        assert "configuration error" in capsys.readouterr().err

    def test_missing_bundle_is_a_bundle_error(self, tmp_path, capsys):
        code = main(["prepare", "--bundle", str(tmp_path / "nowhere")])
        assert code == 3
        assert "bundle error" in capsys.readouterr().err


class TestRun:
    def test_run_produces_artifacts(self, workspace, finished_run, capsys):
        run_dir = finished_run
        for name in ("result.json", "submission.csv", "config.json", "iterations.jsonl"):
            assert (run_dir / name).exists(), name
        summary = json.loads((run_dir / "result.json").read_text())
        assert summary["best_run"]["run_id"] == "run-t0-d1"
        assert summary["published_total"] == 4
        assert summary["standing"]["medal"] == "gold"
        assert summary["usage"]["total_tokens"] > 0
        assert summary["elapsed_seconds"] == 0.0
        # secrets never land on disk
        stored = json.loads((run_dir / "config.json").read_text())
        assert stored["api_key"] is None

    def test_run_refuses_to_overwrite(self, workspace, finished_run, capsys):
        root, bundle, config_path = workspace
        code = main(["run", "--config", str(config_path), "--run-dir", str(finished_run)])
        assert code == 2
        assert "already holds a finished run" in capsys.readouterr().err

    def test_invalid_config_fails_before_side_effects(self, workspace, tmp_path, capsys):
        root, bundle, config_path = workspace
        run_dir = tmp_path / "never-created"
        code = main(
            ["run", "--config", str(config_path), "--run-dir", str(run_dir), "--backend", "live"]
        )
        assert code == 2
        assert "needs endpoint and model" in capsys.readouterr().err
        assert not run_dir.exists()

    def test_json_out_duplicates_the_result(self, workspace, tmp_path, capsys):
        root, bundle, config_path = workspace
        run_dir = tmp_path / "run-json"
        json_out = tmp_path / "summary.json"
        code = main(
            [
                "run",
                "--config",
                str(config_path),
                "--run-dir",
                str(run_dir),
                "--json-out",
                str(json_out),
            ]
        )
        assert code == 0
        assert json_out.read_bytes() == (run_dir / "result.json").read_bytes()
        out = capsys.readouterr().out
        assert "best run run-t0-d1" in out
        assert "medal gold" in out


class TestGrade:
    def test_grade_final_submission_on_test_split(self, workspace, finished_run, capsys):
        root, bundle, _ = workspace
        json_out = root / "grade.json"
        code = main(
            [
                "grade",
                "--bundle",
                str(bundle),
                "--submission",
                str(finished_run / "submission.csv"),
                "--target",
                "test",
                "--json-out",
                str(json_out),
            ]
        )
        assert code == 0
        payload = json.loads(json_out.read_text())
        summary = json.loads((finished_run / "result.json").read_text())
        assert payload["success"]
        assert payload["score"] == pytest.approx(summary["test_report"]["score"])
        assert "test rmse:" in capsys.readouterr().out

    def test_rejected_submission_exits_one(self, workspace, tmp_path, capsys):
        root, bundle, _ = workspace
        bad = tmp_path / "bad.csv"
        bad.write_text("id,y\n", encoding="utf-8")
        code = main(["grade", "--bundle", str(bundle), "--submission", str(bad)])
        assert code == 1
        assert "submission rejected" in capsys.readouterr().out


class TestReport:
    def test_aggregates_result_files(self, workspace, finished_run, tmp_path, capsys):
        json_out = tmp_path / "aggregate.json"
        code = main(
            [
                "report",
                str(finished_run / "result.json"),
                str(finished_run / "result.json"),
                "--json-out",
                str(json_out),
            ]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "toy-regression" in out
        assert "any medal           100.00%" in out
        assert "mean win rate       100.00%" in out
        payload = json.loads(json_out.read_text())
        assert payload["competitions"] == 2
        assert payload["valid_submission_rate"] == 1.0

    def test_missing_result_file_is_a_config_error(self, tmp_path, capsys):
        missing = tmp_path / "absent.json"
        code = main(["report", str(missing)])
        assert code == 2
        assert "cannot read result file" in capsys.readouterr().err


class TestReplay:
    def test_replay_reproduces_the_run_offline(self, workspace, finished_run, tmp_path, capsys):
        before = LiveBackend.network_calls
        out_dir = tmp_path / "replayed"
        code = main(["replay", "--run-dir", str(finished_run), "--out", str(out_dir)])
        assert code == 0
        assert LiveBackend.network_calls == before  # nothing talked to a network
        verdict = json.loads((out_dir / "replay.json").read_text())
        assert verdict["verdict"] == "identical"
        assert verdict["checks"] == {"result_json": True, "submission_csv": True}
        assert (out_dir / "submission.csv").read_bytes() == (
            finished_run / "submission.csv"
        ).read_bytes()
        assert "identical" in capsys.readouterr().out

    def test_edited_transcript_is_caught(self, workspace, finished_run, tmp_path, capsys):
        import shutil

        tampered = tmp_path / "tampered"
        shutil.copytree(finished_run, tampered)
        log = tampered / "llm_logs" / "coordinator.jsonl"
        lines = log.read_text().splitlines()
        record = json.loads(lines[0])
        record["response"] = record["response"] + "\n# edited after the fact"
        lines[0] = json.dumps(record, sort_keys=True)
        log.write_text("\n".join(lines) + "\n", encoding="utf-8")

        code = main(["replay", "--run-dir", str(tampered), "--out", str(tmp_path / "out")])
        assert code == 4
        assert "was edited" in capsys.readouterr().err

    def test_unfinished_run_dir_is_a_config_error(self, tmp_path, capsys):
        code = main(["replay", "--run-dir", str(tmp_path), "--out", str(tmp_path / "o")])
        assert code == 2
        assert "no config.json" in capsys.readouterr().err
