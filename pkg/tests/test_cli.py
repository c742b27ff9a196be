from __future__ import annotations

import json

import pytest

from dreamforge.cli import keyframe_count_histogram, main
from dreamforge.storage import read_json

from conftest import completed_run


@pytest.fixture
def mock_profile(tmp_path):
    profile = {
        "schema_version": 1,
        "chat": {"kind": "mock"},
        "vision": {"kind": "mock"},
        "image_gen": {"kind": "mock"},
        "video_gen": {"kind": "mock"},
        "embed": {"kind": "mock"},
    }
    path = tmp_path / "mock-profile.json"
    path.write_text(json.dumps(profile), encoding="utf-8")
    return path


def test_run_command_populates_run_dir(tmp_path, mock_profile, capsys):
    out_dir = tmp_path / "runs"
    exit_code = main(
        [
            "run",
            "--task",
            "a tiny robot learns to garden",
            "--backend-profile",
            str(mock_profile),
            "--seed",
            "7",
            "--out",
            str(out_dir),
        ]
    )
    assert exit_code == 0
    printed = capsys.readouterr().out
    assert "complete" in printed
    run_dirs = [p for p in out_dir.iterdir() if p.is_dir()]
    assert len(run_dirs) == 1
    run_dir = run_dirs[0]
    for expected in ("state.json", "manifest.json", "script.json", "config.json"):
        assert (run_dir / expected).is_file()
    assert (run_dir / "memory" / "index.json").is_file()


def test_run_twice_is_idempotent(tmp_path, mock_profile):
    out_dir = tmp_path / "runs"
    args = [
        "run",
        "--task",
        "same task twice",
        "--backend-profile",
        str(mock_profile),
        "--out",
        str(out_dir),
    ]
    assert main(args) == 0
    run_dir = next(p for p in out_dir.iterdir() if p.is_dir())
    state_before = read_json(run_dir / "state.json")
    memory_before = read_json(run_dir / "memory" / "index.json")
    assert main(args) == 0
    assert read_json(run_dir / "state.json") == state_before
    assert read_json(run_dir / "memory" / "index.json") == memory_before


def test_run_json_output(tmp_path, mock_profile, capsys):
    exit_code = main(
        [
            "run",
            "--task",
            "json please",
            "--backend-profile",
            str(mock_profile),
            "--out",
            str(tmp_path / "runs"),
            "--json",
        ]
    )
    assert exit_code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["status"] == "complete"
    assert payload["completed_phases"][0] == "task_definition"


def test_resume_complete_run_is_noop(tmp_path):
    state, run_dir, _ = completed_run(tmp_path / "runs", scene_count=3)
    exit_code = main(["resume", state.run_id, "--out", str(tmp_path / "runs")])
    assert exit_code == 0


def test_resume_unknown_run_exits_2(tmp_path, capsys):
    (tmp_path / "runs").mkdir()
    exit_code = main(["resume", "rmissing", "--out", str(tmp_path / "runs")])
    assert exit_code == 2
    assert "error" in capsys.readouterr().err


def test_stats_histogram(tmp_path, capsys):
    runs_dir = tmp_path / "runs"
    completed_run(runs_dir, scene_count=3, seed=1)
    completed_run(runs_dir, scene_count=4, seed=2)
    completed_run(runs_dir, scene_count=4, seed=3)
    # oracle: manual count of the fixtures -> {3: 1, 4: 2}
    assert keyframe_count_histogram(runs_dir) == {3: 1, 4: 2}

    exit_code = main(["stats", str(runs_dir), "--json"])
    assert exit_code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload == {"runs": 3, "histogram": {"3": 1, "4": 2}}

    assert main(["stats", str(runs_dir)]) == 0
    table = capsys.readouterr().out
    assert "keyframes" in table and "| " in table


def test_evaluate_cli(tmp_path, capsys):
    state, run_dir, _ = completed_run(tmp_path / "runs", scene_count=3)
    exit_code = main(["evaluate", str(run_dir), "--json"])
    assert exit_code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["run_id"] == state.run_id
    assert (run_dir / "report.json").is_file()

    report_path = tmp_path / "custom-report.json"
    assert main(["evaluate", str(run_dir), "--report", str(report_path)]) == 0
    assert json.loads(report_path.read_text())["run_id"] == state.run_id


def test_evaluate_missing_dir_exits_1(tmp_path, capsys):
    exit_code = main(["evaluate", str(tmp_path / "nope")])
    assert exit_code == 1
    assert "error" in capsys.readouterr().err.lower()


def test_run_with_unreachable_backend_exits_2(tmp_path, capsys):
    profile = {
        "schema_version": 1,
        "chat": {"kind": "http", "base_url": "http://127.0.0.1:1"},
        "vision": {"kind": "mock"},
        "image_gen": {"kind": "mock"},
        "video_gen": {"kind": "mock"},
        "embed": {"kind": "mock"},
    }
    profile_path = tmp_path / "dead.json"
    profile_path.write_text(json.dumps(profile), encoding="utf-8")
    exit_code = main(
        [
            "run",
            "--task",
            "doomed",
            "--backend-profile",
            str(profile_path),
            "--out",
            str(tmp_path / "runs"),
        ]
    )
    assert exit_code == 2
    assert "task_definition" in capsys.readouterr().err


def test_unknown_flag_exits_1_with_usage(capsys):
    exit_code = main(["run", "--task", "x", "--frobnicate"])
    assert exit_code == 1
    err = capsys.readouterr().err
    assert "Usage" in err or "usage" in err


def test_unknown_command_exits_1(capsys):
    assert main(["transmogrify"]) == 1


def test_help_and_version_exit_0(capsys):
    assert main(["--help"]) == 0
    assert main(["--version"]) == 0
    out = capsys.readouterr().out
    assert "dreamforge" in out


def test_check_profile(tmp_path, mock_profile, capsys):
    assert main(["check-profile", str(mock_profile)]) == 0
    assert "profile ok" in capsys.readouterr().out

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"schema_version": 1, "chat": {"kind": "http"}}), encoding="utf-8")
    assert main(["check-profile", str(bad)]) == 1
    capsys.readouterr()  # drain

    warn = tmp_path / "warn.json"
    profile = json.loads(mock_profile.read_text())
    profile["chat"] = {"kind": "http", "base_url": "http://h", "api_key_env": "DF_UNSET_XYZ"}
    warn.write_text(json.dumps(profile), encoding="utf-8")
    assert main(["check-profile", str(warn), "--json"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["ok"] is True
    assert any(p["severity"] == "warning" for p in payload["problems"])
