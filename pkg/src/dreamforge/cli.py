"""Command-line entry point: run, resume, evaluate, stats, check-profile.

Exit codes: 0 success, 1 user error (bad flags, missing paths, bad profile),
2 backend or runtime failure. Every command is re-runnable: a second
invocation on unchanged inputs neither corrupts state nor duplicates
entries. Human output goes to stdout; ``--json`` switches to a machine
payload. Index files are written temp-then-rename, never partially.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path
from typing import Optional

import click

from . import __version__
from .backends.profile import (
    build_backends,
    default_mock_profile,
    load_profile,
    validate_profile,
)
from .errors import DreamForgeError, PipelineError, ProfileError
from .metrics import evaluate_run
from .pipeline import RunConfig, resume_run, run_pipeline
from .storage import read_json


@click.group()
@click.version_option(version=__version__, prog_name="dreamforge")
def cli() -> None:
    """Multi-agent studio pipeline for multi-scene video production."""


def _profile_from(path: Optional[str]) -> dict:
    return load_profile(path) if path else default_mock_profile()


@cli.command("run")
@click.option("--task", required=True, help="The story or task to produce.")
@click.option("--mode", type=click.Choice(["short", "long"]), default="short", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option(
    "--backend-profile",
    "profile_path",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="Backend profile JSON; defaults to the all-mock profile.",
)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default="runs", show_default=True)
@click.option("--json", "as_json", is_flag=True, help="Emit a machine-readable summary.")
def cmd_run(task: str, mode: str, seed: int, profile_path: Optional[str], out_dir: str, as_json: bool) -> None:
    """Run the full pipeline for TASK into OUT/<run_id>/."""
    config = RunConfig(
        task=task,
        mode=mode,
        seed=seed,
        out_dir=Path(out_dir),
        backend_profile=_profile_from(profile_path),
    )
    state = run_pipeline(config)
    _report_state(state, Path(out_dir), as_json)


@cli.command("resume")
@click.argument("run_id")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default="runs", show_default=True)
@click.option("--json", "as_json", is_flag=True)
def cmd_resume(run_id: str, out_dir: str, as_json: bool) -> None:
    """Continue a failed or interrupted run; finished stages are skipped."""
    state = resume_run(run_id, Path(out_dir))
    _report_state(state, Path(out_dir), as_json)


def _report_state(state, out_dir: Path, as_json: bool) -> None:
    run_dir = out_dir / state.run_id
    if as_json:
        payload = state.to_dict()
        payload["run_dir"] = str(run_dir)
        click.echo(json.dumps(payload, indent=2, sort_keys=True))
        return
    click.echo(f"run {state.run_id}: {state.status}")
    click.echo(f"  stages: {', '.join(state.completed_phases) or '(none)'}")
    manifest_path = run_dir / "manifest.json"
    if manifest_path.is_file():
        clips = read_json(manifest_path)["clips"]
        click.echo(f"  clips: {len(clips)} (see {manifest_path})")


@cli.command("evaluate")
@click.argument("run_dir", type=click.Path(exists=True, file_okay=False))
@click.option(
    "--backend-profile",
    "profile_path",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
)
@click.option("--report", "report_path", type=click.Path(dir_okay=False), default=None)
@click.option("--json", "as_json", is_flag=True)
def cmd_evaluate(run_dir: str, profile_path: Optional[str], report_path: Optional[str], as_json: bool) -> None:
    """Score a finished run's keyframes and write report.json."""
    profile = _profile_from(profile_path)
    backends = build_backends(profile, seed=0)
    report = evaluate_run(run_dir, backends, report_path=report_path)
    if as_json:
        click.echo(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    else:
        click.echo(report.summary_text())


@cli.command("stats")
@click.argument("runs_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--json", "as_json", is_flag=True)
def cmd_stats(runs_dir: str, as_json: bool) -> None:
    """Histogram of keyframe counts across every run under RUNS_DIR."""
    histogram = keyframe_count_histogram(Path(runs_dir))
    total = sum(histogram.values())
    if as_json:
        click.echo(
            json.dumps(
                {"runs": total, "histogram": {str(k): v for k, v in sorted(histogram.items())}},
                indent=2,
                sort_keys=True,
            )
        )
        return
    click.echo(f"{total} run(s) with keyframes under {runs_dir}")
    if histogram:
        click.echo(f"  {'keyframes':>9} | {'runs':>4}")
        click.echo(f"  {'-' * 9} | {'-' * 4}")
        for count in sorted(histogram):
            click.echo(f"  {count:>9} | {histogram[count]:>4}")


def keyframe_count_histogram(runs_dir: Path) -> dict[int, int]:
    """bucket (keyframe count) -> number of runs with that count."""
    histogram: dict[int, int] = {}
    for run_dir in sorted(p for p in runs_dir.iterdir() if p.is_dir()):
        frames_dir = run_dir / "keyframes"
        index_path = frames_dir / "index.json"
        if index_path.is_file():
            count = int(read_json(index_path)["count"])
        elif frames_dir.is_dir():
            count = len(list(frames_dir.glob("frame_*.png")))
        else:
            continue
        if count > 0:
            histogram[count] = histogram.get(count, 0) + 1
    return histogram


@cli.command("check-profile")
@click.argument("profile", type=click.Path(exists=True, dir_okay=False))
@click.option("--json", "as_json", is_flag=True)
def cmd_check_profile(profile: str, as_json: bool) -> None:
    """Validate a backend profile file; warnings do not fail the check."""
    payload = read_json(Path(profile))
    problems = validate_profile(payload)
    errors = [p for p in problems if p.severity == "error"]
    if as_json:
        click.echo(
            json.dumps(
                {
                    "ok": not errors,
                    "problems": [{"severity": p.severity, "message": p.message} for p in problems],
                },
                indent=2,
                sort_keys=True,
            )
        )
    else:
        for problem in problems:
            click.echo(f"{problem.severity}: {problem.message}")
        click.echo("profile ok" if not errors else "profile has errors")
    if errors:
        raise ProfileError("; ".join(p.message for p in errors))


def main(argv: Optional[list[str]] = None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:  # --help / --version
        return int(exc.exit_code)
    except click.UsageError as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        if exc.ctx is not None:
            click.echo(exc.ctx.get_usage(), err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except ProfileError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except PipelineError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except DreamForgeError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
