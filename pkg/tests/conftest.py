"""Shared test fixtures: scripted backends and run builders.

The scripted pipeline run is the hand-walked oracle for end-to-end tests:
every backend response is listed here in the exact order the stages consume
them, so ledger lengths and persisted artifacts are predictable by
inspection.
"""

from __future__ import annotations

import copy
from pathlib import Path

import pytest

from dreamforge.backends import Backends
from dreamforge.backends.mocks import (
    MockChatBackend,
    MockEmbedBackend,
    MockImageGenBackend,
    MockVideoGenBackend,
    MockVisionBackend,
)
from dreamforge.pipeline import RunConfig, run_pipeline
from dreamforge.roles import RoleCard

TIMESTAMP_KEYS = {"created_at", "updated_at", "produced_at", "generated_at", "ts"}


def make_card(
    name: str = "Tester",
    phases=("test_phase",),
    job: str = "do the thing",
    task: str = "answer questions",
    requirements=("be brief",),
    round_limit: int = 5,
) -> RoleCard:
    return RoleCard(
        name=name,
        phases=frozenset(phases),
        job=job,
        task=task,
        requirements=tuple(requirements),
        round_limit=round_limit,
    )


def scene_lines(count: int) -> str:
    return "\n".join(
        f"Scene {i}: beat {i} of the lantern maker's day, same cast and setting"
        for i in range(1, count + 1)
    )


def scripted_backends(
    scene_count: int,
    seed: int = 0,
    reject_base_attempts: int = 0,
) -> Backends:
    """Backends whose scripts drive a full run with the given scene count.

    Chat consumption order: one assistant reply per conversational stage
    (each terminates on round 1), then painter + director per generation
    attempt. Vision: per base-frame attempt a review verdict, then the base
    description, then one context per accepted frame, with a review verdict
    before each later frame's context.
    """
    chat: list[str] = [
        "<INFO> Produce a short multi-scene film about the lantern maker.",
        "<INFO> cartoon style with a warm palette",
        "<INFO> Story outline: routine, obstacle, warm ending.",
        "<INFO>\n" + scene_lines(scene_count),
    ]
    vision: list[str] = []
    for attempt in range(reject_base_attempts):
        chat += [f"painter prompt for frame 1 (attempt {attempt + 1})",
                 f"director note for frame 1 (attempt {attempt + 1})"]
        vision.append(f"REJECT: attempt {attempt + 1} broke the palette")
    chat += [f"painter prompt for frame 1 (attempt {reject_base_attempts + 1})",
             f"director note for frame 1 (attempt {reject_base_attempts + 1})"]
    vision += ["APPROVE", "BASE-LOOK: warm cartoon palette, one elderly maker", "CONTEXT-1: maker at the bench"]
    for t in range(2, scene_count + 1):
        chat += [f"painter prompt for frame {t}", f"director note for frame {t}"]
        vision += ["APPROVE", f"CONTEXT-{t}: continuing from frame {t - 1}"]
    return Backends(
        chat=MockChatBackend(chat),
        vision=MockVisionBackend(vision),
        image_gen=MockImageGenBackend(seed=seed),
        video_gen=MockVideoGenBackend(seed=seed),
        embed=MockEmbedBackend(seed=seed),
    )


def scripted_config(tmp_path: Path, scene_count: int, seed: int = 0, task: str | None = None) -> RunConfig:
    return RunConfig(
        task=task or "an elderly person making a traditional lantern",
        mode="short",
        seed=seed,
        out_dir=tmp_path,
        scene_target=scene_count,
        scene_bounds=(1, max(scene_count, 1)),
        clip_workers=1,
    )


def completed_run(tmp_path: Path, scene_count: int = 4, seed: int = 0):
    """Run the scripted pipeline and return (state, run_dir, backends)."""
    config = scripted_config(tmp_path, scene_count, seed=seed)
    backends = scripted_backends(scene_count, seed=seed)
    state = run_pipeline(config, backends=backends)
    return state, config.out_dir / state.run_id, backends


def strip_timestamps(payload):
    """Recursively null out timestamp fields so runs can be diffed."""
    if isinstance(payload, dict):
        return {
            key: ("<ts>" if key in TIMESTAMP_KEYS else strip_timestamps(value))
            for key, value in payload.items()
        }
    if isinstance(payload, list):
        return [strip_timestamps(item) for item in payload]
    return payload


@pytest.fixture
def four_scene_run(tmp_path):
    state, run_dir, backends = completed_run(tmp_path / "runs", scene_count=4, seed=11)
    return state, run_dir, backends


@pytest.fixture(scope="session")
def embed_service_url():
    """A live embed service: env-configured URL, or in-process, or skip."""
    import os
    import threading
    import time

    configured = os.environ.get("DREAMFORGE_EMBED_SERVICE_URL")
    if configured:
        yield configured.rstrip("/")
        return
    uvicorn = pytest.importorskip("uvicorn")
    embed_service = pytest.importorskip("embed_service")

    config = uvicorn.Config(
        embed_service.create_app(), host="127.0.0.1", port=0, log_level="error"
    )
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.monotonic() + 30.0
    while not server.started:
        if time.monotonic() > deadline:
            raise RuntimeError("embed service did not start in time")
        time.sleep(0.05)
    port = server.servers[0].sockets[0].getsockname()[1]
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=10)


def copy_backends(backends: Backends) -> Backends:
    """Fresh backends with identical scripts (ledgers reset)."""
    return Backends(
        chat=MockChatBackend(copy.deepcopy(backends.chat.script)),
        vision=MockVisionBackend(copy.deepcopy(backends.vision.script)),
        image_gen=MockImageGenBackend(seed=backends.image_gen.seed),
        video_gen=MockVideoGenBackend(seed=backends.video_gen.seed),
        embed=MockEmbedBackend(seed=backends.embed.seed),
    )
