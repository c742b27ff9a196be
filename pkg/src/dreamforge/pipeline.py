"""The production pipeline: fixed stages from task definition to clips.

Stage order is invariant — task definition, style decision, story prompting,
script design, keyframe design, clip generation — and every stage's
conclusion lands in the run's append-only memory before the next stage
starts. Runs are resumable: state, memory, transcripts, frames, and the clip
manifest all persist under ``<out>/<run_id>/``, and a failed run restarts at
its first incomplete stage. Stages are sequential (each consumes prior
summaries); only per-scene clip generation fans out, bounded by
``clip_workers``.
"""

from __future__ import annotations

import hashlib
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from filelock import FileLock

from .backends.base import Backends
from .backends.profile import build_backends, default_mock_profile
from .errors import (
    DreamForgeError,
    MalformedScriptError,
    PipelineError,
)
from .keyframes import (
    BaseDescription,
    ContextEnv,
    Keyframe,
    derive_context,
    generate_base_frame,
    iterate_keyframe,
)
from .memory import MemoryStore
from .phases import PhaseOutput, PhaseSpec, run_phase
from .roles import RoleCard, default_cards, make_agent
from .storage import atomic_write_bytes, atomic_write_json, dump_json, read_json, utc_now_iso

STAGES = (
    "task_definition",
    "style_decision",
    "story_prompting",
    "script_design",
    "keyframe_design",
    "clip_generation",
)

MEMORY_KEYS = {
    "task_definition": "task",
    "style_decision": "style",
    "story_prompting": "story",
    "script_design": "script",
    "keyframe_design": "keyframes",
    "clip_generation": "manifest",
}

# mode -> (target scene count, (lower bound, upper bound))
MODE_DEFAULTS = {
    "short": (10, (6, 14)),
    "long": (20, (12, 28)),
}

PHASE_PROMPT_TEMPLATE = (
    "We are a virtual animation studio working through the phase: {title}.\n"
    "Participants: {instructor} (instructor) and {assistant} (assistant).\n"
    "Goal: {goal}\n"
    "Form: the instructor guides, the assistant delivers; at most {max_rounds} "
    "rounds of discussion.\n"
    "When the goal is met, the assistant replies with the single word <INFO> "
    "followed by the final conclusion of this phase."
)

KEYFRAME_PHASE_PROMPT = (
    "We are a virtual animation studio working through the phase: Key-frame Design.\n"
    "Participants: the Painter drafts image prompts, the Director adds direction "
    "notes, and the Monitor reviews every rendered frame and describes approved ones.\n"
    "Goal: one approved keyframe per scene, visually continuous from first to last."
)


@dataclass(frozen=True)
class _ConversationPlan:
    title: str
    instructor: str
    assistant: str
    goal: str
    inputs: tuple[str, ...]


_CONVERSATION_STAGES = {
    "task_definition": _ConversationPlan(
        title="Task Definition",
        instructor="CEO",
        assistant="Movie Director",
        goal="a single concrete task statement for the production",
        inputs=(),
    ),
    "style_decision": _ConversationPlan(
        title="Style Decision",
        instructor="CEO",
        assistant="Movie Director",
        goal="one visual style decision that every later stage must keep",
        inputs=("task",),
    ),
    "story_prompting": _ConversationPlan(
        title="Story Prompting",
        instructor="Movie Director",
        assistant="Screenwriter",
        goal="a short story outline consistent with the task and the style",
        inputs=("task", "style"),
    ),
    "script_design": _ConversationPlan(
        title="Script Design",
        instructor="Movie Director",
        assistant="Screenwriter",
        goal=(
            "the final scene list, one line per scene in the form "
            "'Scene <n>: <description>'"
        ),
        inputs=("task", "style", "story"),
    ),
}


# ---------------------------------------------------------------------------
# Script parsing
# ---------------------------------------------------------------------------

_SCENE_LINE_RE = re.compile(r"^\s*Scene\s+(\d+)\s*:\s*(.*)$")
_SPEECH_LINE_RE = re.compile(r"^\s*(Dialogue|Narration)\s*:\s*(.*)$")


@dataclass
class SceneSpec:
    index: int
    description: str
    dialogue: Optional[str] = None

    def to_dict(self) -> dict:
        return {"index": self.index, "description": self.description, "dialogue": self.dialogue}

    @classmethod
    def from_dict(cls, payload: dict) -> "SceneSpec":
        return cls(**payload)


@dataclass
class Script:
    """Ordered scene descriptions with contiguous indices from 1."""

    scenes: list[SceneSpec] = field(default_factory=list)

    def __post_init__(self):
        for position, scene in enumerate(self.scenes, start=1):
            if scene.index != position:
                raise ValueError(f"scene indices must be contiguous from 1, got {scene.index}")
            if not scene.description:
                raise ValueError(f"scene {scene.index} has an empty description")

    def __len__(self) -> int:
        return len(self.scenes)

    def to_dict(self) -> dict:
        return {"scenes": [s.to_dict() for s in self.scenes]}

    @classmethod
    def from_dict(cls, payload: dict) -> "Script":
        return cls(scenes=[SceneSpec.from_dict(s) for s in payload["scenes"]])


def parse_script(summary: str) -> Script:
    """Parse the script phase's summary into scenes.

    Expected wire format: one ``Scene <n>: <description>`` line per scene,
    numbered contiguously from 1. Plain lines continue the current scene's
    description; ``Dialogue:`` / ``Narration:`` lines fill its dialogue slot.
    """
    scenes: list[SceneSpec] = []
    heading_lines: list[int] = []
    for line_number, raw_line in enumerate(summary.splitlines(), start=1):
        line = raw_line.rstrip()
        if not line.strip():
            continue
        scene_match = _SCENE_LINE_RE.match(line)
        if scene_match:
            index = int(scene_match.group(1))
            expected = len(scenes) + 1
            if index != expected:
                raise MalformedScriptError(
                    f"expected 'Scene {expected}:', got 'Scene {index}:'", line_number
                )
            scenes.append(SceneSpec(index=index, description=scene_match.group(2).strip()))
            heading_lines.append(line_number)
            continue
        if not scenes:
            raise MalformedScriptError(f"unrecognized line before the first scene: {line!r}", line_number)
        speech_match = _SPEECH_LINE_RE.match(line)
        if speech_match:
            spoken = speech_match.group(2).strip()
            current = scenes[-1]
            current.dialogue = f"{current.dialogue} {spoken}".strip() if current.dialogue else spoken
            continue
        current = scenes[-1]
        current.description = f"{current.description} {line.strip()}".strip()
    if not scenes:
        raise MalformedScriptError("no scene lines found", 1)
    for scene, heading_line in zip(scenes, heading_lines):
        if not scene.description:
            raise MalformedScriptError(
                f"scene {scene.index} has an empty description", heading_line
            )
    return Script(scenes=scenes)


# ---------------------------------------------------------------------------
# Run configuration and state
# ---------------------------------------------------------------------------


@dataclass
class RunConfig:
    """Everything a run needs; mock backends make it fully offline."""

    task: str
    mode: str = "short"
    seed: int = 0
    out_dir: Path = Path("runs")
    backend_profile: Optional[dict] = None
    scene_target: Optional[int] = None
    scene_bounds: Optional[tuple[int, int]] = None
    attempt_cap: int = 3
    clip_workers: int = 2
    roles_dir: Optional[Path] = None

    def __post_init__(self):
        if not self.task:
            raise ValueError("task must be nonempty")
        if self.mode not in MODE_DEFAULTS:
            raise ValueError(f"mode must be one of {sorted(MODE_DEFAULTS)}, got {self.mode!r}")
        self.out_dir = Path(self.out_dir)
        if self.scene_target is not None and self.scene_target < 1:
            raise ValueError("scene count target must be >= 1")

    def effective_scene_plan(self) -> tuple[int, tuple[int, int]]:
        target, bounds = MODE_DEFAULTS[self.mode]
        if self.scene_target is not None:
            target = self.scene_target
        if self.scene_bounds is not None:
            bounds = tuple(self.scene_bounds)
        return target, bounds

    def run_id(self) -> str:
        material = f"{self.task}\x00{self.mode}\x00{self.seed}"
        return "r" + hashlib.sha256(material.encode("utf-8")).hexdigest()[:12]


@dataclass
class RunState:
    """Progress of one run; completed stages are a prefix of the fixed order."""

    run_id: str
    status: str = "pending"  # pending | running | failed | complete
    completed_phases: list[str] = field(default_factory=list)
    failed_stage: Optional[str] = None
    created_at: str = field(default_factory=utc_now_iso)
    updated_at: str = field(default_factory=utc_now_iso)
    memory: Optional[MemoryStore] = None

    def mark_complete(self, stage: str) -> None:
        expected = STAGES[len(self.completed_phases)]
        if stage != expected:
            raise DreamForgeError(f"stage {stage!r} completed out of order (expected {expected!r})")
        self.completed_phases.append(stage)

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "run_id": self.run_id,
            "status": self.status,
            "completed_phases": list(self.completed_phases),
            "failed_stage": self.failed_stage,
            "created_at": self.created_at,
            "updated_at": self.updated_at,
        }

    def save(self, run_dir: Path) -> None:
        self.updated_at = utc_now_iso()
        atomic_write_json(run_dir / "state.json", self.to_dict())

    @classmethod
    def load(cls, run_dir: Path) -> "RunState":
        payload = read_json(run_dir / "state.json")
        state = cls(
            run_id=payload["run_id"],
            status=payload["status"],
            completed_phases=list(payload["completed_phases"]),
            failed_stage=payload.get("failed_stage"),
            created_at=payload["created_at"],
            updated_at=payload["updated_at"],
        )
        state.memory = MemoryStore.load(run_dir / "memory")
        return state


# ---------------------------------------------------------------------------
# Stage execution
# ---------------------------------------------------------------------------


class _RunContext:
    def __init__(self, config: RunConfig, backends: Backends, run_dir: Path, state: RunState):
        self.config = config
        self.backends = backends
        self.run_dir = run_dir
        self.state = state
        self.memory: MemoryStore = state.memory
        self.cards: dict[str, RoleCard] = default_cards(config.roles_dir)
        self._script: Optional[Script] = None

    def card(self, name: str) -> RoleCard:
        if name not in self.cards:
            raise DreamForgeError(f"no role card named {name!r}")
        return self.cards[name]

    @property
    def script(self) -> Script:
        if self._script is None:
            self._script = Script.from_dict(read_json(self.run_dir / "script.json"))
        return self._script

    @script.setter
    def script(self, value: Script) -> None:
        self._script = value
        atomic_write_json(self.run_dir / "script.json", value.to_dict())


def _run_conversation_stage(
    ctx: _RunContext, stage: str, seed_override: Optional[str] = None
) -> PhaseOutput:
    plan = _CONVERSATION_STAGES[stage]
    context = ctx.memory.gather(list(plan.inputs))
    spec = PhaseSpec(
        id=stage,
        phase_prompt=PHASE_PROMPT_TEMPLATE.format(
            title=plan.title,
            instructor=plan.instructor,
            assistant=plan.assistant,
            goal=plan.goal,
            max_rounds=5,
        ),
        instructor_role=plan.instructor,
        assistant_role=plan.assistant,
        inputs=plan.inputs,
    )
    instructor = make_agent(ctx.card(plan.instructor), ctx.backends.chat, spec.phase_prompt)
    assistant = make_agent(ctx.card(plan.assistant), ctx.backends.chat, spec.phase_prompt)
    seed = seed_override or _seed_instruction(ctx, stage, context)
    output = run_phase(spec, instructor, assistant, seed)
    output.save(ctx.run_dir / "phases" / f"{stage}.json")
    return output


def _seed_instruction(ctx: _RunContext, stage: str, context: list[tuple[str, str]]) -> str:
    values = dict(context)
    task = ctx.config.task
    if stage == "task_definition":
        return f"Here is the client brief: {task}\nPropose the production task statement."
    if stage == "style_decision":
        return (
            "Propose the visual style for this production.\n"
            f"Brief: {task}\nAgreed task: {values['task']}"
        )
    if stage == "story_prompting":
        return f"Draft the story outline.\nBrief: {task}\nStyle: {values['style']}"
    if stage == "script_design":
        target, (low, high) = ctx.config.effective_scene_plan()
        return (
            "Write the final scene list, one line per scene in the form "
            f"'Scene <n>: <description>'. Produce about {target} scenes "
            f"(between {low} and {high}).\nStory: {values['story']}"
        )
    raise DreamForgeError(f"no seed instruction for stage {stage!r}")


def _stage_task(ctx: _RunContext) -> None:
    output = _run_conversation_stage(ctx, "task_definition")
    ctx.memory.put("task", output.summary, source_phase="task_definition")


def _stage_style(ctx: _RunContext) -> None:
    output = _run_conversation_stage(ctx, "style_decision")
    ctx.memory.put("style", output.summary, source_phase="style_decision")


def _stage_story(ctx: _RunContext) -> None:
    output = _run_conversation_stage(ctx, "story_prompting")
    ctx.memory.put("story", output.summary, source_phase="story_prompting")


def _stage_script(ctx: _RunContext) -> None:
    target, (low, high) = ctx.config.effective_scene_plan()
    output = _run_conversation_stage(ctx, "script_design")
    script = parse_script(output.summary)
    if not (low <= len(script) <= high):
        # One corrective re-prompt, then accept whatever comes back.
        first_attempt = ctx.run_dir / "phases" / "script_design.json"
        first_attempt.rename(ctx.run_dir / "phases" / "script_design.rejected.json")
        corrective = (
            f"The scene list had {len(script)} scenes; it must have between "
            f"{low} and {high}. Rewrite the complete scene list, one line per "
            f"scene in the form 'Scene <n>: <description>', about {target} scenes.\n"
            f"Story: {dict(ctx.memory.gather(['story']))['story']}"
        )
        output = _run_conversation_stage(ctx, "script_design", seed_override=corrective)
        script = parse_script(output.summary)
    ctx.script = script
    ctx.memory.put("script", output.summary, source_phase="script_design")


def _stage_keyframes(ctx: _RunContext) -> None:
    gathered = dict(ctx.memory.gather(["style", "script"]))
    style = gathered["style"]
    script = ctx.script
    frames_dir = ctx.run_dir / "keyframes"
    frames_dir.mkdir(parents=True, exist_ok=True)

    painter = make_agent(ctx.card("Painter"), ctx.backends.chat, KEYFRAME_PHASE_PROMPT)
    director = make_agent(ctx.card("Director"), ctx.backends.chat, KEYFRAME_PHASE_PROMPT)
    monitor = make_agent(ctx.card("Monitor"), ctx.backends.vision, KEYFRAME_PHASE_PROMPT)

    base_frame, base_description = generate_base_frame(
        script.scenes[0].description,
        painter,
        director,
        monitor,
        ctx.backends.image_gen,
        style=style,
        attempt_cap=ctx.config.attempt_cap,
    )
    contexts: list[ContextEnv] = [derive_context(base_frame, monitor)]
    frames: list[Keyframe] = [base_frame]
    _persist_frame(frames_dir, base_frame, contexts[-1], base_description)

    for scene in script.scenes[1:]:
        frame = iterate_keyframe(
            scene.index,
            scene.description,
            base_description,
            contexts[-1],
            painter,
            director,
            monitor,
            ctx.backends.image_gen,
            style=style,
            attempt_cap=ctx.config.attempt_cap,
        )
        contexts.append(derive_context(frame, monitor))
        frames.append(frame)
        _persist_frame(frames_dir, frame, contexts[-1], base_description)

    if len(frames) != len(script):
        raise DreamForgeError(
            f"keyframe count {len(frames)} != scene count {len(script)}"
        )
    index_payload = {
        "count": len(frames),
        "frames": [f"frame_{frame.index}.png" for frame in frames],
        "base_description": base_description.text,
    }
    atomic_write_json(frames_dir / "index.json", index_payload)
    ctx.memory.put_artifact(
        "keyframes",
        dump_json(index_payload).encode("utf-8"),
        "keyframes.json",
        source_phase="keyframe_design",
    )


def _persist_frame(
    frames_dir: Path,
    frame: Keyframe,
    context: ContextEnv,
    base_description: BaseDescription,
) -> None:
    atomic_write_bytes(frames_dir / f"frame_{frame.index}.png", frame.image)
    sidecar = {
        "index": frame.index,
        "accepted": frame.accepted,
        "request": frame.request.to_dict(),
        "verdicts": [v.to_dict() for v in frame.review],
        "context": {"index": context.index, "text": context.text},
        "base_description_source": base_description.source_frame,
        "image_file": f"frame_{frame.index}.png",
    }
    atomic_write_json(frames_dir / f"frame_{frame.index}.json", sidecar)


def _stage_clips(ctx: _RunContext) -> None:
    ctx.memory.gather(["keyframes"])
    script = ctx.script
    frames_dir = ctx.run_dir / "keyframes"
    clips_dir = ctx.run_dir / "clips"
    clips_dir.mkdir(parents=True, exist_ok=True)

    def _one(scene: SceneSpec) -> dict:
        image = (frames_dir / f"frame_{scene.index}.png").read_bytes()
        clip = ctx.backends.video_gen.generate(image, scene.description)
        clip_name = f"clip_{scene.index}{clip.suffix}"
        atomic_write_bytes(clips_dir / clip_name, clip.data)
        return {
            "scene": scene.index,
            "file": f"clips/{clip_name}",
            "duration_sec": clip.duration_sec,
        }

    workers = max(1, ctx.config.clip_workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        entries = list(pool.map(_one, script.scenes))
    entries.sort(key=lambda e: e["scene"])
    manifest = {"schema_version": 1, "run_id": ctx.state.run_id, "clips": entries}
    atomic_write_json(ctx.run_dir / "manifest.json", manifest)
    ctx.memory.put_artifact(
        "manifest",
        dump_json(manifest).encode("utf-8"),
        "manifest.json",
        source_phase="clip_generation",
    )


_STAGE_RUNNERS = {
    "task_definition": _stage_task,
    "style_decision": _stage_style,
    "story_prompting": _stage_story,
    "script_design": _stage_script,
    "keyframe_design": _stage_keyframes,
    "clip_generation": _stage_clips,
}


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------


def run_pipeline(config: RunConfig, backends: Optional[Backends] = None) -> RunState:
    """Execute all stages for this config; returns the completed RunState.

    A run that already completed is returned as-is (re-running is a no-op);
    a previously failed run continues from its first incomplete stage. On a
    stage failure the state is persisted as failed and PipelineError raised.
    """
    run_id = config.run_id()
    run_dir = config.out_dir / run_id
    run_dir.mkdir(parents=True, exist_ok=True)
    with FileLock(str(run_dir / ".lock")):
        if (run_dir / "state.json").is_file():
            state = RunState.load(run_dir)
            if state.status == "complete":
                return state
        else:
            state = RunState(run_id=run_id)
            state.memory = MemoryStore(run_dir / "memory")
        _persist_config(run_dir, config)
        if backends is None:
            backends = build_backends(
                config.backend_profile or default_mock_profile(),
                seed=config.seed,
                call_log_path=run_dir / "calls.log",
            )
        return _execute(config, backends, run_dir, state)


def resume_run(
    run_id: str,
    out_dir: Path | str,
    backends: Optional[Backends] = None,
) -> RunState:
    """Continue a failed or interrupted run; completed stages never re-execute."""
    run_dir = Path(out_dir) / run_id
    if not (run_dir / "state.json").is_file():
        raise DreamForgeError(f"no run {run_id!r} under {out_dir}")
    with FileLock(str(run_dir / ".lock")):
        state = RunState.load(run_dir)
        if state.status == "complete":
            return state
        config = _load_config(run_dir)
        if backends is None:
            backends = build_backends(
                config.backend_profile or default_mock_profile(),
                seed=config.seed,
                call_log_path=run_dir / "calls.log",
            )
        return _execute(config, backends, run_dir, state)


def _execute(config: RunConfig, backends: Backends, run_dir: Path, state: RunState) -> RunState:
    state.status = "running"
    state.failed_stage = None
    state.save(run_dir)
    ctx = _RunContext(config, backends, run_dir, state)
    remaining = [stage for stage in STAGES if stage not in state.completed_phases]
    for stage in remaining:
        try:
            _STAGE_RUNNERS[stage](ctx)
        except DreamForgeError as exc:
            state.status = "failed"
            state.failed_stage = stage
            state.save(run_dir)
            raise PipelineError(state.run_id, stage, exc) from exc
        state.mark_complete(stage)
        state.save(run_dir)
    state.status = "complete"
    state.save(run_dir)
    return state


def _persist_config(run_dir: Path, config: RunConfig) -> None:
    atomic_write_json(
        run_dir / "config.json",
        {
            "schema_version": 1,
            "task": config.task,
            "mode": config.mode,
            "seed": config.seed,
            "scene_target": config.scene_target,
            "scene_bounds": list(config.scene_bounds) if config.scene_bounds else None,
            "attempt_cap": config.attempt_cap,
            "clip_workers": config.clip_workers,
            "backend_profile": config.backend_profile,
        },
    )


def _load_config(run_dir: Path) -> RunConfig:
    payload = read_json(run_dir / "config.json")
    bounds = payload.get("scene_bounds")
    return RunConfig(
        task=payload["task"],
        mode=payload["mode"],
        seed=payload["seed"],
        out_dir=run_dir.parent,
        backend_profile=payload.get("backend_profile"),
        scene_target=payload.get("scene_target"),
        scene_bounds=tuple(bounds) if bounds else None,
        attempt_cap=payload.get("attempt_cap", 3),
        clip_workers=payload.get("clip_workers", 2),
    )
