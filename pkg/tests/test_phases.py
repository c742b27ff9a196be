from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dreamforge.backends.mocks import MockChatBackend
from dreamforge.errors import PhaseFailedError
from dreamforge.phases import (
    FORCED_SUMMARY_INSTRUCTION,
    INFO_MARKER,
    PhaseOutput,
    PhaseSpec,
    Transcript,
    extract_info_summary,
    run_phase,
)
from dreamforge.roles import make_agent

from conftest import make_card


# ---------------------------------------------------------------------------
# extract_info_summary
# ---------------------------------------------------------------------------


def test_extract_simple():
    assert extract_info_summary("<INFO> cartoon style") == "cartoon style"


def test_extract_absent():
    assert extract_info_summary("no marker here") is None


def test_extract_empty_payload_is_absent():
    assert extract_info_summary("<INFO>   ") is None


def test_extract_mid_sentence():
    # oracle: scan for the first marker, take the suffix, trim whitespace
    source = "fine. <INFO> oil painting, muted palette"
    index = source.find("<INFO>")
    expected = source[index + len("<INFO>"):].strip()
    assert expected == "oil painting, muted palette"
    assert extract_info_summary(source) == expected


def test_extract_first_marker_only():
    assert extract_info_summary("a <INFO> b <INFO> c") == "b <INFO> c"


@settings(max_examples=100)
@given(
    prefix=st.text(max_size=30),
    payload=st.text(alphabet="abcdef ,.", max_size=30),
)
def test_extract_idempotent_on_single_marker(prefix, payload):
    source = prefix.replace(INFO_MARKER, "") + INFO_MARKER + payload
    summary = extract_info_summary(source)
    if summary is None:
        assert not payload.strip()
    else:
        assert INFO_MARKER not in summary
        assert summary == payload.strip()


# ---------------------------------------------------------------------------
# run_phase
# ---------------------------------------------------------------------------


def _spec(max_rounds: int = 5) -> PhaseSpec:
    return PhaseSpec(
        id="test_phase",
        phase_prompt="test phase prompt",
        instructor_role="Instructor",
        assistant_role="Assistant",
        max_rounds=max_rounds,
    )


def _agents(instructor_script, assistant_script, round_limit: int = 9):
    instructor = make_agent(
        make_card(name="Instructor", round_limit=round_limit),
        MockChatBackend(instructor_script),
        "test phase prompt",
    )
    assistant = make_agent(
        make_card(name="Assistant", round_limit=round_limit),
        MockChatBackend(assistant_script),
        "test phase prompt",
    )
    return instructor, assistant


def test_round_one_termination():
    instructor, assistant = _agents(["unused"], ["<INFO> cartoon style"])
    output = run_phase(_spec(), instructor, assistant, "pick a style")
    assert output.summary == "cartoon style"
    assert output.transcript.rounds_used == 1
    assert output.transcript.terminated_by_info
    assert len(instructor.backend.calls) == 0


def test_budget_exhaustion_forced_summary():
    instructor, assistant = _agents(
        ["push on 2", "push on 3"],
        ["idea 1", "idea 2", "idea 3", "<INFO> final thing"],
    )
    output = run_phase(_spec(max_rounds=3), instructor, assistant, "go")
    assert output.transcript.rounds_used == 4
    assert output.transcript.terminated_by_info
    assert output.summary == "final thing"
    assert output.transcript.turns[-1][0] == FORCED_SUMMARY_INSTRUCTION
    assert len(instructor.backend.calls) == 2
    forced_turns = [t for t in output.transcript.turns if t[0] == FORCED_SUMMARY_INSTRUCTION]
    assert len(forced_turns) == 1


def test_forced_summary_without_marker_falls_back():
    instructor, assistant = _agents(
        ["more"],
        ["idea 1", "idea 2", "stubborn final answer"],
    )
    output = run_phase(_spec(max_rounds=2), instructor, assistant, "go")
    assert not output.transcript.terminated_by_info
    assert output.summary == "stubborn final answer"


def test_mid_sentence_marker_terminates():
    instructor, assistant = _agents(["unused"], ["fine. <INFO> oil painting, muted palette"])
    output = run_phase(_spec(), instructor, assistant, "go")
    assert output.summary == "oil painting, muted palette"


def test_bare_marker_does_not_terminate():
    instructor, assistant = _agents(
        ["again"],
        ["<INFO>   ", "<INFO> actual decision"],
    )
    output = run_phase(_spec(), instructor, assistant, "go")
    assert output.transcript.rounds_used == 2
    assert output.summary == "actual decision"


def test_round_limit_of_cards_caps_budget():
    instructor, assistant = _agents(
        ["push"],
        ["idea 1", "idea 2", "<INFO> done"],
        round_limit=2,
    )
    output = run_phase(_spec(max_rounds=5), instructor, assistant, "go")
    # budget = min(5, 2, 2) = 2, so the third scripted reply lands on the forced turn
    assert output.transcript.rounds_used == 3
    assert output.summary == "done"


def test_backend_failure_carries_partial_transcript():
    instructor, assistant = _agents(["next instruction"], ["only answer"])
    with pytest.raises(PhaseFailedError) as excinfo:
        run_phase(_spec(max_rounds=3), instructor, assistant, "go")
    partial = excinfo.value.transcript
    assert partial is not None
    assert partial.rounds_used >= 1
    assert partial.turns[0] == ("go", "only answer")


def test_agent_without_phase_prompt_rejected():
    instructor, _ = _agents(["x"], ["y"])
    stranger = make_agent(make_card(name="Assistant"), MockChatBackend(["z"]), "other prompt")
    with pytest.raises(ValueError):
        run_phase(_spec(), instructor, stranger, "go")


def test_empty_seed_instruction_rejected():
    instructor, assistant = _agents(["x"], ["y"])
    with pytest.raises(ValueError):
        run_phase(_spec(), instructor, assistant, "")


def test_run_phase_deterministic_for_same_scripts():
    def run_once():
        instructor, assistant = _agents(["i2"], ["a1", "<INFO> result"])
        return run_phase(_spec(), instructor, assistant, "go")

    first, second = run_once(), run_once()
    assert first.transcript.to_dict() == second.transcript.to_dict()
    assert first.summary == second.summary


def test_wire_alternation_strict():
    instructor, assistant = _agents(
        ["i2", "i3"],
        ["a1", "a2", "<INFO> summary"],
    )
    run_phase(_spec(), instructor, assistant, "seed")
    for call in assistant.backend.calls:
        roles = [m["role"] for m in call["messages"]]
        assert roles[0] == "system"
        assert roles[1] == "user" and roles[-1] == "user"
        assert all(a != b for a, b in zip(roles[1:], roles[2:]))
    for call in instructor.backend.calls:
        roles = [m["role"] for m in call["messages"]]
        # the instructor's own instructions come back as assistant turns
        assert roles[0] == "system"
        assert roles[1] == "assistant" and roles[-1] == "user"
        assert all(a != b for a, b in zip(roles[1:], roles[2:]))


def test_transcript_invariants():
    with pytest.raises(ValueError):
        Transcript(turns=[("i", "a")], terminated_by_info=False, rounds_used=2)
    with pytest.raises(ValueError):
        Transcript(turns=[("i", "no marker")], terminated_by_info=True, rounds_used=1)


def test_phase_output_round_trip(tmp_path):
    transcript = Transcript(turns=[("i", "<INFO> x")], terminated_by_info=True, rounds_used=1)
    output = PhaseOutput(phase_id="p", summary="x", transcript=transcript)
    path = tmp_path / "p.json"
    output.save(path)
    assert PhaseOutput.load(path) == output


def test_randomized_conversations_hold_invariants():
    rng = random.Random(1234)
    for _ in range(120):
        max_rounds = rng.randint(1, 5)
        info_round = rng.randint(1, max_rounds + 2)  # may exceed the budget
        assistant_script = []
        for round_index in range(1, max_rounds + 1):
            if round_index == info_round:
                assistant_script.append(f"<INFO> conclusion {round_index}")
                break
            assistant_script.append(f"thinking {round_index}")
        else:
            assistant_script.append("<INFO> forced conclusion")
        instructor_script = [f"instruction {i}" for i in range(2, max_rounds + 1)] or ["unused"]
        instructor, assistant = _agents(instructor_script, assistant_script)
        output = run_phase(_spec(max_rounds=max_rounds), instructor, assistant, "seed")
        transcript = output.transcript
        assert transcript.rounds_used == len(transcript.turns)
        assert transcript.rounds_used <= max_rounds + 1
        assert transcript.terminated_by_info
        assert INFO_MARKER in transcript.turns[-1][1]
        forced = [t for t in transcript.turns if t[0] == FORCED_SUMMARY_INSTRUCTION]
        assert len(forced) == (0 if info_round <= max_rounds else 1)
