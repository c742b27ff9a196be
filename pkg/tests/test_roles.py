from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dreamforge.backends.mocks import MockChatBackend, MockVisionBackend
from dreamforge.errors import BackendUnavailableError
from dreamforge.roles import (
    Agent,
    RoleCard,
    VisionAgent,
    default_cards,
    load_role_cards,
    make_agent,
    render_system_prompt,
)

from conftest import make_card


def test_render_contains_all_parts_verbatim():
    card = make_card(
        name="Movie Art Director",
        job="generate a picture according to the scenery given by the director",
        task="deliver one image prompt per scene",
        requirements=("obey the real-world rules, like color unchanged",),
    )
    prompt = render_system_prompt(card, "phase prompt here")
    assert "generate a picture according to the scenery given by the director" in prompt
    assert card.task in prompt
    for requirement in card.requirements:
        assert requirement in prompt
    assert prompt.startswith("phase prompt here")


def test_render_empty_requirements_section():
    card = make_card(requirements=())
    prompt = render_system_prompt(card, "p")
    assert "## Job" in prompt
    assert "## Task" in prompt
    assert prompt.rstrip().endswith("## Requirements")


def test_render_is_deterministic():
    card = make_card()
    assert render_system_prompt(card, "p") == render_system_prompt(card, "p")


@settings(max_examples=60)
@given(
    job_a=st.text(alphabet="abcdef ", min_size=1, max_size=20),
    job_b=st.text(alphabet="abcdef ", min_size=1, max_size=20),
    task=st.text(alphabet="ghij ", min_size=1, max_size=20),
)
def test_render_injective_on_distinct_jobs(job_a, job_b, task):
    phase = "shared phase prompt"
    card_a = make_card(job=job_a, task=task)
    card_b = make_card(job=job_b, task=task)
    rendered_a = render_system_prompt(card_a, phase)
    rendered_b = render_system_prompt(card_b, phase)
    assert (rendered_a == rendered_b) == (job_a == job_b)


def test_card_invariants():
    with pytest.raises(ValueError):
        make_card(name="")
    with pytest.raises(ValueError):
        make_card(phases=())
    with pytest.raises(ValueError):
        make_card(round_limit=0)


def test_make_agent_sends_system_prompt_first():
    backend = MockChatBackend(["hello"])
    agent = make_agent(make_card(), backend, "phase prompt")
    assert isinstance(agent, Agent)
    agent.chat([{"role": "user", "content": "hi"}])
    first_message = backend.calls[0]["messages"][0]
    assert first_message["role"] == "system"
    assert first_message["content"] == agent.system_prompt


def test_make_agent_is_deterministic():
    card = make_card()
    agent_a = make_agent(card, MockChatBackend(["x"]), "p")
    agent_b = make_agent(card, MockChatBackend(["x"]), "p")
    assert agent_a.system_prompt == agent_b.system_prompt


def test_make_agent_dead_backend():
    with pytest.raises(BackendUnavailableError):
        make_agent(make_card(), MockChatBackend(["x"], dead=True), "p")


def test_make_agent_vision_backend_yields_vision_agent():
    agent = make_agent(make_card(), MockVisionBackend(["a description"]), "p")
    assert isinstance(agent, VisionAgent)
    assert agent.describe(b"imagebytes", "describe this") == "a description"
    assert agent.backend.calls[0]["system"] == agent.system_prompt


def test_default_cards_ship_studio_and_iteration_roles():
    cards = default_cards()
    expected = {
        "CEO",
        "Movie Director",
        "Film Producer",
        "Screenwriter",
        "Filmmaker",
        "Reviewer",
        "Painter",
        "Director",
        "Monitor",
    }
    assert expected == set(cards)
    for card in cards.values():
        assert card.round_limit >= 1
        assert card.phases


def test_load_role_cards_round_trip(tmp_path):
    card = make_card(name="Colorist", phases=("keyframe_design",))
    (tmp_path / "colorist.json").write_text(json.dumps(card.to_dict()), encoding="utf-8")
    loaded = load_role_cards(tmp_path)
    assert loaded["Colorist"] == card


def test_default_cards_user_overlay(tmp_path):
    override = make_card(name="CEO", phases=("task_definition",), job="custom job")
    (tmp_path / "ceo.json").write_text(json.dumps(override.to_dict()), encoding="utf-8")
    cards = default_cards(extra_dir=tmp_path)
    assert cards["CEO"].job == "custom job"
