"""Shared fixtures: candidate builders, mock gateways, and an instant
scripted gateway for selection/evaluation logic tests that skips template
rendering entirely."""

from __future__ import annotations

from typing import Callable, Optional

import pytest

from vista.gateway import Gateway, MockBackend, ModelResponse, TokenUsage, VideoStore
from vista.types import Candidate, PromptText, UserPrompt, VideoHandle


@pytest.fixture
def user_prompt() -> UserPrompt:
    return UserPrompt(text="a dog chasing a ball on a beach", duration_seconds=8)


def make_candidate(tag: str, text: Optional[str] = None) -> Candidate:
    prompt = PromptText(text=text or f"candidate prompt {tag}", lineage="planned")
    video = VideoHandle(
        id=f"vid-{tag}",
        uri=f"blobs/{tag}.bin",
        prompt_id=prompt.id,
        duration_seconds=8.0,
    )
    return Candidate(video=video, prompt=prompt)


def make_candidates(n: int) -> list[Candidate]:
    return [make_candidate(f"c{i}") for i in range(n)]


@pytest.fixture
def mock_gateway_factory(tmp_path):
    def build(seed: int = 0, responders=None, fixed_tokens=None, **kwargs) -> Gateway:
        backend = MockBackend(seed=seed, responders=responders, fixed_tokens=fixed_tokens)
        store = VideoStore(tmp_path / f"store-{seed}")
        return Gateway(backend, store, **kwargs)

    return build


@pytest.fixture
def mock_gateway(mock_gateway_factory) -> Gateway:
    return mock_gateway_factory(seed=0)


class InstantGateway:
    """Minimal gateway stand-in for pure-logic tests.

    Responds with pre-parsed structured bodies keyed by template name, so no
    template rendering or JSON round-trip happens. ``pairwise`` receives the
    request and returns the verdict body.
    """

    def __init__(
        self,
        pairwise: Optional[Callable] = None,
        evaluator: Optional[Callable] = None,
    ):
        self.pairwise = pairwise
        self.evaluator = evaluator
        self.calls: dict[str, int] = {}

    def complete(self, request, validator=None) -> ModelResponse:
        name = request.template_name
        self.calls[name] = self.calls.get(name, 0) + 1
        if name == "probing":
            keys = [k.strip() for k in request.binding("probing_aspect_keys").split(",")]
            parsed = {key: f"note on {key}" for key in keys if key}
        elif name == "pairwise_select":
            parsed = self.pairwise(request)
        elif name == "evaluator":
            parsed = self.evaluator(request)
        else:
            raise AssertionError(f"unexpected template {name}")
        return ModelResponse(text="", parsed=parsed, tokens=TokenUsage(0, 0))


def rank_judge(ranks: dict[str, int], keys: Optional[list[str]] = None) -> Callable:
    """Pairwise responder encoding a strict total order: lower rank wins every
    criterion, consistently under swapping."""

    def respond(request) -> dict:
        criterion_keys = keys or [
            k.strip() for k in request.binding("criteria_keys").split(",") if k.strip()
        ]
        a_id = request.attachments[0].id
        b_id = request.attachments[1].id
        a_wins = ranks[a_id] < ranks[b_id]
        value = 1 if a_wins else 0
        criteria = {key: value for key in criterion_keys}
        k = len(criterion_keys)
        score_a = sum(criteria.values()) / k
        score_b = 1 - score_a
        return {
            "Decision": "A_BETTER" if a_wins else "B_BETTER",
            "WeightedScoreA": score_a,
            "WeightedScoreB": score_b,
            "Criteria": criteria,
            "Violations": {"A": [], "B": []},
        }

    return respond


def slot_biased_judge(keys: Optional[list[str]] = None) -> Callable:
    """Pairwise responder that always prefers whatever sits in slot A, so the
    forward and swapped passes always disagree."""

    def respond(request) -> dict:
        criterion_keys = keys or [
            k.strip() for k in request.binding("criteria_keys").split(",") if k.strip()
        ]
        criteria = {key: 1 for key in criterion_keys}
        return {
            "Decision": "A_BETTER",
            "WeightedScoreA": 1.0,
            "WeightedScoreB": 0.0,
            "Criteria": criteria,
            "Violations": {"A": [], "B": []},
        }

    return respond


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "acceptance(number, description): marks a test as one acceptance criterion",
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when != "call":
        return
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    import sys

    number, description = marker.args
    status = "PASS" if report.passed else "FAIL"
    print(
        f"\n[ACCEPTANCE] criterion {number:>2}: {status} - {description}",
        file=sys.stderr,
    )
