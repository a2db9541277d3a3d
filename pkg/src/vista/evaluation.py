"""Benchmark evaluation: bidirectional pairwise comparison and Win/Tie/Loss
aggregation.

Each pair is judged in both presentation orders; per criterion, only an agreed
decision stands and any conflict after unswapping becomes a TIE. A side wins a
match iff it is better on at least ``min_wins`` criteria and is not the loser
on the alignment criterion; if both or neither side qualifies the match is a
Tie.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

from ._parallel import run_indexed
from .errors import MalformedResponse, MissingCriterion
from .gateway.base import Gateway, ModelRequest, STRUCTURED_BLOCK
from .templates import defaults
from .types import UserPrompt, VideoHandle

logger = logging.getLogger(__name__)

EVAL_DECISIONS = ("A_BETTER", "B_BETTER", "TIE")

DEFAULT_EVAL_CRITERIA = tuple(key for key, _, _ in defaults.DEFAULT_EVALUATION_CRITERIA)

_DEFINITIONS = {key: (title, text) for key, title, text in defaults.DEFAULT_EVALUATION_CRITERIA}


@dataclass(frozen=True)
class EvalConfig:
    """``criteria`` selects the scored subset of the evaluator template's
    keys; the alignment criterion is the one a winner must not lose."""

    criteria: tuple[str, ...] = DEFAULT_EVAL_CRITERIA
    alignment_criterion: str = "tv_alignment"
    min_wins: int = 3

    def __post_init__(self) -> None:
        object.__setattr__(self, "criteria", tuple(self.criteria))
        if not self.criteria:
            raise ValueError("at least one evaluation criterion is required")
        if len(set(self.criteria)) != len(self.criteria):
            raise ValueError("evaluation criteria must be unique")
        if self.min_wins < 1:
            raise ValueError("min_wins must be >= 1")

    def criteria_block(self) -> str:
        rows = []
        for key in self.criteria:
            title, text = _DEFINITIONS.get(key, (key.replace("_", " ").title(), ""))
            rows.append((key, title, text))
        return defaults.evaluation_criteria_block(rows)


@dataclass(frozen=True)
class CriterionOutcome:
    criterion: str
    decision: str  # A_BETTER | B_BETTER | TIE

    def __post_init__(self) -> None:
        if self.decision not in EVAL_DECISIONS:
            raise ValueError(f"decision must be one of {EVAL_DECISIONS}")

    def to_dict(self) -> dict:
        return {"criterion": self.criterion, "decision": self.decision}


@dataclass(frozen=True)
class MatchResult:
    outcomes: tuple[CriterionOutcome, ...]
    overall: str  # Win | Tie | Loss for side A
    degraded: bool = False

    def to_dict(self) -> dict:
        return {
            "overall": self.overall,
            "outcomes": [o.to_dict() for o in self.outcomes],
            "degraded": self.degraded,
        }


def _flip(decision: str) -> str:
    if decision == "A_BETTER":
        return "B_BETTER"
    if decision == "B_BETTER":
        return "A_BETTER"
    return "TIE"


def reconcile_decisions(
    forward: Mapping[str, str], swapped: Mapping[str, str], criteria: Sequence[str]
) -> dict[str, str]:
    """Merge the two presentation orders: the swapped run's labels are flipped
    back, then any per-criterion conflict is marked TIE."""
    merged = {}
    for key in criteria:
        a = forward[key]
        b = _flip(swapped[key])
        merged[key] = a if a == b else "TIE"
    return merged


def aggregate_verdict(
    outcomes: Iterable[CriterionOutcome], config: Optional[EvalConfig] = None
) -> MatchResult:
    """Apply the win rule over reconciled per-criterion outcomes."""
    config = config or EvalConfig()
    outcomes = tuple(outcomes)
    seen = [o.criterion for o in outcomes]
    if sorted(seen) != sorted(config.criteria):
        missing = set(config.criteria) - set(seen)
        extra = set(seen) - set(config.criteria)
        raise MissingCriterion(
            f"outcomes must cover the configured criteria exactly once "
            f"(missing={sorted(missing)}, unexpected={sorted(extra)})"
        )
    wins_a = sum(1 for o in outcomes if o.decision == "A_BETTER")
    wins_b = sum(1 for o in outcomes if o.decision == "B_BETTER")
    alignment = {o.criterion: o.decision for o in outcomes}.get(config.alignment_criterion)
    a_qualifies = wins_a >= config.min_wins and alignment != "B_BETTER"
    b_qualifies = wins_b >= config.min_wins and alignment != "A_BETTER"
    if a_qualifies and not b_qualifies:
        overall = "Win"
    elif b_qualifies and not a_qualifies:
        overall = "Loss"
    else:
        overall = "Tie"
    return MatchResult(outcomes=outcomes, overall=overall)


@dataclass(frozen=True)
class DeltaSummary:
    matches: int
    win: float
    tie: float
    loss: float
    delta: float

    def to_dict(self) -> dict:
        return {
            "matches": self.matches,
            "win": self.win,
            "tie": self.tie,
            "loss": self.loss,
            "delta": self.delta,
        }


def compute_delta(results: Sequence[MatchResult]) -> DeltaSummary:
    """Win/Tie/Loss percentages over the results and delta = win% - loss%."""
    if not results:
        raise ValueError("results must be non-empty")
    n = len(results)
    wins = sum(1 for r in results if r.overall == "Win")
    ties = sum(1 for r in results if r.overall == "Tie")
    losses = n - wins - ties
    win = 100.0 * wins / n
    tie = 100.0 * ties / n
    loss = 100.0 * losses / n
    return DeltaSummary(matches=n, win=win, tie=tie, loss=loss, delta=win - loss)


def _eval_validator(keys: Sequence[str]):
    def check(parsed: object) -> None:
        if not isinstance(parsed, dict):
            raise ValueError("evaluator output must be a JSON object")
        for key in keys:
            entry = parsed.get(key)
            if not isinstance(entry, dict):
                raise ValueError(f"missing criterion {key!r}")
            if entry.get("Decision") not in EVAL_DECISIONS:
                raise ValueError(f"criterion {key!r} has no valid Decision")

    return check


class PairEvaluator:
    def __init__(self, gateway: Gateway, config: Optional[EvalConfig] = None,
                 max_workers: int = 1):
        self.gateway = gateway
        self.config = config or EvalConfig()
        self.max_workers = max_workers

    def _judge_once(self, a: VideoHandle, b: VideoHandle, prompt: UserPrompt) -> dict[str, str]:
        keys = self.config.criteria
        request = ModelRequest(
            template_name="evaluator",
            bindings={
                "prompt": prompt.text,
                "criteria_block": self.config.criteria_block(),
                "criteria_keys": ", ".join(keys),
                "output_block": defaults.evaluation_output_block(keys),
            },
            attachments=(a, b),
            expected_format=STRUCTURED_BLOCK,
        )
        response = self.gateway.complete(request, validator=_eval_validator(keys))
        return {key: response.parsed[key]["Decision"] for key in keys}

    def evaluate_pair(self, a: VideoHandle, b: VideoHandle,
                      prompt: UserPrompt) -> list[CriterionOutcome]:
        """Judge the pair in both orders and reconcile; a judging failure
        yields all-TIE outcomes (flagged by the caller via match degradation)."""
        try:
            forward = self._judge_once(a, b, prompt)
            swapped = self._judge_once(b, a, prompt)
        except MalformedResponse as exc:
            logger.warning("pair evaluation degraded to all-TIE: %s", exc)
            return [CriterionOutcome(key, "TIE") for key in self.config.criteria]
        merged = reconcile_decisions(forward, swapped, self.config.criteria)
        return [CriterionOutcome(key, merged[key]) for key in self.config.criteria]

    def evaluate_match(self, a: VideoHandle, b: VideoHandle,
                       prompt: UserPrompt) -> MatchResult:
        outcomes = self.evaluate_pair(a, b, prompt)
        return aggregate_verdict(outcomes, self.config)

    def evaluate_corpus(
        self,
        pairs: Sequence[tuple[VideoHandle, VideoHandle]],
        prompts: Sequence[UserPrompt],
    ) -> tuple[list[MatchResult], DeltaSummary]:
        if len(pairs) != len(prompts):
            raise ValueError("pairs and prompts must have equal length")
        results = run_indexed(
            lambda item: self.evaluate_match(item[0][0], item[0][1], item[1]),
            list(zip(pairs, prompts)),
            self.max_workers,
        )
        return results, compute_delta(results)
