"""Pairwise tournament selection with probing critiques.

Per candidate a failure-focused probing critique is generated once and cached
by video id; pairs are then judged bidirectionally (forward and swapped) and
disagreements, including any COMPARABLE verdict, are resolved by a seeded
uniform draw. Per-criterion outcomes parsed from the judge are ground truth:
scores are recomputed engine-side and any mismatch with the judge's
self-reported numbers is flagged, never trusted.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from ._parallel import run_indexed
from .errors import InvalidDelta, MalformedResponse
from .gateway.base import Gateway, ModelRequest, STRUCTURED_BLOCK
from .rng import SeededRng
from .templates import defaults
from .types import Candidate, Criterion, MetricSuite, UserPrompt

logger = logging.getLogger(__name__)

DECISIONS = ("A_BETTER", "B_BETTER", "COMPARABLE")

DEFAULT_SELECTION_SUITE = MetricSuite(
    name="selection-default",
    criteria=tuple(
        Criterion(name=key, definition=definition, penalized=True)
        for key, _, definition in defaults.DEFAULT_SELECTION_CRITERIA
    ),
)

_TITLES = {key: title for key, title, _ in defaults.DEFAULT_SELECTION_CRITERIA}


@dataclass(frozen=True)
class SelectorConfig:
    metric_suite: MetricSuite = DEFAULT_SELECTION_SUITE
    penalty_lambda: float = 10.0
    comparable_epsilon: float = 0.05
    probing_aspects: tuple[tuple[str, str, str], ...] = defaults.DEFAULT_PROBING_ASPECTS

    def __post_init__(self) -> None:
        if not (self.penalty_lambda >= 0 and self.penalty_lambda == self.penalty_lambda):
            raise ValueError("penalty_lambda must be finite and >= 0")
        if self.comparable_epsilon < 0:
            raise ValueError("comparable_epsilon must be >= 0")

    def aspect_keys(self) -> tuple[str, ...]:
        return tuple(key for key, _, _ in self.probing_aspects)

    def criteria_block(self) -> str:
        rows = [
            (c.name, _TITLES.get(c.name, c.name.replace("_", " ").title()), c.definition)
            for c in self.metric_suite.criteria
        ]
        return defaults.selection_criteria_block(rows)


@dataclass(frozen=True)
class ProbingCritique:
    candidate_id: str  # video id
    aspects: Mapping[str, str]
    degraded: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "aspects", dict(self.aspects))

    def rendered(self) -> str:
        if not self.aspects:
            return "(no critique available)"
        return "\n".join(f"- {key}: {text}" for key, text in self.aspects.items())

    def to_dict(self) -> dict:
        return {
            "candidate_id": self.candidate_id,
            "aspects": dict(self.aspects),
            "degraded": self.degraded,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "ProbingCritique":
        return cls(
            candidate_id=data["candidate_id"],
            aspects=dict(data["aspects"]),
            degraded=data.get("degraded", False),
        )


@dataclass(frozen=True)
class PairVerdict:
    """Outcome of one ordered comparison: ``first`` was shown as A, ``second``
    as B. ``decision`` is recomputed from the per-criterion outcomes."""

    first: str
    second: str
    deltas: Mapping[str, float]
    violations_first: frozenset[str]
    violations_second: frozenset[str]
    score_first: float
    score_second: float
    decision: str
    judge_decision: Optional[str] = None
    score_mismatch: bool = False
    parse_failed: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "deltas", dict(self.deltas))

    def favored(self) -> Optional[str]:
        if self.decision == "A_BETTER":
            return self.first
        if self.decision == "B_BETTER":
            return self.second
        return None

    def to_dict(self) -> dict:
        return {
            "first": self.first,
            "second": self.second,
            "deltas": dict(self.deltas),
            "violations_first": sorted(self.violations_first),
            "violations_second": sorted(self.violations_second),
            "score_first": self.score_first,
            "score_second": self.score_second,
            "decision": self.decision,
            "judge_decision": self.judge_decision,
            "score_mismatch": self.score_mismatch,
            "parse_failed": self.parse_failed,
        }


@dataclass(frozen=True)
class ResolvedComparison:
    round_index: int
    pair_index: int
    first: str
    second: str
    forward: PairVerdict
    swapped: PairVerdict
    winner: str
    via: str  # "agreement" | "random"

    def loser(self) -> str:
        return self.second if self.winner == self.first else self.first

    def to_dict(self) -> dict:
        return {
            "round_index": self.round_index,
            "pair_index": self.pair_index,
            "first": self.first,
            "second": self.second,
            "forward": self.forward.to_dict(),
            "swapped": self.swapped.to_dict(),
            "winner": self.winner,
            "via": self.via,
        }


@dataclass(frozen=True)
class TournamentResult:
    winner: Candidate
    rounds: int
    comparisons: tuple[ResolvedComparison, ...]
    critiques: Mapping[str, ProbingCritique] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "critiques", dict(self.critiques))

    def judge_calls(self) -> int:
        return 2 * len(self.comparisons)

    def winner_ever_lost(self) -> bool:
        winner_id = self.winner.video.id
        return any(
            c.loser() == winner_id for c in self.comparisons
        )


def score_pair(
    deltas: Mapping[str, float],
    violations_first: frozenset[str] | set[str],
    violations_second: frozenset[str] | set[str],
    penalty_lambda: float,
) -> tuple[float, float]:
    """Average per-criterion outcomes with the violation deduction:
    s_i = (1/k) * sum_C (delta(C) - lambda * viol_i(C)) and
    s_j = (1/k) * sum_C (1 - delta(C) - lambda * viol_j(C))."""
    if not deltas:
        raise ValueError("at least one criterion is required")
    k = len(deltas)
    total_first = 0.0
    total_second = 0.0
    for criterion, delta in deltas.items():
        if not isinstance(delta, (int, float)) or float(delta) not in (0.0, 0.5, 1.0):
            raise InvalidDelta(criterion, delta)
        delta = float(delta)
        total_first += delta - penalty_lambda * (criterion in violations_first)
        total_second += (1.0 - delta) - penalty_lambda * (criterion in violations_second)
    return total_first / k, total_second / k


def resolve_bidirectional(
    forward: PairVerdict, swapped: PairVerdict, rng: SeededRng
) -> str:
    """Winner of one bidirectional comparison. Agreement on the same underlying
    candidate settles it; any disagreement, including COMPARABLE on either
    side, is a seeded uniform draw between the two candidates."""
    if {forward.first, forward.second} != {swapped.first, swapped.second}:
        raise ValueError("forward and swapped verdicts must cover the same pair")
    forward_pick = forward.favored()
    swapped_pick = swapped.favored()
    if forward_pick is not None and forward_pick == swapped_pick:
        return forward_pick
    return rng.choice((forward.first, forward.second))


def _verdict_validator(keys: Sequence[str]):
    def check(parsed: object) -> None:
        if not isinstance(parsed, dict):
            raise ValueError("verdict must be a JSON object")
        if parsed.get("Decision") not in DECISIONS:
            raise ValueError(f"Decision must be one of {DECISIONS}")
        criteria = parsed.get("Criteria")
        if not isinstance(criteria, dict):
            raise ValueError("missing Criteria object")
        for key in keys:
            if key not in criteria:
                raise ValueError(f"missing criterion {key!r}")
            value = criteria[key]
            if not isinstance(value, (int, float)) or float(value) not in (0.0, 0.5, 1.0):
                raise ValueError(f"criterion {key!r} score must be 0, 0.5 or 1")
        violations = parsed.get("Violations", {})
        if not isinstance(violations, dict):
            raise ValueError("Violations must be an object")
        for side in ("A", "B"):
            if side in violations and not isinstance(violations[side], list):
                raise ValueError(f"Violations[{side!r}] must be a list")

    return check


def _probe_validator(keys: Sequence[str]):
    def check(parsed: object) -> None:
        if not isinstance(parsed, dict):
            raise ValueError("probing critique must be a JSON object")
        missing = [key for key in keys if key not in parsed]
        if missing:
            raise ValueError(f"missing aspects: {missing}")

    return check


class TournamentSelector:
    def __init__(self, gateway: Gateway, config: SelectorConfig, max_workers: int = 1):
        self.gateway = gateway
        self.config = config
        self.max_workers = max_workers
        self._critique_cache: dict[str, ProbingCritique] = {}
        self._cache_suite = config.metric_suite.fingerprint()

    # -- probing critiques ---------------------------------------------------

    def seed_critique(self, critique: ProbingCritique) -> None:
        """Restore a previously computed critique (e.g. on resume)."""
        self._critique_cache[critique.candidate_id] = critique

    def _probe_one(self, candidate: Candidate, user: UserPrompt) -> ProbingCritique:
        keys = self.config.aspect_keys()
        request = ModelRequest(
            template_name="probing",
            bindings={
                "input_prompt": user.text,
                "probing_aspects": defaults.probing_aspects_block(self.config.probing_aspects),
                "probing_aspect_keys": ", ".join(keys),
            },
            attachments=(candidate.video,),
            expected_format=STRUCTURED_BLOCK,
        )
        try:
            response = self.gateway.complete(request, validator=_probe_validator(keys))
        except MalformedResponse as exc:
            logger.warning("probing failed for %s: %s", candidate.video.id, exc)
            return ProbingCritique(candidate_id=candidate.video.id, aspects={}, degraded=True)
        aspects = {key: str(response.parsed[key]) for key in keys}
        return ProbingCritique(candidate_id=candidate.video.id, aspects=aspects)

    def probe_critiques(self, candidates: Sequence[Candidate], user: UserPrompt) -> list[ProbingCritique]:
        """One critique per candidate, cache-aware: already-probed videos
        (e.g. the carried champion) are not re-probed unless the metric suite
        changed."""
        if not candidates:
            raise ValueError("candidates must be non-empty")
        if self._cache_suite != self.config.metric_suite.fingerprint():
            self._critique_cache.clear()
            self._cache_suite = self.config.metric_suite.fingerprint()
        pending = [c for c in candidates if c.video.id not in self._critique_cache]
        fresh = run_indexed(
            lambda c: self._probe_one(c, user), pending, self.max_workers
        )
        for critique in fresh:
            self._critique_cache[critique.candidate_id] = critique
        return [self._critique_cache[c.video.id] for c in candidates]

    # -- pairwise comparison ---------------------------------------------------

    def compare_pair(
        self,
        a: Candidate,
        qa: ProbingCritique,
        b: Candidate,
        qb: ProbingCritique,
        user: UserPrompt,
    ) -> PairVerdict:
        """One ordered comparison (a shown as A, b as B)."""
        if a.video.id == b.video.id:
            raise ValueError("cannot compare a candidate against itself")
        suite = self.config.metric_suite
        keys = suite.criterion_names()
        request = ModelRequest(
            template_name="pairwise_select",
            bindings={
                "input_prompt": user.text,
                "feedback_a": qa.rendered(),
                "feedback_b": qb.rendered(),
                "criteria_block": self.config.criteria_block(),
                "criteria_keys": ", ".join(keys),
                "penalty_value": f"{self.config.penalty_lambda:g}",
                "comparable_epsilon": f"{self.config.comparable_epsilon:g}",
            },
            attachments=(a.video, b.video),
            expected_format=STRUCTURED_BLOCK,
        )
        try:
            response = self.gateway.complete(request, validator=_verdict_validator(keys))
        except MalformedResponse as exc:
            logger.warning(
                "pairwise judging failed for (%s, %s): %s", a.video.id, b.video.id, exc
            )
            return PairVerdict(
                first=a.video.id,
                second=b.video.id,
                deltas={key: 0.5 for key in keys},
                violations_first=frozenset(),
                violations_second=frozenset(),
                score_first=0.5,
                score_second=0.5,
                decision="COMPARABLE",
                parse_failed=True,
            )
        parsed = response.parsed
        deltas = {key: float(parsed["Criteria"][key]) for key in keys}
        raw_violations = parsed.get("Violations", {})
        penalized = suite.penalized_names()
        violations_first = frozenset(raw_violations.get("A", ())) & penalized
        violations_second = frozenset(raw_violations.get("B", ())) & penalized
        score_first, score_second = score_pair(
            deltas, violations_first, violations_second, self.config.penalty_lambda
        )
        if abs(score_first - score_second) < self.config.comparable_epsilon:
            decision = "COMPARABLE"
        elif score_first > score_second:
            decision = "A_BETTER"
        else:
            decision = "B_BETTER"
        judge_decision = parsed.get("Decision")
        mismatch = judge_decision != decision
        try:
            reported = (float(parsed.get("WeightedScoreA")), float(parsed.get("WeightedScoreB")))
            mismatch = mismatch or abs(reported[0] - score_first) > 1e-6 or abs(
                reported[1] - score_second
            ) > 1e-6
        except (TypeError, ValueError):
            mismatch = True
        if mismatch:
            logger.warning(
                "judge-reported scores disagree with recomputation for (%s, %s)",
                a.video.id, b.video.id,
            )
        return PairVerdict(
            first=a.video.id,
            second=b.video.id,
            deltas=deltas,
            violations_first=violations_first,
            violations_second=violations_second,
            score_first=score_first,
            score_second=score_second,
            decision=decision,
            judge_decision=judge_decision,
            score_mismatch=mismatch,
        )

    # -- tournament --------------------------------------------------------------

    def run_tournament(
        self, candidates: Sequence[Candidate], user: UserPrompt, rng: SeededRng
    ) -> TournamentResult:
        """Single elimination over the candidate set.

        Odd rounds grant a seeded bye; each resolved comparison issues exactly
        two judge calls (forward + swapped). Conflict draws happen in ascending
        pair order after the round's comparisons complete, so concurrent
        judging cannot perturb outcomes.
        """
        if not candidates:
            raise ValueError("candidates must be non-empty")
        critiques = {
            critique.candidate_id: critique
            for critique in self.probe_critiques(candidates, user)
        }
        entrants = list(candidates)
        comparisons: list[ResolvedComparison] = []
        round_index = 0
        while len(entrants) > 1:
            round_index += 1
            bye: Optional[Candidate] = None
            if len(entrants) % 2 == 1:
                bye = entrants.pop(rng.randrange(len(entrants)))
            pairs = [
                (entrants[2 * i], entrants[2 * i + 1]) for i in range(len(entrants) // 2)
            ]

            def judge(pair: tuple[Candidate, Candidate]) -> tuple[PairVerdict, PairVerdict]:
                a, b = pair
                forward = self.compare_pair(
                    a, critiques[a.video.id], b, critiques[b.video.id], user
                )
                swapped = self.compare_pair(
                    b, critiques[b.video.id], a, critiques[a.video.id], user
                )
                return forward, swapped

            verdicts = run_indexed(judge, pairs, self.max_workers)
            next_round: list[Candidate] = []
            for pair_index, ((a, b), (forward, swapped)) in enumerate(zip(pairs, verdicts)):
                winner_id = resolve_bidirectional(forward, swapped, rng)
                via = "agreement" if (
                    forward.favored() is not None and forward.favored() == swapped.favored()
                ) else "random"
                comparisons.append(
                    ResolvedComparison(
                        round_index=round_index,
                        pair_index=pair_index,
                        first=a.video.id,
                        second=b.video.id,
                        forward=forward,
                        swapped=swapped,
                        winner=winner_id,
                        via=via,
                    )
                )
                next_round.append(a if winner_id == a.video.id else b)
            if bye is not None:
                next_round.append(bye)
            entrants = next_round
        return TournamentResult(
            winner=entrants[0],
            rounds=round_index,
            comparisons=tuple(comparisons),
            critiques=critiques,
        )
