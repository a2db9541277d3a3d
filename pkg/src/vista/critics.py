"""Triadic judge court per dimension.

Each configured dimension (visual, audio, context by default) is assessed
independently by a normal judge and an adversarial judge, then consolidated by
a meta judge. Meta scores drive the optimizer's gate, so the meta template
requires a numeric per-metric score; when one is missing the engine
synthesizes the mean of the available side scores and flags it synthetic.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from ._parallel import run_indexed
from .errors import MalformedResponse
from .gateway.base import Gateway, ModelRequest, STRUCTURED_BLOCK
from .templates import defaults
from .types import Candidate, UserPrompt

logger = logging.getLogger(__name__)

DIMENSIONS = ("visual", "audio", "context")
STANCES = ("normal", "adversarial", "meta")

SIDE_UNAVAILABLE = "(assessment unavailable)"


@dataclass(frozen=True)
class MetricSpec:
    key: str
    definition: str = ""


def default_dimension_metrics() -> dict[str, tuple[MetricSpec, ...]]:
    out: dict[str, tuple[MetricSpec, ...]] = {}
    for dimension in DIMENSIONS:
        normal = defaults.JUDGE_METRIC_DEFINITIONS[(dimension, "normal")]
        out[dimension] = tuple(MetricSpec(key, definition) for key, definition in normal)
    return out


@dataclass(frozen=True)
class CriticsConfig:
    dimensions: Mapping[str, tuple[MetricSpec, ...]] = field(
        default_factory=default_dimension_metrics
    )

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "dimensions", {d: tuple(m) for d, m in self.dimensions.items()}
        )
        if not self.dimensions:
            raise ValueError("at least one critique dimension is required")
        for dimension, metrics in self.dimensions.items():
            if not metrics:
                raise ValueError(f"dimension {dimension!r} has no metrics")

    def metric_keys(self, dimension: str) -> tuple[str, ...]:
        return tuple(m.key for m in self.dimensions[dimension])


@dataclass(frozen=True)
class MetricJudgment:
    score: Optional[float]
    justification: str
    synthetic: bool = False

    def to_dict(self) -> dict:
        return {
            "score": self.score,
            "justification": self.justification,
            "synthetic": self.synthetic,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "MetricJudgment":
        return cls(
            score=data.get("score"),
            justification=data.get("justification", ""),
            synthetic=data.get("synthetic", False),
        )


@dataclass(frozen=True)
class JudgeOutput:
    dimension: str
    stance: str
    per_metric: Mapping[str, MetricJudgment]
    degraded: bool = False
    raw_text: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "per_metric", dict(self.per_metric))
        if self.stance not in STANCES:
            raise ValueError(f"stance must be one of {STANCES}")

    def available(self) -> bool:
        return not self.degraded

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "stance": self.stance,
            "per_metric": {k: j.to_dict() for k, j in self.per_metric.items()},
            "degraded": self.degraded,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "JudgeOutput":
        return cls(
            dimension=data["dimension"],
            stance=data["stance"],
            per_metric={
                k: MetricJudgment.from_dict(j) for k, j in data["per_metric"].items()
            },
            degraded=data.get("degraded", False),
        )


@dataclass(frozen=True)
class DimensionCritique:
    normal: JudgeOutput
    adversarial: JudgeOutput
    meta: JudgeOutput

    def to_dict(self) -> dict:
        return {
            "normal": self.normal.to_dict(),
            "adversarial": self.adversarial.to_dict(),
            "meta": self.meta.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "DimensionCritique":
        return cls(
            normal=JudgeOutput.from_dict(data["normal"]),
            adversarial=JudgeOutput.from_dict(data["adversarial"]),
            meta=JudgeOutput.from_dict(data["meta"]),
        )


@dataclass(frozen=True)
class CritiqueReport:
    """Consolidated critiques: exactly one meta entry per configured
    dimension, with both sides retained for audit."""

    dimensions: Mapping[str, DimensionCritique]

    def __post_init__(self) -> None:
        object.__setattr__(self, "dimensions", dict(self.dimensions))
        if not self.dimensions:
            raise ValueError("a critique report needs at least one dimension")

    def meta_scores(self) -> list[tuple[str, str, Optional[float]]]:
        rows = []
        for dimension, critique in self.dimensions.items():
            for key, judgment in critique.meta.per_metric.items():
                rows.append((dimension, key, judgment.score))
        return rows

    def to_dict(self) -> dict:
        return {d: c.to_dict() for d, c in self.dimensions.items()}

    @classmethod
    def from_dict(cls, data: Mapping) -> "CritiqueReport":
        return cls(dimensions={d: DimensionCritique.from_dict(c) for d, c in data.items()})


def _judge_validator(keys: Sequence[str]):
    def check(parsed: object) -> None:
        if not isinstance(parsed, dict):
            raise ValueError("judge output must be a JSON object")
        for key in keys:
            entry = parsed.get(key)
            if not isinstance(entry, dict):
                raise ValueError(f"missing metric {key!r}")
            score = _coerce_score(entry.get("score"))
            if score is None:
                raise ValueError(f"metric {key!r} score is not a number")
            if not 1 <= score <= 10:
                # Out-of-range scores are parse failures, not clamped values.
                raise ValueError(f"metric {key!r} score {score} outside 1-10")

    return check


def _meta_validator(keys: Sequence[str]):
    def check(parsed: object) -> None:
        if not isinstance(parsed, dict):
            raise ValueError("meta output must be a JSON object")
        step2 = parsed.get("Step 2")
        if not isinstance(step2, dict):
            raise ValueError("missing 'Step 2' object")
        for key in keys:
            if key not in step2:
                raise ValueError(f"missing metric {key!r} in Step 2")
        for key in keys:
            entry = step2[key]
            if isinstance(entry, dict) and entry.get("score") is not None:
                score = _coerce_score(entry["score"])
                if score is not None and not 1 <= score <= 10:
                    raise ValueError(f"meta score for {key!r} outside 1-10")

    return check


def _coerce_score(value: object) -> Optional[float]:
    if isinstance(value, bool):
        return None
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(value.strip())
        except ValueError:
            return None
    return None


class CriticPanel:
    def __init__(self, gateway: Gateway, config: CriticsConfig, max_workers: int = 1):
        self.gateway = gateway
        self.config = config
        self.max_workers = max_workers

    # -- side judges -------------------------------------------------------

    def judge(self, dimension: str, stance: str, user: UserPrompt,
              champion: Candidate) -> JudgeOutput:
        if stance not in ("normal", "adversarial"):
            raise ValueError("side judges are 'normal' or 'adversarial'")
        metrics = self.config.dimensions[dimension]
        keys = [m.key for m in metrics]
        request = ModelRequest(
            template_name=f"{dimension}_{stance}_judge",
            bindings={
                "input_prompt": user.text,
                "scene_prompt": champion.prompt.text,
                "metrics_block": defaults.metrics_block(
                    [(m.key, m.definition) for m in metrics]
                ),
            },
            attachments=(champion.video,),
            expected_format=STRUCTURED_BLOCK,
        )
        try:
            response = self.gateway.complete(request, validator=_judge_validator(keys))
        except MalformedResponse as exc:
            logger.warning("%s %s judge degraded: %s", dimension, stance, exc)
            per_metric = {
                key: MetricJudgment(score=None, justification="", synthetic=False)
                for key in keys
            }
            return JudgeOutput(dimension, stance, per_metric, degraded=True)
        per_metric = {}
        for key in keys:
            entry = response.parsed[key]
            per_metric[key] = MetricJudgment(
                score=_coerce_score(entry.get("score")),
                justification=str(entry.get("justification", "")),
            )
        return JudgeOutput(dimension, stance, per_metric, raw_text=response.text)

    # -- meta judge ------------------------------------------------------------

    def judge_meta(self, dimension: str, user: UserPrompt, normal: JudgeOutput,
                   adversarial: JudgeOutput) -> JudgeOutput:
        if not normal.available() and not adversarial.available():
            raise ValueError("meta judging needs at least one available side")
        keys = list(self.config.metric_keys(dimension))
        request = ModelRequest(
            template_name="meta_judge",
            bindings={
                "positive_judge": normal.raw_text if normal.available() else SIDE_UNAVAILABLE,
                "negative_judge": (
                    adversarial.raw_text if adversarial.available() else SIDE_UNAVAILABLE
                ),
                "metric_keys": ", ".join(keys),
            },
            expected_format=STRUCTURED_BLOCK,
        )
        try:
            response = self.gateway.complete(request, validator=_meta_validator(keys))
        except MalformedResponse as exc:
            logger.warning("%s meta judge degraded, synthesizing side means: %s", dimension, exc)
            per_metric = {
                key: self._synthetic_judgment(key, normal, adversarial) for key in keys
            }
            return JudgeOutput(dimension, "meta", per_metric, degraded=True)
        step2 = response.parsed["Step 2"]
        per_metric = {}
        for key in keys:
            entry = step2[key]
            judgment = ""
            score: Optional[float] = None
            if isinstance(entry, dict):
                judgment = str(entry.get("judgment", ""))
                score = _coerce_score(entry.get("score"))
            elif entry is not None:
                judgment = str(entry)
            if score is None:
                per_metric[key] = self._synthetic_judgment(
                    key, normal, adversarial, judgment=judgment
                )
            else:
                per_metric[key] = MetricJudgment(score=score, justification=judgment)
        return JudgeOutput(dimension, "meta", per_metric, raw_text=response.text)

    @staticmethod
    def _synthetic_judgment(key: str, normal: JudgeOutput, adversarial: JudgeOutput,
                            judgment: str = "") -> MetricJudgment:
        scores = []
        for side in (normal, adversarial):
            if side.available():
                entry = side.per_metric.get(key)
                if entry is not None and entry.score is not None:
                    scores.append(entry.score)
        score = sum(scores) / len(scores) if scores else None
        return MetricJudgment(
            score=score,
            justification=judgment or "(synthesized from side scores)",
            synthetic=True,
        )

    # -- full court ----------------------------------------------------------------

    def run_mmac(self, user: UserPrompt, champion: Candidate) -> CritiqueReport:
        """Run the whole court: per dimension, both side judges then the meta
        consolidation. Dimensions are independent and order-insensitive; a
        degraded judge never aborts the run."""

        def assess(dimension: str) -> tuple[str, DimensionCritique]:
            normal, adversarial = run_indexed(
                lambda stance: self.judge(dimension, stance, user, champion),
                ["normal", "adversarial"],
                self.max_workers,
            )
            if normal.available() or adversarial.available():
                meta = self.judge_meta(dimension, user, normal, adversarial)
            else:
                logger.warning("both %s side judges degraded; meta has no scores", dimension)
                meta = JudgeOutput(
                    dimension,
                    "meta",
                    {
                        key: MetricJudgment(score=None, justification="", synthetic=True)
                        for key in self.config.metric_keys(dimension)
                    },
                    degraded=True,
                )
            return dimension, DimensionCritique(normal, adversarial, meta)

        results = run_indexed(assess, list(self.config.dimensions), self.max_workers)
        return CritiqueReport(dimensions=dict(results))
