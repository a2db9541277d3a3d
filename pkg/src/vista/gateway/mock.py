"""Deterministic mock backend.

Responses are pure functions of (request fingerprint material, seed): no
state, no ordering effects, so concurrent runs and replays are bit-stable.
Each template gets a schema-valid default response; tests override behavior
per template with responder callables.

Videos carry a hidden latent quality derived from their content id; default
judges rank by it, which makes pairwise comparisons swap-consistent and
transitive.
"""

from __future__ import annotations

import hashlib
import json
import re
from typing import Callable, Mapping, Optional

from ..errors import GenerationRejected
from ..templates import default_bindings
from .base import Backend, ModelRequest, RawCompletion

Responder = Callable[[ModelRequest], Optional[str]]

_METRIC_KEY_RE = re.compile(r'"([a-z][a-z0-9_]*)":\s*\{')

REJECT_MARKER = "[reject]"


def _fence(payload: object, lead: str = "Assessment follows.") -> str:
    return f"{lead}\n\n```json\n{json.dumps(payload, ensure_ascii=False, indent=1)}\n```\n"


class MockBackend(Backend):
    name = "mock"

    def __init__(
        self,
        seed: int = 0,
        responders: Optional[Mapping[str, Responder]] = None,
        fixed_tokens: Optional[tuple[int, int]] = None,
    ):
        self.seed = int(seed)
        self.responders = dict(responders or {})
        self.fixed_tokens = fixed_tokens

    # -- deterministic derivations ----------------------------------------

    def _unit(self, *parts: object) -> float:
        joined = "\x00".join([str(self.seed), *(str(p) for p in parts)])
        digest = hashlib.sha256(joined.encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "big") / 2**64

    def _tag(self, *parts: object) -> str:
        joined = "\x00".join([str(self.seed), *(str(p) for p in parts)])
        return hashlib.sha256(joined.encode("utf-8")).hexdigest()[:8]

    def quality(self, video_id: str) -> float:
        """Latent quality in [0, 1) that default judges rank videos by."""
        return self._unit("quality", video_id)

    @staticmethod
    def _binding(request: ModelRequest, key: str, fallback: str = "") -> str:
        """Caller binding, else the registry default for the template."""
        if key in request.bindings:
            return str(request.bindings[key])
        return str(default_bindings(request.template_name).get(key, fallback))

    def _strength(self, video_id: str, criterion: str) -> float:
        return 0.8 * self.quality(video_id) + 0.2 * self._unit("crit", video_id, criterion)

    # -- Backend API -------------------------------------------------------

    def complete_once(self, request, rendered, get_attachment_bytes) -> RawCompletion:
        responder = self.responders.get(request.template_name)
        text: Optional[str] = None
        if responder is not None:
            text = responder(request)
        if text is None:
            text = self._default_response(request)
        if self.fixed_tokens is not None:
            token_in, token_out = self.fixed_tokens
        else:
            # Video attachments dominate input cost, a few thousand tokens each.
            token_in = len(rendered) // 4 + 2048 * len(request.attachments)
            token_out = len(text) // 4
        return RawCompletion(text=text, token_in=token_in, token_out=token_out)

    def generate_video_bytes(self, prompt_text, duration_seconds, sample_index) -> tuple[bytes, str]:
        if REJECT_MARKER in prompt_text:
            raise GenerationRejected("", reason="mock policy refusal")
        digest = hashlib.sha256(
            f"{self.seed}\x00video\x00{prompt_text}\x00{sample_index}".encode("utf-8")
        ).digest()
        header = f"MOCKVID d={duration_seconds} s={sample_index}\n".encode("utf-8")
        return header + digest + prompt_text[:64].encode("utf-8", errors="replace"), self.name

    # -- default per-template behavior --------------------------------------

    def _default_response(self, request: ModelRequest) -> str:
        handler = getattr(self, f"_respond_{request.template_name}", None)
        if handler is not None:
            return handler(request)
        if request.template_name.endswith("_judge") and request.template_name != "meta_judge":
            return self._respond_dimension_judge(request)
        return f"ok ({request.template_name} {self._tag(request.template_name, request.nonce)})"

    def _respond_planner(self, request: ModelRequest) -> str:
        duration = float(request.binding("duration_seconds", "8"))
        user_text = request.binding("input_prompt")
        tag = self._tag("plan", user_text, request.nonce)
        single = duration <= 8 or "single scene" in user_text.lower()
        if single:
            durations = [duration]
        else:
            first = round(duration * 0.7, 1)
            durations = [first, round(duration - first, 1)]
        scenes = []
        for i, scene_duration in enumerate(durations, start=1):
            scenes.append(
                {
                    "duration_seconds": scene_duration,
                    "scene_type": f"scene {i} of {len(durations)}",
                    "characters": f"subject drawn from: {user_text[:60]}",
                    "actions": f"primary action {i} ({tag})",
                    "dialogues": "",
                    "visual_environment": f"setting that fits the request ({tag})",
                    "camera": "steady medium shot" if i == 1 else "slow push-in",
                    "sounds": "natural ambience",
                    "moods": "engaging",
                }
            )
        return _fence(scenes, lead="Planned timeline below.")

    def _respond_probing(self, request: ModelRequest) -> str:
        keys = [k.strip() for k in self._binding(request, "probing_aspect_keys").split(",") if k.strip()]
        video_id = request.attachments[0].id if request.attachments else "none"
        body = {
            key: f"{key}: no blocking issue found; minor notes ({self._tag('probe', video_id, key)})"
            for key in keys
        }
        return _fence(body, lead="Probing critique follows.")

    def _respond_pairwise_select(self, request: ModelRequest) -> str:
        keys = [k.strip() for k in self._binding(request, "criteria_keys").split(",") if k.strip()]
        epsilon = float(self._binding(request, "comparable_epsilon", "0.05") or "0.05")
        a_id = request.attachments[0].id
        b_id = request.attachments[1].id
        criteria: dict[str, float] = {}
        for key in keys:
            sa = self._strength(a_id, key)
            sb = self._strength(b_id, key)
            criteria[key] = 0.5 if sa == sb else (1 if sa > sb else 0)
        k = max(1, len(keys))
        score_a = sum(criteria.values()) / k
        score_b = sum(1 - v for v in criteria.values()) / k
        if abs(score_a - score_b) < epsilon:
            decision = "COMPARABLE"
        else:
            decision = "A_BETTER" if score_a > score_b else "B_BETTER"
        body = {
            "Decision": decision,
            "WeightedScoreA": round(score_a, 4),
            "WeightedScoreB": round(score_b, 4),
            "Criteria": criteria,
            "Violations": {"A": [], "B": []},
        }
        return _fence(body, lead="Comparison verdict below.")

    def _respond_dimension_judge(self, request: ModelRequest) -> str:
        dimension, stance, _ = request.template_name.split("_", 2)
        keys = _METRIC_KEY_RE.findall(self._binding(request, "metrics_block"))
        video_id = request.attachments[0].id if request.attachments else "none"
        body = {}
        for key in keys:
            u = self._unit("judge", stance, dimension, video_id, key)
            if stance == "normal":
                score = 4 + int(u * 6.9999)  # 4..10
            else:
                score = 3 + int(u * 6.9999)  # 3..9
            body[key] = {
                "score": score,
                "justification": f"{stance} view of {key}: observed level {score}/10 "
                f"({self._tag('judge', video_id, key, stance)})",
            }
        return _fence(body, lead=f"{stance.capitalize()} {dimension} assessment.")

    def _respond_meta_judge(self, request: ModelRequest) -> str:
        from .base import extract_structured_block  # local import to avoid cycle at module load

        keys = [k.strip() for k in request.binding("metric_keys").split(",") if k.strip()]
        sides = []
        for binding in ("positive_judge", "negative_judge"):
            parsed = extract_structured_block(request.binding(binding))
            sides.append(parsed if isinstance(parsed, dict) else {})
        step2 = {}
        for key in keys:
            scores = []
            for side in sides:
                entry = side.get(key)
                if isinstance(entry, dict):
                    try:
                        scores.append(float(entry.get("score")))
                    except (TypeError, ValueError):
                        pass
            score = round(sum(scores) / len(scores), 1) if scores else 5.0
            step2[key] = {
                "judgment": f"consolidated view of {key}: both assessments weighed; "
                f"final level {score}/10",
                "score": score,
            }
        body = {"Step 1": "Both assessments were reviewed criterion by criterion.", "Step 2": step2}
        return _fence(body, lead="Meta judgment below.")

    def _respond_dtpa(self, request: ModelRequest) -> str:
        scene_prompt = request.binding("scene_prompt")
        tag = self._tag("dtpa", scene_prompt, request.binding("all_feedback"))
        actions = [
            f"Refine the sound design wording so the weakest audio aspect is addressed ({tag})",
            f"Tighten the visual description of the main subject to remove vagueness ({tag})",
        ]
        answers = "\n".join(
            f"{i}. Step {i} analysis: considered in depth ({tag})." for i in range(1, 7)
        )
        block = json.dumps(actions, ensure_ascii=False, indent=1)
        return (
            "### Deep-Thinking Procedure Answers:\n"
            f"{answers}\n\n"
            "### Suggested Modifications Actions (in a valid Python list of strings):\n"
            f"```python\n{block}\n```\n"
        )

    def _respond_prompt_sampler(self, request: ModelRequest) -> str:
        n = int(request.binding("num_scenes", "1"))
        scene_prompt = request.binding("scene_prompt")
        tag = self._tag("sample", scene_prompt, request.nonce)
        prompts = [
            f"{scene_prompt}\n\n[revision {i + 1}/{n} {tag}: modifications applied]"
            for i in range(n)
        ]
        return _fence(prompts, lead="Revised prompts below.")

    def _respond_evaluator(self, request: ModelRequest) -> str:
        keys = [k.strip() for k in self._binding(request, "criteria_keys").split(",") if k.strip()]
        a_id = request.attachments[0].id
        b_id = request.attachments[1].id
        body = {}
        for key in keys:
            margin = self._strength(a_id, key) - self._strength(b_id, key)
            if margin > 0.04:
                decision = "A_BETTER"
            elif margin < -0.04:
                decision = "B_BETTER"
            else:
                decision = "TIE"
            body[key] = {"Decision": decision, "Explanation": f"margin {round(margin, 3)}"}
        return _fence(body, lead="Criterion decisions below.")

    def _respond_simple_compare(self, request: ModelRequest) -> str:
        if len(request.attachments) < 2:
            return _fence({"Decision": "COMPARABLE"}, lead="Quick comparison.")
        qa = self.quality(request.attachments[0].id)
        qb = self.quality(request.attachments[1].id)
        if abs(qa - qb) < 1e-9:
            decision = "COMPARABLE"
        else:
            decision = "A_BETTER" if qa > qb else "B_BETTER"
        return _fence({"Decision": decision}, lead="Quick comparison.")
