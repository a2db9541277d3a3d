"""Single choke-point for all model interactions.

Every MLLM completion and every video generation flows through
:class:`Gateway`, which owns request fingerprinting, structured-block parsing
with one repair pass and bounded re-asks, transcript recording, token/video
accounting, and the in-flight concurrency limit. Backends implement the two
raw calls only.
"""

from __future__ import annotations

import ast
import base64
import hashlib
import json
import logging
import re
import threading
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Mapping, Optional

from ..errors import BackendUnavailable, GenerationRejected, MalformedResponse
from ..templates import render_template
from ..types import PromptText, VideoHandle
from .transcript import Transcript
from .videostore import VideoStore

logger = logging.getLogger(__name__)

FREE_TEXT = "free_text"
STRUCTURED_BLOCK = "structured_block"

# Pseudo template name under which video generations are recorded.
T2V_TEMPLATE = "__t2v__"


@dataclass(frozen=True)
class TokenUsage:
    input: int = 0
    output: int = 0

    def __post_init__(self) -> None:
        if self.input < 0 or self.output < 0:
            raise ValueError("token counts must be >= 0")


@dataclass(frozen=True)
class ModelRequest:
    """A template-addressed model call. ``nonce`` distinguishes otherwise
    identical requests (sampling variants, re-asks) in the fingerprint."""

    template_name: str
    bindings: Mapping[str, str] = field(default_factory=dict)
    attachments: tuple[VideoHandle, ...] = ()
    expected_format: str = FREE_TEXT
    nonce: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "bindings", dict(self.bindings))
        object.__setattr__(self, "attachments", tuple(self.attachments))
        if self.expected_format not in (FREE_TEXT, STRUCTURED_BLOCK):
            raise ValueError(f"bad expected_format: {self.expected_format}")

    def binding(self, key: str, default: str = "") -> str:
        return str(self.bindings.get(key, default))


@dataclass(frozen=True)
class ModelResponse:
    text: str
    parsed: Any = None
    tokens: TokenUsage = TokenUsage()


@dataclass(frozen=True)
class RawCompletion:
    text: str
    token_in: int = 0
    token_out: int = 0


def fingerprint_request(request: ModelRequest) -> str:
    """Deterministic digest of the normalized request. Attachments hash by
    content id, not bytes, so replay survives blob relocation."""
    payload = {
        "template": request.template_name,
        "bindings": {k: str(v) for k, v in sorted(request.bindings.items())},
        "attachments": [v.id for v in request.attachments],
        "format": request.expected_format,
        "nonce": request.nonce,
    }
    canonical = json.dumps(payload, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def fingerprint_t2v(prompt_text: str, duration_seconds: float, sample_index: int) -> str:
    payload = {
        "template": T2V_TEMPLATE,
        "prompt_text": prompt_text,
        "duration_seconds": str(duration_seconds),
        "nonce": f"sample{sample_index}",
    }
    canonical = json.dumps(payload, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


# --- structured block extraction ---------------------------------------------

_FENCE_RE = re.compile(r"```(?:json|python)?[ \t]*\n(.*?)```", re.DOTALL)
_TRAILING_COMMA_RE = re.compile(r",(\s*[}\]])")

_OPENERS = {"{": "}", "[": "]"}


def _try_parse(block: str) -> Any:
    block = block.strip()
    if not block or block[0] not in _OPENERS:
        return None
    try:
        return json.loads(block)
    except (json.JSONDecodeError, ValueError):
        pass
    try:
        value = ast.literal_eval(block)
    except (ValueError, SyntaxError, MemoryError, RecursionError):
        return None
    return value if isinstance(value, (dict, list)) else None


def _repair(block: str) -> str:
    """One automated repair pass: trailing-comma removal and bracket balancing."""
    repaired = _TRAILING_COMMA_RE.sub(r"\1", block.strip())
    stack: list[str] = []
    in_string = False
    escape = False
    for ch in repaired:
        if in_string:
            if escape:
                escape = False
            elif ch == "\\":
                escape = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch in _OPENERS:
            stack.append(_OPENERS[ch])
        elif ch in ("}", "]") and stack and stack[-1] == ch:
            stack.pop()
    if in_string:
        repaired += '"'
    repaired += "".join(reversed(stack))
    return repaired


def _balanced_region(text: str) -> Optional[str]:
    start = min((i for i in (text.find("{"), text.find("[")) if i >= 0), default=-1)
    if start < 0:
        return None
    depth = 0
    in_string = False
    escape = False
    for i in range(start, len(text)):
        ch = text[i]
        if in_string:
            if escape:
                escape = False
            elif ch == "\\":
                escape = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch in "{[":
            depth += 1
        elif ch in "}]":
            depth -= 1
            if depth == 0:
                return text[start : i + 1]
    return text[start:]


def extract_structured_block(text: str) -> Any:
    """First well-formed fenced block, after at most one repair pass per
    candidate; falls back to the first balanced brace region. None if nothing
    parses."""
    candidates = [m.group(1) for m in _FENCE_RE.finditer(text)]
    if not candidates:
        region = _balanced_region(text)
        if region is not None:
            candidates = [region]
    for block in candidates:
        parsed = _try_parse(block)
        if parsed is None:
            parsed = _try_parse(_repair(block))
        if parsed is not None:
            return parsed
    return None


# --- backends ----------------------------------------------------------------


class Backend(ABC):
    """Raw transport to one model provider (or a stand-in for it)."""

    name = "backend"

    @abstractmethod
    def complete_once(
        self,
        request: ModelRequest,
        rendered: str,
        get_attachment_bytes: Callable[[VideoHandle], bytes],
    ) -> RawCompletion:
        """One model call; raises BackendUnavailable on transport failure."""

    @abstractmethod
    def generate_video_bytes(self, prompt_text: str, duration_seconds: float,
                             sample_index: int) -> tuple[bytes, str]:
        """One video generation -> (bytes, backend tag); raises
        GenerationRejected or BackendUnavailable. The tag names the backend
        that originally produced the bytes, so replay preserves it."""


# --- usage accounting ---------------------------------------------------------


@dataclass(frozen=True)
class UsageSnapshot:
    calls: int = 0
    tokens_in: int = 0
    tokens_out: int = 0
    videos_generated: int = 0
    videos_rejected: int = 0
    by_template: Mapping[str, int] = field(default_factory=dict)

    def diff(self, earlier: "UsageSnapshot") -> "UsageSnapshot":
        by_template = {
            name: count - earlier.by_template.get(name, 0)
            for name, count in self.by_template.items()
            if count - earlier.by_template.get(name, 0)
        }
        return UsageSnapshot(
            calls=self.calls - earlier.calls,
            tokens_in=self.tokens_in - earlier.tokens_in,
            tokens_out=self.tokens_out - earlier.tokens_out,
            videos_generated=self.videos_generated - earlier.videos_generated,
            videos_rejected=self.videos_rejected - earlier.videos_rejected,
            by_template=by_template,
        )


class Gateway:
    """Thread-safe front door for all model calls.

    ``max_parse_retries`` bounds re-asks after unparseable or schema-invalid
    structured responses (each re-ask is a fresh call with a retry nonce);
    ``max_attempts`` bounds transport retries per call. Transcript appends are
    serialized; replay and mock backends are keyed by fingerprint so
    concurrency never changes outcomes.
    """

    def __init__(
        self,
        backend: Backend,
        video_store: VideoStore,
        *,
        transcript: Optional[Transcript] = None,
        max_parse_retries: int = 2,
        max_attempts: int = 3,
        inflight_limit: int = 8,
        retry_wait: float = 0.0,
    ):
        self.backend = backend
        self.video_store = video_store
        self.transcript = transcript if transcript is not None else Transcript()
        self._max_parse_retries = max_parse_retries
        self._max_attempts = max_attempts
        self._retry_wait = retry_wait
        self._inflight = threading.BoundedSemaphore(max(1, inflight_limit))
        self._usage_lock = threading.Lock()
        self._calls = 0
        self._tokens_in = 0
        self._tokens_out = 0
        self._videos_generated = 0
        self._videos_rejected = 0
        self._by_template: dict[str, int] = {}

    # -- accounting ------------------------------------------------------

    def usage_snapshot(self) -> UsageSnapshot:
        with self._usage_lock:
            return UsageSnapshot(
                calls=self._calls,
                tokens_in=self._tokens_in,
                tokens_out=self._tokens_out,
                videos_generated=self._videos_generated,
                videos_rejected=self._videos_rejected,
                by_template=dict(self._by_template),
            )

    def _count_call(self, template_name: str, token_in: int, token_out: int) -> None:
        with self._usage_lock:
            self._calls += 1
            self._tokens_in += token_in
            self._tokens_out += token_out
            self._by_template[template_name] = self._by_template.get(template_name, 0) + 1

    # -- completions -----------------------------------------------------

    def complete(
        self,
        request: ModelRequest,
        validator: Optional[Callable[[Any], None]] = None,
    ) -> ModelResponse:
        """Run a model call; for structured requests, parse/repair the first
        fenced block, apply the validator, and re-ask up to the configured
        count before raising MalformedResponse."""
        last_detail = "no parseable structured block"
        for attempt in range(self._max_parse_retries + 1):
            attempt_request = (
                request
                if attempt == 0
                else replace(request, nonce=f"{request.nonce}#retry{attempt}")
            )
            raw = self._call_backend(attempt_request)
            tokens = TokenUsage(raw.token_in, raw.token_out)
            if request.expected_format == FREE_TEXT:
                return ModelResponse(text=raw.text, parsed=None, tokens=tokens)
            parsed = extract_structured_block(raw.text)
            if parsed is None:
                continue
            if validator is not None:
                try:
                    validator(parsed)
                except Exception as exc:
                    last_detail = str(exc)
                    continue
            return ModelResponse(text=raw.text, parsed=parsed, tokens=tokens)
        raise MalformedResponse(request.template_name, last_detail)

    def _call_backend(self, request: ModelRequest) -> RawCompletion:
        rendered = render_template(request.template_name, request.bindings)
        fingerprint = fingerprint_request(request)
        last_error: Optional[BackendUnavailable] = None
        for attempt in range(self._max_attempts):
            try:
                with self._inflight:
                    raw = self.backend.complete_once(
                        request, rendered, self.video_store.get_bytes
                    )
            except BackendUnavailable as exc:
                last_error = exc
                if not exc.retryable:
                    break
                if attempt + 1 < self._max_attempts and self._retry_wait:
                    time.sleep(self._retry_wait * (2**attempt))
                continue
            self._count_call(request.template_name, raw.token_in, raw.token_out)
            self.transcript.append(
                fingerprint, request.template_name, raw.text, raw.token_in, raw.token_out
            )
            return raw
        raise BackendUnavailable(
            f"backend failed after {self._max_attempts} attempt(s): {last_error}",
            retryable=False,
        )

    # -- video generation --------------------------------------------------

    def generate_video(self, prompt: PromptText, duration_seconds: float,
                       sample_index: int = 0) -> VideoHandle:
        fingerprint = fingerprint_t2v(prompt.text, duration_seconds, sample_index)
        last_error: Optional[BackendUnavailable] = None
        for attempt in range(self._max_attempts):
            try:
                with self._inflight:
                    data, tag = self.backend.generate_video_bytes(
                        prompt.text, duration_seconds, sample_index
                    )
            except GenerationRejected as exc:
                rejection = json.dumps(
                    {"status": "rejected", "reason": exc.reason},
                    ensure_ascii=False, separators=(",", ":"),
                )
                self.transcript.append(fingerprint, T2V_TEMPLATE, rejection, 0, 0)
                with self._usage_lock:
                    self._videos_rejected += 1
                raise GenerationRejected(prompt.id, exc.reason) from exc
            except BackendUnavailable as exc:
                last_error = exc
                if not exc.retryable:
                    break
                if attempt + 1 < self._max_attempts and self._retry_wait:
                    time.sleep(self._retry_wait * (2**attempt))
                continue
            payload = json.dumps(
                {
                    "status": "ok",
                    "backend": tag,
                    "b64": base64.b64encode(data).decode("ascii"),
                },
                ensure_ascii=False, separators=(",", ":"),
            )
            self.transcript.append(fingerprint, T2V_TEMPLATE, payload, 0, 0)
            with self._usage_lock:
                self._videos_generated += 1
                self._by_template[T2V_TEMPLATE] = self._by_template.get(T2V_TEMPLATE, 0) + 1
            return self.video_store.put(
                data, prompt_id=prompt.id, duration_seconds=duration_seconds,
                backend_tag=tag,
            )
        raise BackendUnavailable(
            f"video backend failed after {self._max_attempts} attempt(s): {last_error}",
            retryable=False,
        )
