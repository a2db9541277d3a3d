"""Replay backend: answers every call from a recorded transcript."""

from __future__ import annotations

import base64
import json

from ..errors import GenerationRejected, ReplayMiss
from .base import Backend, RawCompletion, T2V_TEMPLATE, fingerprint_request, fingerprint_t2v
from .transcript import Transcript


class ReplayBackend(Backend):
    name = "replay"

    def __init__(self, transcript: Transcript):
        self.source = transcript

    def complete_once(self, request, rendered, get_attachment_bytes) -> RawCompletion:
        fingerprint = fingerprint_request(request)
        record = self.source.lookup(fingerprint)
        if record is None:
            raise ReplayMiss(fingerprint, request.template_name)
        return RawCompletion(
            text=record.response_text,
            token_in=record.token_in,
            token_out=record.token_out,
        )

    def generate_video_bytes(self, prompt_text, duration_seconds, sample_index) -> tuple[bytes, str]:
        fingerprint = fingerprint_t2v(prompt_text, duration_seconds, sample_index)
        record = self.source.lookup(fingerprint)
        if record is None:
            raise ReplayMiss(fingerprint, T2V_TEMPLATE)
        payload = json.loads(record.response_text)
        if payload.get("status") == "rejected":
            raise GenerationRejected("", reason=payload.get("reason", ""))
        return base64.b64decode(payload["b64"]), payload.get("backend", self.name)
