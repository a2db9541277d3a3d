"""Backend gateway: the single choke-point for all model interactions."""

from .base import (
    FREE_TEXT,
    STRUCTURED_BLOCK,
    T2V_TEMPLATE,
    Backend,
    Gateway,
    ModelRequest,
    ModelResponse,
    RawCompletion,
    TokenUsage,
    UsageSnapshot,
    extract_structured_block,
    fingerprint_request,
    fingerprint_t2v,
)
from .live import LiveBackend
from .mock import REJECT_MARKER, MockBackend
from .replay import ReplayBackend
from .transcript import Transcript, TranscriptRecord
from .videostore import VideoStore, content_id, handle_for_file

__all__ = [
    "FREE_TEXT",
    "STRUCTURED_BLOCK",
    "T2V_TEMPLATE",
    "Backend",
    "Gateway",
    "ModelRequest",
    "ModelResponse",
    "RawCompletion",
    "TokenUsage",
    "UsageSnapshot",
    "extract_structured_block",
    "fingerprint_request",
    "fingerprint_t2v",
    "LiveBackend",
    "MockBackend",
    "REJECT_MARKER",
    "ReplayBackend",
    "Transcript",
    "TranscriptRecord",
    "VideoStore",
    "content_id",
    "handle_for_file",
]
