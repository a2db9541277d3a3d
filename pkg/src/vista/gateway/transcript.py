"""Recorded model-call transcripts.

A transcript is a line-delimited UTF-8 file, one JSON object per line with
stable field order (fingerprint, template_name, response_text, token_in,
token_out, digest). The digest is a per-record integrity checksum; a complete
line that fails the check raises CorruptTranscript, while an incomplete final
line (no trailing newline, i.e. a crash mid-write) is discarded with a warning.
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional

from ..errors import CorruptTranscript, StorageFailure

logger = logging.getLogger(__name__)

_FIELD_ORDER = ("fingerprint", "template_name", "response_text", "token_in", "token_out")


def _record_digest(fingerprint: str, template_name: str, response_text: str,
                   token_in: int, token_out: int) -> str:
    payload = "\x1e".join(
        [fingerprint, template_name, response_text, str(token_in), str(token_out)]
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class TranscriptRecord:
    fingerprint: str
    template_name: str
    response_text: str
    token_in: int
    token_out: int

    @property
    def digest(self) -> str:
        return _record_digest(
            self.fingerprint, self.template_name, self.response_text,
            self.token_in, self.token_out,
        )

    def to_line(self) -> str:
        body = {name: getattr(self, name) for name in _FIELD_ORDER}
        body["digest"] = self.digest
        return json.dumps(body, ensure_ascii=False, separators=(",", ":"))


class Transcript:
    """Append-only store of (request fingerprint -> response) records.

    Lookups are keyed by fingerprint, not sequence, so replay is
    order-independent. Appends are serialized with an internal lock.
    """

    def __init__(self, records: Optional[list[TranscriptRecord]] = None):
        self._records: list[TranscriptRecord] = list(records or [])
        self._index: dict[str, TranscriptRecord] = {}
        for record in self._records:
            self._index.setdefault(record.fingerprint, record)
        self._lock = threading.Lock()
        self._sink_path: Optional[Path] = None

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[TranscriptRecord]:
        return iter(list(self._records))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Transcript):
            return NotImplemented
        return self._records == other._records

    def attach_sink(self, path: Path) -> None:
        """Stream every future append to the given file (created empty if new)."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        if not path.exists():
            path.touch()
        self._sink_path = path

    def append(self, fingerprint: str, template_name: str, response_text: str,
               token_in: int, token_out: int) -> TranscriptRecord:
        record = TranscriptRecord(fingerprint, template_name, response_text,
                                  token_in, token_out)
        with self._lock:
            self._records.append(record)
            self._index.setdefault(record.fingerprint, record)
            if self._sink_path is not None:
                with self._sink_path.open("a", encoding="utf-8") as fh:
                    fh.write(record.to_line() + "\n")
        return record

    def lookup(self, fingerprint: str) -> Optional[TranscriptRecord]:
        return self._index.get(fingerprint)

    def template_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for record in self._records:
            counts[record.template_name] = counts.get(record.template_name, 0) + 1
        return counts

    def save(self, path: Path) -> None:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with path.open("w", encoding="utf-8") as fh:
                for record in self._records:
                    fh.write(record.to_line() + "\n")
        except OSError as exc:
            raise StorageFailure(f"cannot write transcript {path}: {exc}") from exc

    @classmethod
    def load(cls, path: Path) -> "Transcript":
        path = Path(path)
        try:
            raw = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise StorageFailure(f"cannot read transcript {path}: {exc}") from exc
        records: list[TranscriptRecord] = []
        lines = raw.split("\n")
        trailing = lines.pop()  # text after the last newline; non-empty means truncation
        if trailing:
            logger.warning("discarding truncated final transcript record in %s", path)
        for lineno, line in enumerate(lines, start=1):
            if not line:
                continue
            try:
                body = json.loads(line)
                record = TranscriptRecord(
                    fingerprint=body["fingerprint"],
                    template_name=body["template_name"],
                    response_text=body["response_text"],
                    token_in=int(body["token_in"]),
                    token_out=int(body["token_out"]),
                )
                stored_digest = body["digest"]
            except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
                raise CorruptTranscript(f"{path}: bad record at line {lineno}: {exc}") from exc
            if record.digest != stored_digest:
                raise CorruptTranscript(f"{path}: digest mismatch at line {lineno}")
            records.append(record)
        return cls(records)
