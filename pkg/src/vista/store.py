"""On-disk run layout: manifest, append-only trajectory, transcript, blobs.

The trajectory file is line-delimited JSON with a leading schema-version
record and a per-record integrity digest. Writes append and flush record by
record, so a crash loses at most the trailing partial line, which the loader
detects and discards; a complete record with a bad digest means tampering and
raises CorruptTrajectory. Record content carries no volatile fields, which is
what makes equal runs byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from pathlib import Path
from typing import Iterator, Optional

from .errors import CorruptTrajectory, StorageFailure
from .gateway.videostore import VideoStore

logger = logging.getLogger(__name__)

TRAJECTORY_SCHEMA = "vista-trajectory"
TRAJECTORY_VERSION = 1

MANIFEST_NAME = "manifest.json"
TRAJECTORY_NAME = "trajectory.jsonl"
TRANSCRIPT_NAME = "transcript.jsonl"
LOCK_NAME = ".lock"

RUN_STATUSES = ("running", "completed", "failed", "stopped-early")


def _dump(record: dict) -> str:
    return json.dumps(record, ensure_ascii=False, separators=(",", ":"))


def _digest(serialized: str) -> str:
    return hashlib.sha256(serialized.encode("utf-8")).hexdigest()[:16]


class RunStore:
    """One run directory; a single writer is enforced via a pid lock file."""

    def __init__(self, run_dir: Path):
        self.run_dir = Path(run_dir)
        self.manifest_path = self.run_dir / MANIFEST_NAME
        self.trajectory_path = self.run_dir / TRAJECTORY_NAME
        self.transcript_path = self.run_dir / TRANSCRIPT_NAME
        self.video_store = VideoStore(self.run_dir)

    def create(self) -> "RunStore":
        try:
            self.run_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise StorageFailure(f"cannot create run dir {self.run_dir}: {exc}") from exc
        return self

    def exists(self) -> bool:
        return self.manifest_path.is_file()

    # -- writer lock --------------------------------------------------------

    @property
    def lock_path(self) -> Path:
        return self.run_dir / LOCK_NAME

    def acquire_lock(self) -> None:
        self.run_dir.mkdir(parents=True, exist_ok=True)
        while True:
            try:
                fd = os.open(self.lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
            except FileExistsError:
                holder = self._lock_holder()
                if holder is not None and _pid_alive(holder):
                    raise StorageFailure(
                        f"run dir {self.run_dir} is locked by pid {holder}"
                    )
                logger.warning("removing stale lock in %s", self.run_dir)
                try:
                    self.lock_path.unlink()
                except FileNotFoundError:
                    pass
                continue
            with os.fdopen(fd, "w") as fh:
                fh.write(str(os.getpid()))
            return

    def release_lock(self) -> None:
        try:
            self.lock_path.unlink()
        except FileNotFoundError:
            pass

    def _lock_holder(self) -> Optional[int]:
        try:
            return int(self.lock_path.read_text().strip())
        except (OSError, ValueError):
            return None

    # -- manifest --------------------------------------------------------------

    def write_manifest(self, manifest: dict) -> None:
        try:
            self.manifest_path.write_text(
                json.dumps(manifest, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
            )
        except OSError as exc:
            raise StorageFailure(f"cannot write manifest: {exc}") from exc

    def read_manifest(self) -> dict:
        try:
            return json.loads(self.manifest_path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise StorageFailure(f"cannot read manifest in {self.run_dir}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise StorageFailure(f"manifest in {self.run_dir} is not valid JSON: {exc}") from exc

    def set_status(self, status: str, champion: Optional[dict] = None) -> None:
        if status not in RUN_STATUSES:
            raise ValueError(f"status must be one of {RUN_STATUSES}")
        manifest = self.read_manifest()
        manifest["status"] = status
        manifest["updated_at"] = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
        if champion is not None:
            manifest["champion"] = champion
        self.write_manifest(manifest)

    # -- trajectory -----------------------------------------------------------

    def append_trajectory_record(self, record: dict) -> None:
        serialized = _dump(record)
        line = _dump({**record, "record_digest": _digest(serialized)})
        try:
            with self.trajectory_path.open("a", encoding="utf-8") as fh:
                fh.write(line + "\n")
                fh.flush()
        except OSError as exc:
            raise StorageFailure(f"cannot append trajectory record: {exc}") from exc

    def write_trajectory_header(self, run_id: str, seed: int, user_prompt: dict) -> None:
        self.append_trajectory_record(
            {
                "kind": "header",
                "schema": TRAJECTORY_SCHEMA,
                "version": TRAJECTORY_VERSION,
                "run_id": run_id,
                "seed": seed,
                "user_prompt": user_prompt,
            }
        )

    def load_trajectory_records(self) -> list[dict]:
        """All complete, integrity-checked records; a truncated final line is
        discarded with a warning."""
        if not self.trajectory_path.exists():
            return []
        try:
            raw = self.trajectory_path.read_text(encoding="utf-8")
        except OSError as exc:
            raise StorageFailure(f"cannot read trajectory: {exc}") from exc
        lines = raw.split("\n")
        trailing = lines.pop()
        if trailing:
            logger.warning("discarding truncated final trajectory record in %s", self.run_dir)
        records: list[dict] = []
        for lineno, line in enumerate(lines, start=1):
            if not line:
                continue
            try:
                record = json.loads(line)
                stored = record.pop("record_digest")
            except (json.JSONDecodeError, KeyError) as exc:
                raise CorruptTrajectory(
                    f"{self.trajectory_path}: bad record at line {lineno}: {exc}"
                ) from exc
            if _digest(_dump(record)) != stored:
                raise CorruptTrajectory(
                    f"{self.trajectory_path}: digest mismatch at line {lineno}"
                )
            records.append(record)
        return records

    def iter_iteration_records(self) -> Iterator[dict]:
        for record in self.load_trajectory_records():
            if record.get("kind") == "iteration":
                yield record


def _pid_alive(pid: int) -> bool:
    try:
        os.kill(pid, 0)
    except ProcessLookupError:
        return False
    except PermissionError:
        return True
    return True
