"""Content-addressed blob storage for generated videos.

Blobs live under ``<root>/blobs/<content-hash>.bin``; handles carry the
run-dir-relative uri so trajectories stay byte-identical across machines.
"""

from __future__ import annotations

import hashlib
import threading
from pathlib import Path

from ..errors import StorageFailure
from ..types import VideoHandle


def content_id(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


class VideoStore:
    def __init__(self, root: Path):
        self.root = Path(root)
        self._blob_dir = self.root / "blobs"
        self._lock = threading.Lock()

    def put(self, data: bytes, prompt_id: str, duration_seconds: float,
            backend_tag: str = "") -> VideoHandle:
        blob_id = content_id(data)
        rel_uri = f"blobs/{blob_id}.bin"
        path = self.root / rel_uri
        with self._lock:
            if not path.exists():
                try:
                    self._blob_dir.mkdir(parents=True, exist_ok=True)
                    path.write_bytes(data)
                except OSError as exc:
                    raise StorageFailure(f"cannot store blob {blob_id}: {exc}") from exc
        return VideoHandle(
            id=blob_id,
            uri=rel_uri,
            prompt_id=prompt_id,
            duration_seconds=duration_seconds,
            backend_tag=backend_tag,
        )

    def resolve_path(self, handle: VideoHandle) -> Path:
        path = Path(handle.uri)
        return path if path.is_absolute() else self.root / path

    def get_bytes(self, handle: VideoHandle) -> bytes:
        path = self.resolve_path(handle)
        try:
            return path.read_bytes()
        except OSError as exc:
            raise StorageFailure(f"cannot read blob {handle.id}: {exc}") from exc

    def has(self, handle: VideoHandle) -> bool:
        return self.resolve_path(handle).exists()

    def verify(self, handle: VideoHandle) -> bool:
        """True iff re-hashing the stored bytes reproduces the handle id."""
        return content_id(self.get_bytes(handle)) == handle.id


def handle_for_file(path: Path, prompt_id: str = "external",
                    duration_seconds: float = 0.0, backend_tag: str = "file") -> VideoHandle:
    """Build a handle for an existing video file outside any run directory."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise StorageFailure(f"cannot read video file {path}: {exc}") from exc
    return VideoHandle(
        id=content_id(data),
        uri=str(path.resolve()),
        prompt_id=prompt_id,
        duration_seconds=duration_seconds,
        backend_tag=backend_tag,
    )
