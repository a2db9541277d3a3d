"""Seeded, labelled random streams.

All randomness in the engine flows through :class:`SeededRng`. A stream is
fully determined by ``(seed, stream_label)``, so any subsystem can be replayed
in isolation by re-deriving its stream; distinct labels give independent
streams. Instances are single-owner and must not be shared across threads.
"""

from __future__ import annotations

import hashlib
import random
from typing import Sequence, TypeVar

T = TypeVar("T")


def _derive(seed: int, stream_label: str) -> int:
    digest = hashlib.sha256(f"{seed}\x00{stream_label}".encode("utf-8")).digest()
    return int.from_bytes(digest, "big")


class SeededRng:
    """Deterministic random stream keyed by a 64-bit seed and a label."""

    def __init__(self, seed: int, stream_label: str = "root"):
        self.seed = int(seed)
        self.stream_label = stream_label
        self._random = random.Random(_derive(self.seed, stream_label))

    def substream(self, label: str) -> "SeededRng":
        """Derive an independent child stream; does not consume this stream."""
        return SeededRng(self.seed, f"{self.stream_label}/{label}")

    def random(self) -> float:
        return self._random.random()

    def randrange(self, n: int) -> int:
        return self._random.randrange(n)

    def choice(self, seq: Sequence[T]) -> T:
        return seq[self._random.randrange(len(seq))]

    def __repr__(self) -> str:  # pragma: no cover
        return f"SeededRng(seed={self.seed}, stream_label={self.stream_label!r})"
