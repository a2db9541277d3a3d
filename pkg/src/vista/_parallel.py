"""Deterministic fan-out helper: results come back in input order regardless
of completion order, so concurrency never perturbs downstream decisions."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def run_indexed(fn: Callable[[T], R], items: Sequence[T], max_workers: int = 1) -> list[R]:
    if max_workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(max_workers, len(items))) as pool:
        return list(pool.map(fn, items))
