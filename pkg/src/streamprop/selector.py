"""Candidate selection: per-scale top-n, cross-scale score calibration,
window-to-box mapping, and global top-k through a bounded replace-root heap.

Tie handling is uniform everywhere: among equal scores the earlier arrival
wins, so results are stable under re-runs and independent of heap layout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

from .boxes import BoundingBox
from .imageio import SvmModel
from .kernel import WINDOW, Candidate
from .scaler import ScaleSpec, round_half_up_ratio


@dataclass(frozen=True)
class Proposal:
    """A final region proposal in original-image coordinates."""

    box: BoundingBox
    final_score: float
    scale_id: int

    def __post_init__(self):
        if not math.isfinite(self.final_score):
            raise ValueError(f"non-finite proposal score {self.final_score}")


class TopKHeap:
    """Bounded min-heap keeping the k largest scored items of a stream.

    Below capacity a new item sifts up from the back. At capacity an item
    strictly greater than the root replaces it and sifts down; anything
    else is discarded, which keeps the earlier arrival among equal scores.
    max_sift_depth records the deepest sift taken, bounded by ceil(log2 k).
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        # entries are (score, -seq, item); seq is unique so comparisons
        # never reach the item, and later arrivals order below earlier
        # ones at equal score, making the root the right eviction victim
        self._store: list[tuple[float, int, object]] = []
        self._seq = 0
        self.max_sift_depth = 0

    def __len__(self) -> int:
        return len(self._store)

    @property
    def root_score(self) -> float:
        if not self._store:
            raise IndexError("empty heap")
        return self._store[0][0]

    def _sift_up(self, i: int) -> None:
        store = self._store
        depth = 0
        while i > 0:
            parent = (i - 1) // 2
            if not store[i] < store[parent]:
                break
            store[i], store[parent] = store[parent], store[i]
            i = parent
            depth += 1
        self.max_sift_depth = max(self.max_sift_depth, depth)

    def _sift_down(self, i: int) -> None:
        store = self._store
        n = len(store)
        depth = 0
        while True:
            child = 2 * i + 1
            if child >= n:
                break
            right = child + 1
            if right < n and store[right] < store[child]:
                child = right
            if not store[child] < store[i]:
                break
            store[i], store[child] = store[child], store[i]
            i = child
            depth += 1
        self.max_sift_depth = max(self.max_sift_depth, depth)

    def push(self, score: float, item) -> None:
        entry = (score, -self._seq, item)
        self._seq += 1
        if len(self._store) < self.capacity:
            self._store.append(entry)
            self._sift_up(len(self._store) - 1)
        elif score > self._store[0][0]:
            self._store[0] = entry
            self._sift_down(0)

    def drain(self) -> list:
        """Stored items sorted by descending score, earlier arrival first on
        ties; the heap is left empty."""
        ordered = sorted(self._store, key=lambda e: (-e[0], -e[1]))
        self._store = []
        return [e[2] for e in ordered]


def topn_per_scale(candidates: Iterable[Candidate], n: int) -> list[Candidate]:
    """The n highest-scoring candidates (all of them when fewer arrive),
    descending score, equal scores in arrival order."""
    if n < 1:
        raise ValueError("n must be positive")
    heap = TopKHeap(n)
    for cand in candidates:
        heap.push(cand.score, cand)
    return heap.drain()


def stage2_calibrate(cand: Candidate, model: SvmModel) -> float:
    """Affine per-scale calibration v*s + t making scores comparable across
    scales; scales absent from the model get the identity (1, 0)."""
    v, t = model.calib_for(cand.scale_id)
    return v * cand.score + t


def _clamp(v: int, hi: int) -> int:
    return min(max(v, 0), hi)


def window_to_bbox(cand: Candidate, spec: ScaleSpec, orig_w: int, orig_h: int) -> BoundingBox:
    """The original-image region an 8x8 window anchored at (cand.x, cand.y)
    in the resized grid represents: corners scaled back with exact
    round-half-up arithmetic, then clamped to the image."""
    x0 = round_half_up_ratio(cand.x * orig_w, spec.target_w)
    x1 = round_half_up_ratio((cand.x + WINDOW) * orig_w, spec.target_w) - 1
    y0 = round_half_up_ratio(cand.y * orig_h, spec.target_h)
    y1 = round_half_up_ratio((cand.y + WINDOW) * orig_h, spec.target_h) - 1
    return BoundingBox(
        _clamp(x0, orig_w - 1),
        _clamp(y0, orig_h - 1),
        _clamp(x1, orig_w - 1),
        _clamp(y1, orig_h - 1),
    )


def topk_push(heap: TopKHeap, proposal: Proposal) -> None:
    """Offer one proposal to the global top-k heap."""
    heap.push(proposal.final_score, proposal)


def topk_finalize(heap: TopKHeap) -> list[Proposal]:
    """Drain the heap into the final ranking: descending calibrated score,
    equal scores ordered by arrival."""
    return heap.drain()
