"""Proposal quality metrics: IoU, detection-rate curves, and mean average
best overlap curves over proposal budgets.

Proposals are supplied per image, ranked best first; ground truth follows
the inclusive-corner convention, so a box's area is (x1-x0+1)*(y1-y0+1).
Detection rate pools objects globally: one hit ratio over every annotated
object, not a per-image average.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .boxes import BoundingBox
from .imageio import GroundTruth
from .selector import Proposal


@dataclass(frozen=True)
class CurvePoint:
    """One point of a metric-versus-budget curve."""

    nwin: int
    value: float

    def __post_init__(self):
        if self.nwin < 1:
            raise ValueError(f"budget {self.nwin} must be positive")
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"metric value {self.value} outside [0, 1]")


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union with inclusive-corner areas; 0.0 when the
    boxes are disjoint."""
    iw = min(a.x1, b.x1) - max(a.x0, b.x0) + 1
    ih = min(a.y1, b.y1) - max(a.y0, b.y0) + 1
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def _checked_budgets(budgets: Iterable[int]) -> list[int]:
    out = sorted(set(int(m) for m in budgets))
    if not out:
        raise ValueError("no budgets given")
    if out[0] < 1:
        raise ValueError(f"budget {out[0]} must be positive")
    return out


def _best_at_budgets(overlaps: Sequence[float], budgets: Sequence[int]) -> list[float]:
    """Running best overlap after the first m proposals, for each budget m
    (budgets ascending)."""
    out = []
    best = 0.0
    pos = 0
    for m in budgets:
        stop = min(m, len(overlaps))
        while pos < stop:
            best = max(best, overlaps[pos])
            pos += 1
        out.append(best)
    return out


def detection_rate(
    proposals: Mapping[str, Sequence[Proposal]],
    gt: Sequence[GroundTruth],
    thresh: float,
    budgets: Iterable[int],
) -> list[CurvePoint]:
    """Fraction of ground-truth objects covered (IoU >= thresh) by at least
    one of their image's first m proposals, for each budget m.

    Objects pool globally across images; images missing from `proposals`
    leave their objects undetected. Budgets are deduplicated and returned
    ascending. Raises ValueError when there are no objects at all.
    """
    if not 0.0 < thresh < 1.0:
        raise ValueError(f"IoU threshold {thresh} outside (0, 1)")
    budgets = _checked_budgets(budgets)
    total = sum(len(g.objects) for g in gt)
    if total == 0:
        raise ValueError("no ground-truth objects to evaluate")
    hits = [0] * len(budgets)
    for g in gt:
        ranked = proposals.get(g.image_id, ())[: budgets[-1]]
        for _, box in g.objects:
            first_hit = None
            for rank, prop in enumerate(ranked, start=1):
                if iou(prop.box, box) >= thresh:
                    first_hit = rank
                    break
            if first_hit is None:
                continue
            for i, m in enumerate(budgets):
                if m >= first_hit:
                    hits[i] += 1
    return [CurvePoint(m, hits[i] / total) for i, m in enumerate(budgets)]


def mabo(
    proposals: Mapping[str, Sequence[Proposal]],
    gt: Sequence[GroundTruth],
    budgets: Iterable[int],
) -> list[CurvePoint]:
    """Mean average best overlap: ABO(class, m) averages each class object's
    best IoU against its image's first m proposals; MABO(m) is the
    unweighted mean over classes present in the ground truth."""
    budgets = _checked_budgets(budgets)
    class_sums: dict[str, list[float]] = {}
    class_counts: dict[str, int] = {}
    for g in gt:
        ranked = proposals.get(g.image_id, ())[: budgets[-1]]
        for label, box in g.objects:
            overlaps = [iou(prop.box, box) for prop in ranked]
            best = _best_at_budgets(overlaps, budgets)
            sums = class_sums.setdefault(label, [0.0] * len(budgets))
            for i, v in enumerate(best):
                sums[i] += v
            class_counts[label] = class_counts.get(label, 0) + 1
    if not class_counts:
        raise ValueError("no ground-truth objects to evaluate")
    points = []
    for i, m in enumerate(budgets):
        abos = [class_sums[c][i] / class_counts[c] for c in class_counts]
        points.append(CurvePoint(m, sum(abos) / len(abos)))
    return points
