"""Box trajectories over a sampled clip: IoU, re-detection scheduling, and merging.

The detector and tracker are external services (see motionkit.clients); this
module owns the geometry and the identity bookkeeping around them. The loop
is: detect once on the first sampled frame, propagate with one tracking call,
then re-detect every delta_t sampled frames and merge the fresh boxes into
the live trajectories by label + IoU.

Trajectory boxes are keyed by ORIGINAL frame index (the sampled timestamps),
not by position in the sampled sequence.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from .video import SampledSequence


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box in pixel coordinates, origin top-left."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float
    confidence: float
    label: str

    def __post_init__(self):
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValueError(
                f"degenerate box ({self.x_min},{self.y_min},{self.x_max},{self.y_max})"
            )
        if not 0 <= self.confidence <= 1:
            raise ValueError(f"confidence must be in [0,1], got {self.confidence}")

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x_min + self.x_max) / 2, (self.y_min + self.y_max) / 2)

    def to_dict(self) -> dict:
        return {
            "x_min": self.x_min,
            "y_min": self.y_min,
            "x_max": self.x_max,
            "y_max": self.y_max,
            "confidence": self.confidence,
            "label": self.label,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "BBox":
        return cls(
            x_min=float(d["x_min"]),
            y_min=float(d["y_min"]),
            x_max=float(d["x_max"]),
            y_max=float(d["y_max"]),
            confidence=float(d.get("confidence", 1.0)),
            label=str(d.get("label", "")),
        )


@dataclass(frozen=True)
class Trajectory:
    """One object's boxes across frames, keyed by original frame index."""

    object_id: int
    label: str
    boxes: dict[int, BBox]

    def __post_init__(self):
        if not self.boxes:
            raise ValueError("trajectory must contain at least one box")

    @property
    def last_index(self) -> int:
        return max(self.boxes)

    @property
    def last_box(self) -> BBox:
        return self.boxes[self.last_index]

    def box_at_or_before(self, frame_index: int) -> Optional[BBox]:
        """Most recent box no later than frame_index, or None."""
        eligible = [k for k in self.boxes if k <= frame_index]
        if not eligible:
            return None
        return self.boxes[max(eligible)]

    def with_box(self, frame_index: int, box: BBox) -> "Trajectory":
        updated = dict(self.boxes)
        updated[frame_index] = box
        return Trajectory(object_id=self.object_id, label=self.label, boxes=updated)


@dataclass(frozen=True)
class RedetectConfig:
    """Re-detection interval and the detector/merge thresholds."""

    delta_t: int = 5
    box_threshold: float = 0.25
    text_threshold: float = 0.25
    iou_merge_threshold: float = 0.8

    def __post_init__(self):
        if self.delta_t < 1:
            raise ValueError(f"delta_t must be >= 1, got {self.delta_t}")
        for name in ("box_threshold", "text_threshold", "iou_merge_threshold"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ValueError(f"{name} must be in [0,1], got {v}")


def iou(a: BBox, b: BBox) -> float:
    """Intersection area over union area; 0 when the union has zero area."""
    ix = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    iy = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    inter = max(0.0, ix) * max(0.0, iy)
    union = a.area + b.area - inter
    if union <= 0:
        return 0.0
    return inter / union


def schedule_redetections(length: int, delta_t: int) -> list[int]:
    """Sampled positions at which to re-run the detector: n*delta_t for n >= 1.

    Position 1 is not special-cased here; the initial detection happens
    unconditionally in build_tracked_set, which skips a scheduled hit at 1.
    """
    if length < 1:
        raise ValueError(f"length must be >= 1, got {length}")
    if delta_t < 1:
        raise ValueError(f"delta_t must be >= 1, got {delta_t}")
    return list(range(delta_t, length + 1, delta_t))


def merge_redetected(
    existing: Sequence[Trajectory],
    fresh: Sequence[BBox],
    frame_index: int,
    cfg: RedetectConfig,
) -> tuple[Trajectory, ...]:
    """Fold freshly detected boxes at frame_index into the live trajectories.

    A fresh box is absorbed by the trajectory whose most recent box at or
    before frame_index has the same label and IoU >= iou_merge_threshold
    (best IoU wins; ties go to the higher-confidence recent box, then the
    lower object_id), replacing any tracked box at that frame. Unmatched
    boxes each start a new trajectory. A trajectory absorbs at most one
    fresh box per call; nothing is deleted.
    """
    result = list(existing)
    claimed: set[int] = set()
    next_id = max((t.object_id for t in existing), default=0) + 1
    for box in fresh:
        candidates = []
        for pos, traj in enumerate(result):
            if traj.object_id in claimed or traj.label != box.label:
                continue
            recent = traj.box_at_or_before(frame_index)
            if recent is None:
                continue
            overlap = iou(recent, box)
            if overlap >= cfg.iou_merge_threshold:
                candidates.append((-overlap, -recent.confidence, traj.object_id, pos))
        if candidates:
            candidates.sort()
            pos = candidates[0][3]
            result[pos] = result[pos].with_box(frame_index, box)
            claimed.add(result[pos].object_id)
        else:
            result.append(
                Trajectory(object_id=next_id, label=box.label, boxes={frame_index: box})
            )
            next_id += 1
    return tuple(result)


def build_tracked_set(
    sampled: SampledSequence,
    categories: Sequence[str],
    cfg: RedetectConfig,
    detector,
    tracker,
) -> tuple[Trajectory, ...]:
    """Detect on the first sampled frame, track forward, re-detect on schedule.

    Returns one Trajectory per object, boxes keyed by original frame index.
    An empty tuple means the detector found nothing relevant on the first
    frame; the caller decides how to degrade. `detector` and `tracker` follow
    the client interfaces in motionkit.clients (detect/track methods); the
    tracker reports boxes keyed by 1-based position in the frames it was
    sent, translated back to original indices here.
    """
    if not categories:
        raise ValueError("categories must be nonempty")
    timestamps = sampled.timestamps
    initial = detector.detect(
        sampled.frames[0], list(categories), cfg.box_threshold, cfg.text_threshold
    )
    if not initial:
        return ()

    trajectories = [
        Trajectory(object_id=i, label=box.label, boxes={timestamps[0]: box})
        for i, box in enumerate(initial, start=1)
    ]
    if len(sampled) > 1:
        seeds = [(t.object_id, t.label, t.boxes[timestamps[0]]) for t in trajectories]
        tracks = tracker.track(sampled.frames, seeds)
        by_id = {t.object_id: t for t in trajectories}
        for object_id, per_position in tracks.items():
            if object_id not in by_id:
                continue  # tracker invented an id; ignore rather than trust it
            traj = by_id[object_id]
            for position, box in sorted(per_position.items()):
                if not 1 <= position <= len(timestamps):
                    raise ValueError(f"tracker returned out-of-range frame position {position}")
                if position == 1:
                    continue  # the seed frame stays with the detection
                traj = traj.with_box(timestamps[position - 1], box)
            by_id[object_id] = traj
        trajectories = [by_id[t.object_id] for t in trajectories]

    current: tuple[Trajectory, ...] = tuple(trajectories)
    for position in schedule_redetections(len(sampled), cfg.delta_t):
        if position == 1:
            continue  # already detected unconditionally
        fresh = detector.detect(
            sampled.frames[position - 1], list(categories), cfg.box_threshold, cfg.text_threshold
        )
        current = merge_redetected(current, fresh, timestamps[position - 1], cfg)
    return current
