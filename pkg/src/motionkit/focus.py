"""Focus-region smoothing and the visual spotlight.

Turns tracked trajectories into one stabilized region per sampled frame
(variance-adaptive window over per-frame box unions), then darkens
everything outside that region. A region of None is the full-frame
sentinel: the frame passes through untouched.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .trajectory import Trajectory
from .video import Frame, SampledSequence

# Region value meaning "leave the whole frame lit".
FULL_FRAME = None


@dataclass(frozen=True)
class Rect:
    """Axis-aligned region in pixel coordinates (no label/confidence)."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValueError(
                f"degenerate rect ({self.x_min},{self.y_min},{self.x_max},{self.y_max})"
            )

    def union(self, other: "Rect") -> "Rect":
        return Rect(
            min(self.x_min, other.x_min),
            min(self.y_min, other.y_min),
            max(self.x_max, other.x_max),
            max(self.y_max, other.y_max),
        )

    def clamped(self, width: int, height: int) -> "Rect":
        return Rect(
            min(max(self.x_min, 0.0), width),
            min(max(self.y_min, 0.0), height),
            min(max(self.x_max, 0.0), width),
            min(max(self.y_max, 0.0), height),
        )

    def to_dict(self) -> dict:
        return {"x_min": self.x_min, "y_min": self.y_min, "x_max": self.x_max, "y_max": self.y_max}


@dataclass(frozen=True)
class AggregatorConfig:
    """Window selection and darkening parameters for the focus stage.

    long_window=None means "the whole clip": every frame's window covers all
    sampled positions, which is what low-variance (near-static) clips want.
    """

    variance_threshold: float = 0.05  # fraction of min(frame width, height)
    long_window: Optional[int] = None
    short_window: int = 3
    beta: float = 0.9

    def __post_init__(self):
        if not 0 <= self.beta <= 1:
            raise ValueError(f"beta must be in [0,1], got {self.beta}")
        if self.variance_threshold < 0:
            raise ValueError(f"variance_threshold must be >= 0, got {self.variance_threshold}")
        if self.short_window < 1 or self.short_window % 2 == 0:
            raise ValueError(f"short_window must be odd and >= 1, got {self.short_window}")
        if self.long_window is not None and self.long_window < self.short_window:
            raise ValueError(
                f"long_window {self.long_window} must be >= short_window {self.short_window}"
            )


@dataclass(frozen=True)
class FrameUnionSequence:
    """Per sampled position (1..length), the union box of that frame, if any."""

    length: int
    unions: dict[int, Rect]

    def __post_init__(self):
        if self.length < 1:
            raise ValueError(f"length must be >= 1, got {self.length}")
        for pos in self.unions:
            if not 1 <= pos <= self.length:
                raise ValueError(f"union position {pos} outside 1..{self.length}")


@dataclass(frozen=True)
class FocusRegionSequence:
    """One region per sampled position; None entries mean full frame."""

    regions: tuple[Optional[Rect], ...]

    def __len__(self) -> int:
        return len(self.regions)


def positional_variance(traj: Trajectory) -> float:
    """Mean Manhattan distance between box centers at consecutive frames.

    Frames are taken in index order; a single-box trajectory scores 0.
    """
    indices = sorted(traj.boxes)
    if len(indices) < 2:
        return 0.0
    total = 0.0
    for prev, cur in zip(indices, indices[1:]):
        (px, py), (cx, cy) = traj.boxes[prev].center, traj.boxes[cur].center
        total += abs(cx - px) + abs(cy - py)
    return total / (len(indices) - 1)


def tracked_variance(trajectories: Sequence[Trajectory]) -> float:
    """Variance statistic for a whole tracked set: the worst-moving object."""
    return max((positional_variance(t) for t in trajectories), default=0.0)


def frame_union(trajectories: Sequence[Trajectory], frame_index: int) -> Optional[Rect]:
    """Smallest box enclosing every object box at frame_index, or None."""
    merged: Optional[Rect] = None
    for traj in trajectories:
        box = traj.boxes.get(frame_index)
        if box is None:
            continue
        rect = Rect(box.x_min, box.y_min, box.x_max, box.y_max)
        merged = rect if merged is None else merged.union(rect)
    return merged


def build_frame_unions(
    trajectories: Sequence[Trajectory], sampled: SampledSequence
) -> FrameUnionSequence:
    """Union boxes for each sampled position, keyed 1..T in position space."""
    unions: dict[int, Rect] = {}
    for position, original_index in enumerate(sampled.timestamps, start=1):
        u = frame_union(trajectories, original_index)
        if u is not None:
            unions[position] = u
    return FrameUnionSequence(length=len(sampled), unions=unions)


def aggregate(
    unions: FrameUnionSequence,
    variance: float,
    cfg: AggregatorConfig,
    frame_dims: tuple[int, int],
) -> FocusRegionSequence:
    """Stabilize per-frame unions into focus regions with a variance-picked window.

    Low variance (<= threshold * min(W, H)) selects the long window, high
    variance the short one. Each region is the enclosing box of the unions
    within [t - w//2, t + w//2] clipped to the clip, clamped to frame
    bounds; a window with no unions yields the full-frame sentinel.
    """
    width, height = frame_dims
    length = unions.length
    low_motion = variance <= cfg.variance_threshold * min(width, height)
    if low_motion:
        # None means whole clip: wide enough that every window covers 1..T.
        window = cfg.long_window if cfg.long_window is not None else 2 * length - 1
    else:
        window = cfg.short_window
    half = window // 2

    regions: list[Optional[Rect]] = []
    for t in range(1, length + 1):
        lo, hi = max(1, t - half), min(length, t + half)
        merged: Optional[Rect] = None
        for pos in range(lo, hi + 1):
            u = unions.unions.get(pos)
            if u is None:
                continue
            merged = u if merged is None else merged.union(u)
        regions.append(FULL_FRAME if merged is None else merged.clamped(width, height))
    return FocusRegionSequence(regions=tuple(regions))


def spotlight(
    frames: Sequence[Frame], regions: FocusRegionSequence, beta: float
) -> tuple[Frame, ...]:
    """Darken everything outside each frame's focus region by a factor (1 - beta).

    Pixels whose center falls inside the region are copied bit-exact; the
    rest become round(p * (1 - beta)) per channel, rounding half up. A
    full-frame sentinel leaves the frame as-is.
    """
    if not 0 <= beta <= 1:
        raise ValueError(f"beta must be in [0,1], got {beta}")
    if len(frames) != len(regions.regions):
        raise ValueError(f"{len(frames)} frames but {len(regions.regions)} regions")

    out: list[Frame] = []
    for frame, region in zip(frames, regions.regions):
        if region is FULL_FRAME:
            out.append(frame)
            continue
        pixels = frame.pixels
        scaled = np.floor(pixels.astype(np.float64) * (1.0 - beta) + 0.5).astype(np.uint8)
        cx = np.arange(frame.width, dtype=np.float64) + 0.5
        cy = np.arange(frame.height, dtype=np.float64) + 0.5
        inside = (
            (cy >= region.y_min) & (cy <= region.y_max)
        )[:, None] & ((cx >= region.x_min) & (cx <= region.x_max))[None, :]
        scaled[inside] = pixels[inside]
        out.append(Frame(pixels=scaled, index=frame.index))
    return tuple(out)
