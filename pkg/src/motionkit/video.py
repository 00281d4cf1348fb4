"""Frame/clip data model, clip loading from image directories, timestamp sampling.

A clip is an ordered list of same-sized RGB frames with 1-based indices.
Sampling reduces a clip of length L to T timestamps, either by a fixed
count or a fixed rate; both rules are floor-based so the first frame is
always selected. All types are treated as immutable after construction and
every operation here is pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

FRAME_SUFFIXES = (".png", ".ppm")


class ClipLoadError(ValueError):
    """Raised when a frame directory cannot be loaded into a clip."""


@dataclass(frozen=True)
class Frame:
    """One RGB raster frame; pixels is a (H, W, 3) uint8 array."""

    pixels: np.ndarray
    index: int  # 1-based position in the source video

    def __post_init__(self):
        p = self.pixels
        if p.ndim != 3 or p.shape[2] != 3 or p.dtype != np.uint8:
            raise ValueError(f"frame pixels must be (H, W, 3) uint8, got {p.shape} {p.dtype}")
        if p.shape[0] < 1 or p.shape[1] < 1:
            raise ValueError("frame must be at least 1x1")
        if self.index < 1:
            raise ValueError(f"frame index must be >= 1, got {self.index}")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class Clip:
    """Ordered frame sequence with consecutive 1-based indices."""

    frames: tuple[Frame, ...]
    fps: float
    source_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        if not self.frames:
            raise ValueError("clip must contain at least one frame")
        if self.fps <= 0:
            raise ValueError(f"fps must be positive, got {self.fps}")
        w, h = self.frames[0].width, self.frames[0].height
        for i, f in enumerate(self.frames, start=1):
            if (f.width, f.height) != (w, h):
                raise ValueError(
                    f"frame {i} is {f.width}x{f.height}, expected {w}x{h}"
                )
            if f.index != i:
                raise ValueError(f"frame indices must run 1..L, position {i} has index {f.index}")

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def width(self) -> int:
        return self.frames[0].width

    @property
    def height(self) -> int:
        return self.frames[0].height


@dataclass(frozen=True)
class SampleSpec:
    """Either a fixed frame count or a fixed rate in frames per second."""

    mode: str  # "count" | "rate"
    value: float

    def __post_init__(self):
        if self.mode not in ("count", "rate"):
            raise ValueError(f"unknown sample mode {self.mode!r}")
        if self.mode == "count" and (self.value < 1 or self.value != int(self.value)):
            raise ValueError(f"fixed-count sampling needs an integer count >= 1, got {self.value}")
        if self.mode == "rate" and self.value <= 0:
            raise ValueError(f"fixed-rate sampling needs a rate > 0, got {self.value}")

    @classmethod
    def fixed_count(cls, count: int) -> "SampleSpec":
        return cls("count", count)

    @classmethod
    def fixed_rate(cls, rate: float) -> "SampleSpec":
        return cls("rate", rate)


@dataclass(frozen=True)
class SampledSequence:
    """Selected original indices (strictly increasing, 1-based) plus their frames."""

    timestamps: tuple[int, ...]
    frames: tuple[Frame, ...]

    def __post_init__(self):
        object.__setattr__(self, "timestamps", tuple(self.timestamps))
        object.__setattr__(self, "frames", tuple(self.frames))
        if len(self.timestamps) != len(self.frames):
            raise ValueError("timestamps and frames must have equal length")
        if not self.timestamps:
            raise ValueError("sampled sequence must be nonempty")
        prev = 0
        for t in self.timestamps:
            if t <= prev:
                raise ValueError(f"timestamps must strictly increase, got {self.timestamps}")
            prev = t

    def __len__(self) -> int:
        return len(self.timestamps)


def load_clip(path: str | Path, fps: float) -> Clip:
    """Load a clip from a directory of PNG/PPM frames in lexicographic filename order.

    Raises ClipLoadError for a missing directory, an empty directory, an
    undecodable file, or frames of mismatched dimensions (the offending
    filename is named in the message).
    """
    root = Path(path)
    if not root.is_dir():
        raise ClipLoadError(f"no such frame directory: {root}")
    files = sorted(p for p in root.iterdir() if p.suffix.lower() in FRAME_SUFFIXES)
    if not files:
        raise ClipLoadError(f"no frames in {root}")

    frames: list[Frame] = []
    dims: tuple[int, int] | None = None
    for i, fp in enumerate(files, start=1):
        try:
            with Image.open(fp) as img:
                pixels = np.asarray(img.convert("RGB"), dtype=np.uint8)
        except (OSError, UnidentifiedImageError, ValueError) as exc:
            raise ClipLoadError(f"cannot decode frame {fp.name}: {exc}") from exc
        if dims is None:
            dims = (pixels.shape[1], pixels.shape[0])
        elif (pixels.shape[1], pixels.shape[0]) != dims:
            raise ClipLoadError(
                f"dimension mismatch in {fp.name}: "
                f"{pixels.shape[1]}x{pixels.shape[0]} != {dims[0]}x{dims[1]}"
            )
        frames.append(Frame(pixels=pixels, index=i))
    return Clip(frames=tuple(frames), fps=fps, source_id=root.name)


def sample(clip: Clip, spec: SampleSpec) -> SampledSequence:
    """Sample a clip down to a sequence of timestamps.

    Fixed count T selects s_j = (j-1)*L//T + 1 for j = 1..T (requires T <= L);
    fixed rate r selects one frame per 1/r seconds starting at index 1, with
    duplicate indices collapsed.
    """
    length = len(clip)
    if spec.mode == "count":
        count = int(spec.value)
        if count > length:
            raise ValueError(f"cannot sample {count} frames from a clip of length {length}")
        timestamps = [(j - 1) * length // count + 1 for j in range(1, count + 1)]
    else:
        timestamps = []
        j = 1
        while True:
            t = math.floor((j - 1) * clip.fps / spec.value) + 1
            if t > length:
                break
            if not timestamps or t > timestamps[-1]:
                timestamps.append(t)
            j += 1
    frames = tuple(clip.frames[t - 1] for t in timestamps)
    return SampledSequence(timestamps=tuple(timestamps), frames=frames)


def write_frames(directory: str | Path, frames, indices=None) -> list[Path]:
    """Write frames as zero-padded PNGs (`000001.png`, ...), returning the paths.

    `indices` overrides the filename numbers; by default each frame's own
    index is used.
    """
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    written = []
    for pos, frame in enumerate(frames):
        n = frame.index if indices is None else indices[pos]
        out = root / f"{n:06d}.png"
        Image.fromarray(frame.pixels, mode="RGB").save(out, format="PNG")
        written.append(out)
    return written


def manifest_dict(clip: Clip, sampled: SampledSequence) -> dict:
    """JSON-ready manifest of a sampling run (consumed by the blur CLI)."""
    return {
        "source_id": clip.source_id,
        "fps": clip.fps,
        "length": len(clip),
        "timestamps": list(sampled.timestamps),
    }


def sampled_from_manifest(clip: Clip, manifest: dict) -> SampledSequence:
    """Rebuild the sampled sequence a manifest describes against its clip."""
    timestamps = [int(t) for t in manifest["timestamps"]]
    for t in timestamps:
        if not 1 <= t <= len(clip):
            raise ValueError(f"manifest timestamp {t} outside clip of length {len(clip)}")
    return SampledSequence(
        timestamps=tuple(timestamps),
        frames=tuple(clip.frames[t - 1] for t in timestamps),
    )
