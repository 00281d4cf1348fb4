"""Synthetic motion blur over a sampled frame sequence.

Each sampled frame is replaced by a weighted average of itself and the
N-1 frames immediately before it in the *original* video, using a
normalized geometric kernel. Frames that would fall before the start of
the video contribute zeros; the kernel is not renormalized, so early
frames darken. Accumulation is float64 and rounding is half-up, which
keeps the output bit-identical across runs and thread counts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .video import Clip, Frame, SampledSequence


@dataclass(frozen=True)
class BlurParams:
    """Geometric kernel decay gamma in (0, 1) and window size N >= 1."""

    gamma: float = 0.65
    window: int = 7

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise ValueError(f"gamma must be in (0, 1), got {self.gamma}")
        if self.window < 1:
            raise ValueError(f"window must be >= 1, got {self.window}")


@dataclass(frozen=True)
class BlurredSequence:
    """Blurred frames, aligned one-to-one with the input timestamps."""

    timestamps: tuple[int, ...]
    frames: tuple[Frame, ...]
    params: BlurParams

    def __post_init__(self):
        if len(self.timestamps) != len(self.frames):
            raise ValueError("timestamps and frames must have equal length")


def kernel_weights(gamma: float, window: int) -> np.ndarray:
    """Normalized geometric weights w_k = gamma**k / sum(gamma**i), k = 0..window-1.

    Strictly decreasing, all positive, sums to 1 within float64 error.
    """
    if not 0 < gamma < 1:
        raise ValueError(f"gamma must be in (0, 1), got {gamma}")
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    powers = np.power(np.float64(gamma), np.arange(window, dtype=np.float64))
    return powers / powers.sum()


def apply_motion_blur(clip: Clip, sampled: SampledSequence, params: BlurParams) -> BlurredSequence:
    """Blur each sampled frame with its predecessors from the original clip.

    For a sampled timestamp s_t the output pixel is
    round(sum_k w_k * pixel(frame[s_t - k])) with k = 0..N-1 in original
    frame indices; s_t - k < 1 contributes zeros. Rounding is half-up and
    the result is clipped to [0, 255].
    """
    weights = kernel_weights(params.gamma, params.window)
    out_frames: list[Frame] = []
    for pos, s_t in enumerate(sampled.timestamps):
        acc = np.zeros(
            (clip.height, clip.width, 3), dtype=np.float64
        )
        for k, w_k in enumerate(weights):
            src = s_t - k
            if src < 1:
                break  # earlier taps are also out of range; zeros contribute nothing
            acc += w_k * clip.frames[src - 1].pixels
        rounded = np.floor(acc + 0.5)  # half-up, unlike numpy's banker's rounding
        pixels = np.clip(rounded, 0, 255).astype(np.uint8)
        out_frames.append(Frame(pixels=pixels, index=sampled.frames[pos].index))
    return BlurredSequence(
        timestamps=sampled.timestamps, frames=tuple(out_frames), params=params
    )
