"""Small factories shared across test modules."""

import numpy as np

from motionkit.video import Clip, Frame


def solid_frame(value, index=1, width=8, height=6):
    """Frame filled with one value (int) or one RGB triple."""
    pixels = np.zeros((height, width, 3), dtype=np.uint8)
    pixels[:] = value
    return Frame(pixels=pixels, index=index)


def make_clip(frame_values, fps=30.0, width=8, height=6):
    """Clip of solid frames, one per value in frame_values."""
    frames = [
        solid_frame(v, index=i, width=width, height=height)
        for i, v in enumerate(frame_values, start=1)
    ]
    return Clip(frames=tuple(frames), fps=fps)


def random_clip(rng, length, width=8, height=6, fps=30.0):
    """Clip of uniformly random frames from a seeded numpy Generator."""
    frames = [
        Frame(
            pixels=rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8),
            index=i,
        )
        for i in range(1, length + 1)
    ]
    return Clip(frames=tuple(frames), fps=fps)
