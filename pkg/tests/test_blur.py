import math
import random
from fractions import Fraction

import numpy as np
import pytest

from helpers import make_clip, random_clip
from motionkit.blur import BlurParams, apply_motion_blur, kernel_weights
from motionkit.video import SampleSpec, sample


def fraction_weights(gamma, window):
    """Independent kernel oracle in exact rational arithmetic."""
    g = Fraction(gamma).limit_denominator(10**9)
    powers = [g**k for k in range(window)]
    total = sum(powers)
    return [p / total for p in powers]


def reference_blur(clip, sampled, gamma, window):
    """Brute-force per-pixel oracle: python loops, float math, half-up rounding."""
    weights = [float(w) for w in fraction_weights(gamma, window)]
    out = []
    for s_t in sampled.timestamps:
        expected = np.zeros_like(clip.frames[0].pixels)
        h, w, _ = expected.shape
        for y in range(h):
            for x in range(w):
                for c in range(3):
                    acc = 0.0
                    for k in range(window):
                        src = s_t - k
                        if src >= 1:
                            acc += weights[k] * float(clip.frames[src - 1].pixels[y, x, c])
                    expected[y, x, c] = min(255, max(0, math.floor(acc + 0.5)))
        out.append(expected)
    return out


def test_kernel_single_tap():
    assert kernel_weights(0.3, 1).tolist() == [1.0]


def test_kernel_hand_example():
    got = kernel_weights(0.5, 2)
    assert abs(got[0] - 2 / 3) < 1e-15
    assert abs(got[1] - 1 / 3) < 1e-15


def test_kernel_grid_against_fraction_oracle():
    for gamma in (0.1, 0.3, 0.5, 0.65, 0.9):
        for window in range(1, 17):
            got = kernel_weights(gamma, window)
            expected = fraction_weights(gamma, window)
            assert len(got) == window
            assert abs(got.sum() - 1.0) <= 1e-12
            assert all(a > b for a, b in zip(got, got[1:]))
            assert all(w > 0 for w in got)
            for g, e in zip(got, expected):
                assert abs(g - float(e)) < 1e-13


def test_kernel_rejects_bad_params():
    for gamma in (0.0, 1.0, -0.2, 1.5):
        with pytest.raises(ValueError):
            kernel_weights(gamma, 3)
    with pytest.raises(ValueError):
        kernel_weights(0.5, 0)
    with pytest.raises(ValueError):
        BlurParams(gamma=0.5, window=0)


def test_blur_window_one_is_identity():
    rng = np.random.default_rng(11)
    clip = random_clip(rng, 6)
    sampled = sample(clip, SampleSpec.fixed_count(4))
    blurred = apply_motion_blur(clip, sampled, BlurParams(gamma=0.65, window=1))
    for before, after in zip(sampled.frames, blurred.frames):
        assert np.array_equal(before.pixels, after.pixels)
    assert blurred.timestamps == sampled.timestamps


def test_blur_identical_frames_within_one():
    clip = make_clip([123] * 16)
    sampled = sample(clip, SampleSpec.fixed_count(4))
    # All sampled timestamps from index 7 on have a full window behind them.
    blurred = apply_motion_blur(clip, sampled, BlurParams(gamma=0.65, window=7))
    for t, frame in zip(blurred.timestamps, blurred.frames):
        if t >= 7:
            diff = np.abs(frame.pixels.astype(int) - 123)
            assert diff.max() <= 1


def test_blur_hand_example():
    # Second frame blends 2/3 of itself with 1/3 of the first: 80 exactly.
    clip = make_clip([40, 100])
    sampled = sample(clip, SampleSpec.fixed_count(2))
    blurred = apply_motion_blur(clip, sampled, BlurParams(gamma=0.5, window=2))
    assert int(blurred.frames[1].pixels[0, 0, 0]) == 80
    # First frame has no predecessor; the missing tap contributes black.
    assert int(blurred.frames[0].pixels[0, 0, 0]) == math.floor(40 * (2 / 3) + 0.5)


def test_blur_zero_padding_darkens_clip_start():
    clip = make_clip([255] * 8)
    sampled = sample(clip, SampleSpec.fixed_count(8))
    params = BlurParams(gamma=0.65, window=7)
    blurred = apply_motion_blur(clip, sampled, params)
    weights = kernel_weights(params.gamma, params.window)
    first = int(blurred.frames[0].pixels[0, 0, 0])
    assert first == math.floor(255 * weights[0] + 0.5)
    assert first < 255


def test_blur_matches_brute_force_oracle():
    rng = np.random.default_rng(12)
    clip = random_clip(rng, 5, width=3, height=2)
    sampled = sample(clip, SampleSpec.fixed_count(5))
    for gamma, window in [(0.5, 2), (0.65, 4), (0.9, 7)]:
        blurred = apply_motion_blur(clip, sampled, BlurParams(gamma=gamma, window=window))
        expected = reference_blur(clip, sampled, gamma, window)
        for frame, exp in zip(blurred.frames, expected):
            assert np.array_equal(frame.pixels, exp)


def test_blur_locality():
    # Changing original frame j may only affect outputs with s_t - N < j <= s_t.
    rng = np.random.default_rng(13)
    base = random_clip(rng, 10, width=4, height=3)
    spec = SampleSpec.fixed_count(5)  # timestamps 1,3,5,7,9
    params = BlurParams(gamma=0.5, window=2)
    sampled = sample(base, spec)
    reference = apply_motion_blur(base, sampled, params)

    j = 5
    frames = list(base.frames)
    altered = frames[j - 1].pixels.copy()
    altered ^= 0xFF
    from motionkit.video import Clip, Frame

    frames[j - 1] = Frame(pixels=altered, index=j)
    changed_clip = Clip(frames=tuple(frames), fps=base.fps)
    changed = apply_motion_blur(changed_clip, sample(changed_clip, spec), params)

    for t, before, after in zip(reference.timestamps, reference.frames, changed.frames):
        affected = t - params.window < j <= t
        assert np.array_equal(before.pixels, after.pixels) != affected


def test_blur_output_within_input_range():
    rng = np.random.default_rng(14)
    clip = random_clip(rng, 9, width=5, height=4)
    sampled = sample(clip, SampleSpec.fixed_count(3))
    blurred = apply_motion_blur(clip, sampled, BlurParams(gamma=0.65, window=3))
    lo = min(int(f.pixels.min()) for f in clip.frames)
    hi = max(int(f.pixels.max()) for f in clip.frames)
    for t, frame in zip(blurred.timestamps, blurred.frames):
        assert frame.pixels.max() <= hi
        if t >= 3:  # no zero-padding in the window
            assert frame.pixels.min() >= lo


def test_blur_is_deterministic():
    rng = np.random.default_rng(15)
    clip = random_clip(rng, 8)
    sampled = sample(clip, SampleSpec.fixed_count(4))
    params = BlurParams()
    a = apply_motion_blur(clip, sampled, params)
    b = apply_motion_blur(clip, sampled, params)
    for fa, fb in zip(a.frames, b.frames):
        assert fa.pixels.tobytes() == fb.pixels.tobytes()
