"""Regenerate the committed pipeline fixtures.

Builds two tiny synthetic clips, runs the full QA pipeline against scripted
stand-ins for the model services while recording transcripts, and freezes
the resulting answer records as goldens:

    tests/fixtures/clips/{cat,pan}/*.png      the frames
    tests/fixtures/replay/{cat,pan}/*.jsonl   recorded service transcripts
    tests/fixtures/golden/{name}_answer.json  expected pipeline output

The tests replay the transcripts, so they exercise the real request paths
without any service running. Rerun this script only when the wire format
or the pipeline's request sequence changes, and commit the results.
"""

import base64
import io
import json
import shutil
import sys
from pathlib import Path

import numpy as np
from PIL import Image

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from motionkit.clients import (  # noqa: E402
    DetectorClient,
    MLLMClient,
    RecordingTransport,
    ServiceClients,
    TrackerClient,
    VQAScoreClient,
    make_clients,
)
from motionkit.pipeline import PipelineConfig, Query, run_pipeline  # noqa: E402
from motionkit.video import Clip, Frame, write_frames  # noqa: E402

FIXTURES = ROOT / "tests" / "fixtures"
WIDTH, HEIGHT, LENGTH = 48, 32, 12
CAT_COLOR = (240, 190, 70)

CAT_QUESTION = "What is the cat doing?"
PAN_QUESTION = "How does the camera move in this shot?"

REPLIES = {
    "gate-object": "object",
    "gate-camera": "camera",
    "refer": '["cat"]',
    "object-answer": "The cat walks steadily from the left side of the frame to the right.",
    "camera-answer": (
        "The camera pans to the left; in the blurred frames the striped background "
        "smears as a whole, which points to camera motion rather than object motion."
    ),
}


def cat_frames():
    """A bright block (the cat) sliding right over a dim gradient."""
    frames = []
    for i in range(1, LENGTH + 1):
        pixels = np.zeros((HEIGHT, WIDTH, 3), dtype=np.uint8)
        for c in range(3):
            pixels[:, :, c] = (20 + np.arange(HEIGHT) % 30)[:, None]
        x0 = 2 * (i - 1)
        pixels[8:20, x0 : x0 + 10] = CAT_COLOR
        frames.append(Frame(pixels=pixels, index=i))
    return tuple(frames)


def pan_frames():
    """Vertical stripes drifting left, as if the camera pans right."""
    frames = []
    x = np.arange(WIDTH)
    for i in range(1, LENGTH + 1):
        stripe = (((x + 3 * (i - 1)) // 6) % 2).astype(np.uint8)
        pixels = np.zeros((HEIGHT, WIDTH, 3), dtype=np.uint8)
        pixels[:, :, 0] = 40 + 80 * stripe
        pixels[:, :, 1] = 90
        pixels[:, :, 2] = 150
        frames.append(Frame(pixels=pixels, index=i))
    return tuple(frames)


def find_bright_box(image_b64: str, label: str):
    """The scripted detector/tracker: bounding box of the R>150 region."""
    pixels = np.asarray(Image.open(io.BytesIO(base64.b64decode(image_b64))).convert("RGB"))
    ys, xs = np.nonzero(pixels[:, :, 0] > 150)
    if ys.size == 0:
        return None
    return {
        "x_min": float(xs.min()),
        "y_min": float(ys.min()),
        "x_max": float(xs.max() + 1),
        "y_max": float(ys.max() + 1),
        "confidence": 0.9,
        "label": label,
    }


class ScriptedServices:
    """Deterministic stand-in for all four services, keyed off the payloads."""

    def post(self, service: str, payload: dict) -> dict:
        if service == "detector":
            box = find_bright_box(payload["image"], payload["categories"][0])
            return {"boxes": [box] if box else []}
        if service == "tracker":
            tracks = []
            for seed in payload["seeds"]:
                boxes = {}
                for pos, image in enumerate(payload["frames"], start=1):
                    box = find_bright_box(image, seed["label"])
                    if box:
                        boxes[str(pos)] = box
                tracks.append(
                    {"object_id": seed["object_id"], "label": seed["label"], "boxes": boxes}
                )
            return {"tracks": tracks}
        if service == "mllm":
            return {"text": self._mllm_reply(payload["messages"])}
        raise AssertionError(f"unexpected service {service!r}")

    def _mllm_reply(self, messages) -> str:
        first = messages[0]["content"][0]["text"]
        if first.startswith("Decide whether"):
            return REPLIES["gate-object" if CAT_QUESTION in first else "gate-camera"]
        if first.startswith("You are shown"):
            return REPLIES["refer"]
        if first.startswith("Spotlight video:"):
            return REPLIES["object-answer"]
        return REPLIES["camera-answer"]


def generate(name: str, frames, question: str) -> None:
    clip_dir = FIXTURES / "clips" / name
    replay_dir = FIXTURES / "replay" / name
    for d in (clip_dir, replay_dir):
        shutil.rmtree(d, ignore_errors=True)

    write_frames(clip_dir, frames)
    clip = Clip(frames=frames, fps=30.0)

    transport = RecordingTransport(ScriptedServices(), replay_dir)
    clients = ServiceClients(
        detector=DetectorClient(transport),
        tracker=TrackerClient(transport),
        mllm=MLLMClient(transport),
        vqascore=VQAScoreClient(transport),
    )
    record = run_pipeline(clip, Query(text=question), clients, PipelineConfig(frame_count=8))

    golden = FIXTURES / "golden" / f"{name}_answer.json"
    golden.parent.mkdir(parents=True, exist_ok=True)
    golden.write_text(
        json.dumps(record.to_dict(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )

    # Sanity: replaying the fresh transcripts must reproduce the golden.
    replayed = run_pipeline(
        clip, Query(text=question), make_clients(replay_dir=replay_dir),
        PipelineConfig(frame_count=8),
    )
    assert replayed.to_dict() == record.to_dict(), f"{name}: replay diverged from recording"
    print(f"{name}: gate={record.gate}, {len(record.transcripts)} transcripts -> {golden}")


def main() -> None:
    generate("cat", cat_frames(), CAT_QUESTION)
    generate("pan", pan_frames(), PAN_QUESTION)


if __name__ == "__main__":
    main()
