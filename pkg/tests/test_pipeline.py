import json
from pathlib import Path

import pytest

from helpers import make_clip
from motionkit.clients import ServiceClients, make_clients
from motionkit.pipeline import (
    VIDEO_DESCRIPTIONS,
    AnswerRecord,
    PipelineConfig,
    Query,
    build_prompt,
    bundle_to_messages,
    gate_motion_type,
    parse_choice,
    question_text,
    refer_objects,
    run_pipeline,
    serialize_bundle,
)
from motionkit.trajectory import BBox
from motionkit.video import SampleSpec, load_clip, sample

FIXTURES = Path(__file__).parent / "fixtures"


class FakeMLLM:
    """Feeds back scripted replies and keeps every messages payload."""

    def __init__(self, replies):
        self.replies = list(replies)
        self.calls = []

    def chat(self, messages):
        self.calls.append(messages)
        return self.replies.pop(0)


class FakeDetector:
    def __init__(self, boxes):
        self.boxes = boxes

    def detect(self, frame, categories, box_threshold, text_threshold):
        return list(self.boxes)


class FakeTracker:
    def __init__(self, tracks):
        self.tracks = tracks

    def track(self, frames, seeds):
        return self.tracks


def clients_with(mllm, detector=None, tracker=None):
    return ServiceClients(
        detector=detector or FakeDetector([]),
        tracker=tracker or FakeTracker({}),
        mllm=mllm,
        vqascore=None,
    )


def test_query_validation():
    with pytest.raises(ValueError, match="nonempty"):
        Query(text="   ")
    with pytest.raises(ValueError, match="unknown task"):
        Query(text="q", task="dance")


def test_gate_explicit_task_skips_the_model():
    mllm = FakeMLLM([])
    assert gate_motion_type(Query(text="q", task="object-motion"), mllm) == "object"
    assert gate_motion_type(Query(text="q", task="camera-motion"), mllm) == "camera"
    assert gate_motion_type(Query(text="q", task="mixed"), mllm) == "both"
    assert mllm.calls == []


def test_gate_parses_model_keyword():
    assert gate_motion_type(Query(text="q"), FakeMLLM(["object"])) == "object"
    assert gate_motion_type(Query(text="q"), FakeMLLM(["  Camera."])) == "camera"
    # "both" outranks the other keywords when several appear.
    assert gate_motion_type(Query(text="q"), FakeMLLM(["both object and camera"])) == "both"


def test_gate_keyword_needs_word_boundary():
    # "objection" must not count as "object"; the question has no camera
    # words, so the fallback lands on object anyway.
    gate = gate_motion_type(Query(text="why is it so?"), FakeMLLM(["objection!"]))
    assert gate == "object"


def test_gate_fallback_scans_the_question():
    noise = FakeMLLM(["hard to say"])
    assert gate_motion_type(Query(text="Does the shot zoom in?"), noise) == "camera"
    assert gate_motion_type(Query(text="Is the dog running?"), FakeMLLM(["no idea"])) == "object"


def test_gate_logs_transcript():
    log = []
    gate_motion_type(Query(text="Is the dog running?"), FakeMLLM(["object"]), log)
    assert [entry["stage"] for entry in log] == ["gate"]
    assert log[0]["response"] == "object"


def sampled_pair():
    clip = make_clip([10, 20, 30, 40], width=8, height=6)
    return clip, sample(clip, SampleSpec.fixed_count(2))


def test_referral_parses_bracketed_list():
    _, sampled = sampled_pair()
    ref = refer_objects(sampled, Query(text="q"), FakeMLLM(['["person", "ball"]']))
    assert ref.categories == ("person", "ball")
    assert not ref.failed


def test_referral_accepts_bare_commas_and_dedupes():
    _, sampled = sampled_pair()
    ref = refer_objects(sampled, Query(text="q"), FakeMLLM(["hand, wheel, hand"]))
    assert ref.categories == ("hand", "wheel")


def test_referral_garbage_fails():
    _, sampled = sampled_pair()
    ref = refer_objects(sampled, Query(text="q"), FakeMLLM(["no list here"]))
    assert ref.failed
    ref = refer_objects(sampled, Query(text="q"), FakeMLLM(["[]"]))
    assert ref.failed


def test_referral_prompt_counts_frames_and_shows_them():
    _, sampled = sampled_pair()
    mllm = FakeMLLM(['["cat"]'])
    refer_objects(sampled, Query(text="What moves?"), mllm)
    content = mllm.calls[0][0]["content"]
    assert "2 frames" in content[0]["text"]
    assert "What moves?" in content[0]["text"]
    assert [item["type"] for item in content] == ["text", "image", "image"]


def test_question_text_letters_options():
    q = Query(text="Which way?", options=("left", "right"))
    assert question_text(q) == "Which way?\n\nOptions:\nA. left\nB. right"
    assert question_text(Query(text="Plain?")) == "Plain?"


def test_parse_choice():
    options = ("move left", "move right towards the door")
    assert parse_choice("A", options) == "move left"
    assert parse_choice(" (b) because...", options) == "move right towards the door"
    assert parse_choice("Z.", options) is None
    assert parse_choice("it seems to move right towards the door", options) == options[1]
    assert parse_choice("nothing matches", options) is None
    assert parse_choice("A", ()) is None


def test_stream_descriptions_are_pinned():
    assert VIDEO_DESCRIPTIONS["original"] == "Original video:\n"
    assert VIDEO_DESCRIPTIONS["spotlight"] == "Spotlight video:\n"
    assert VIDEO_DESCRIPTIONS["motion_blur"] == (
        "Original video with motion blur to more clearly determine the type of "
        "motion (such as whether the camera is moving, as one frame combines "
        "information from multiple frames. If static objects in the background "
        "appear noticeably blurry, there is a good chance that the camera is "
        "moving!):\n"
    )


def test_build_prompt_validation():
    _, sampled = sampled_pair()
    with pytest.raises(ValueError, match="at least one stream"):
        build_prompt([], "q")
    with pytest.raises(ValueError, match="unknown stream kind"):
        build_prompt([("xray", sampled.frames)], "q")


def test_bundle_to_messages_layout():
    _, sampled = sampled_pair()
    bundle = build_prompt(
        [("motion_blur", sampled.frames), ("original", sampled.frames)],
        "What happens?",
        system_preamble="Be terse.",
    )
    messages = bundle_to_messages(bundle)
    assert [m["role"] for m in messages] == ["system", "user"]
    content = messages[1]["content"]
    kinds = [item["type"] for item in content]
    assert kinds == ["text", "image", "image", "text", "image", "image", "text"]
    assert content[0]["text"] == VIDEO_DESCRIPTIONS["motion_blur"]
    assert content[3]["text"] == VIDEO_DESCRIPTIONS["original"]
    assert content[-1]["text"] == "What happens?"

    plain = bundle_to_messages(build_prompt([("original", sampled.frames)], "q"))
    assert [m["role"] for m in plain] == ["user"]


def test_serialize_bundle_digests_frames():
    _, sampled = sampled_pair()
    bundle = build_prompt([("original", sampled.frames)], "q", gate="object")
    d = serialize_bundle(bundle)
    assert d["gate"] == "object"
    assert len(d["streams"][0]["frames"]) == 2
    assert all(len(h) == 64 for h in d["streams"][0]["frames"])
    assert d == serialize_bundle(bundle)


def run_on_tiny_clip(replies, detector=None, tracker=None, task="auto", options=()):
    clip = make_clip([10, 30, 50, 70, 90, 110], width=10, height=8)
    clients = clients_with(FakeMLLM(list(replies)), detector, tracker)
    query = Query(text="What does the box do?", options=tuple(options), task=task)
    return run_pipeline(clip, query, clients, PipelineConfig(frame_count=4))


def test_object_path_referral_failure_degrades_to_originals():
    record = run_on_tiny_clip(["object", "cannot tell", "it wiggles"])
    assert record.gate == "object"
    assert record.object_fallback == "referral-failed"
    assert record.categories == ()
    assert [s["kind"] for s in record.bundles[0]["streams"]] == ["original"]
    assert record.r_obj == "it wiggles"


def test_object_path_no_detection_degrades_to_originals():
    record = run_on_tiny_clip(["object", '["box"]', "it slides"], detector=FakeDetector([]))
    assert record.object_fallback == "no-relevant-object"
    assert record.categories == ("box",)
    assert [s["kind"] for s in record.bundles[0]["streams"]] == ["original"]


def tracked_fakes():
    box = BBox(x_min=1, y_min=1, x_max=5, y_max=5, confidence=0.9, label="box")
    detector = FakeDetector([box])
    tracker = FakeTracker({1: {pos: box for pos in range(1, 5)}})
    return detector, tracker


def test_object_path_success_spotlights():
    detector, tracker = tracked_fakes()
    record = run_on_tiny_clip(["object", '["box"]', "it sits"], detector, tracker)
    assert record.object_fallback is None
    kinds = [s["kind"] for s in record.bundles[0]["streams"]]
    assert kinds == ["spotlight", "original"]
    assert [t["stage"] for t in record.transcripts] == ["gate", "refer", "object-answer"]


def test_camera_path_skips_object_machinery():
    record = run_on_tiny_clip(["camera", "it pans left"])
    assert record.gate == "camera"
    assert record.r_obj is None
    assert not record.used_r_obj
    kinds = [s["kind"] for s in record.bundles[0]["streams"]]
    assert kinds == ["motion_blur", "original"]
    assert [t["stage"] for t in record.transcripts] == ["gate", "camera-answer"]


def test_both_gate_transcript_and_linkage():
    detector, tracker = tracked_fakes()
    clip = make_clip([10, 30, 50, 70], width=10, height=8)
    mllm = FakeMLLM(['["box"]', "the box drifts right", "the camera stays put"])
    clients = clients_with(mllm, detector, tracker)
    record = run_pipeline(
        clip, Query(text="Describe all motion.", task="mixed"), clients,
        PipelineConfig(frame_count=4),
    )
    assert record.gate == "both"
    assert record.r_obj == "the box drifts right"
    assert record.r_cam == "the camera stays put"
    assert record.used_r_obj
    assert [t["stage"] for t in record.transcripts] == ["refer", "object-answer", "camera-answer"]
    camera_question = mllm.calls[-1][0]["content"][-1]["text"]
    assert camera_question.endswith(
        "Describe all motion.\n\nContext from the object-motion analysis:\nthe box drifts right"
    )
    assert [s["stage"] for s in record.bundles] == ["object-answer", "camera-answer"]


def test_multiple_choice_selection_prefers_object_answer():
    detector, tracker = tracked_fakes()
    record = run_on_tiny_clip(
        ['["box"]', "B", "A"],
        detector,
        tracker,
        task="mixed",
        options=("slides", "spins"),
    )
    assert record.selected_option == "spins"


def test_transcripts_redact_images():
    detector, tracker = tracked_fakes()
    record = run_on_tiny_clip(["object", '["box"]', "it sits"], detector, tracker)
    for transcript in record.transcripts:
        for message in transcript["messages"]:
            for item in message["content"]:
                if item["type"] == "image":
                    assert set(item) == {"type", "sha256"}


def test_frame_count_caps_at_clip_length():
    clip = make_clip([10, 20], width=8, height=6)
    clients = clients_with(FakeMLLM(["camera", "pans"]))
    record = run_pipeline(clip, Query(text="q"), clients, PipelineConfig(frame_count=16))
    assert len(record.bundles[0]["streams"][0]["frames"]) == 2


def golden_run(name, question):
    clip = load_clip(FIXTURES / "clips" / name, fps=30.0)
    clients = make_clients(replay_dir=FIXTURES / "replay" / name)
    return run_pipeline(clip, Query(text=question), clients, PipelineConfig(frame_count=8))


def golden_text(name):
    return (FIXTURES / "golden" / f"{name}_answer.json").read_text(encoding="utf-8")


def test_cat_fixture_replays_to_golden():
    record = golden_run("cat", "What is the cat doing?")
    got = json.dumps(record.to_dict(), indent=2, ensure_ascii=False) + "\n"
    assert got == golden_text("cat")


def test_pan_fixture_replays_to_golden():
    record = golden_run("pan", "How does the camera move in this shot?")
    got = json.dumps(record.to_dict(), indent=2, ensure_ascii=False) + "\n"
    assert got == golden_text("pan")


def test_cat_fixture_exercises_redetection():
    # The recorded transcript holds two detector calls: the initial seed and
    # one mid-clip redetection that merges back into the same trajectory.
    lines = (FIXTURES / "replay" / "cat" / "detector.jsonl").read_text().splitlines()
    assert len(lines) == 2
    record = golden_run("cat", "What is the cat doing?")
    assert record.categories == ("cat",)
    assert record.object_fallback is None
