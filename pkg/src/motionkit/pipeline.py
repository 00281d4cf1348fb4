"""End-to-end question answering over a clip: gate, refer, enhance, prompt, answer.

A query is first gated to object motion, camera motion, or both. The object
path asks the MLLM which categories matter, tracks them, and spotlights the
stabilized focus region; the camera path synthesizes motion blur. Each path
assembles a multi-stream prompt (enhanced frames plus the originals) and
sends it to the MLLM. Everything the model was shown and said is kept in
the returned record, so a run against replay transcripts is reproducible
byte for byte.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from typing import Optional, Sequence

from .blur import BlurParams, apply_motion_blur
from .clients import ServiceClients
from .focus import (
    AggregatorConfig,
    aggregate,
    build_frame_unions,
    spotlight,
    tracked_variance,
)
from .trajectory import RedetectConfig, build_tracked_set
from .video import Clip, Frame, SampledSequence, SampleSpec, sample

# Per-stream routing descriptions. The wording is part of the wire contract
# with the MLLM and is matched byte for byte by the golden tests.
VIDEO_DESCRIPTIONS = {
    "original": "Original video:\n",
    "spotlight": "Spotlight video:\n",
    "motion_blur": (
        "Original video with motion blur to more clearly determine the type of "
        "motion (such as whether the camera is moving, as one frame combines "
        "information from multiple frames. If static objects in the background "
        "appear noticeably blurry, there is a good chance that the camera is "
        "moving!):\n"
    ),
}

GATE_PROMPT = (
    "Decide whether the following question asks about object motion, camera "
    "motion, or both. Reply with exactly one word: object, camera, or both.\n\n"
    "Question: {question}"
)

REFERRAL_PROMPT = (
    "You are shown {count} frames sampled from a video, followed by a question "
    "about it. List the object categories most relevant to answering the "
    "question, including object parts when the action happens at part level "
    "(a hand, a wheel). Reply with ONLY a bracketed comma-separated list of "
    'category names, like ["person", "ball"].\n\n'
    "Question: {question}"
)

CAMERA_KEYWORDS = ("camera", "pan", "zoom", "tilt", "shot")

TASK_TO_GATE = {"object-motion": "object", "camera-motion": "camera", "mixed": "both"}


@dataclass(frozen=True)
class Query:
    """A question about a clip, optionally multiple-choice."""

    text: str
    options: tuple[str, ...] = ()
    task: str = "auto"  # object-motion | camera-motion | mixed | auto

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("query text must be nonempty")
        if self.task not in ("auto", *TASK_TO_GATE):
            raise ValueError(f"unknown task {self.task!r}")
        object.__setattr__(self, "options", tuple(self.options))


@dataclass(frozen=True)
class ObjectReferral:
    """Categories the MLLM named as relevant; empty means referral failed."""

    categories: tuple[str, ...]

    @property
    def failed(self) -> bool:
        return not self.categories


@dataclass(frozen=True)
class PromptStream:
    kind: str  # original | spotlight | motion_blur
    frames: tuple[Frame, ...]
    description: str


@dataclass(frozen=True)
class PromptBundle:
    """One deterministic MLLM prompt: streams, then the question."""

    streams: tuple[PromptStream, ...]
    question: str
    system_preamble: str = ""
    gate: Optional[str] = None


@dataclass(frozen=True)
class PipelineConfig:
    frame_count: int = 16
    blur: BlurParams = BlurParams()
    redetect: RedetectConfig = RedetectConfig()
    aggregator: AggregatorConfig = AggregatorConfig()
    include_original_with_spotlight: bool = True
    system_preamble: str = ""


@dataclass(frozen=True)
class AnswerRecord:
    """Everything a pipeline run produced: answers, routing, prompts, transcripts."""

    gate: str
    r_obj: Optional[str] = None
    r_cam: Optional[str] = None
    used_r_obj: bool = False
    categories: tuple[str, ...] = ()
    object_fallback: Optional[str] = None  # referral-failed | no-relevant-object
    selected_option: Optional[str] = None
    bundles: tuple[dict, ...] = ()
    transcripts: tuple[dict, ...] = ()

    def to_dict(self) -> dict:
        return {
            "gate": self.gate,
            "r_obj": self.r_obj,
            "r_cam": self.r_cam,
            "used_r_obj": self.used_r_obj,
            "categories": list(self.categories),
            "object_fallback": self.object_fallback,
            "selected_option": self.selected_option,
            "bundles": list(self.bundles),
            "transcripts": list(self.transcripts),
        }


def _frame_digest(frame: Frame) -> str:
    return hashlib.sha256(frame.pixels.tobytes()).hexdigest()


def serialize_bundle(bundle: PromptBundle) -> dict:
    """Stable dict form of a bundle; frames appear as raw-RGB sha256 digests."""
    return {
        "gate": bundle.gate,
        "system_preamble": bundle.system_preamble,
        "streams": [
            {
                "kind": s.kind,
                "description": s.description,
                "frames": [_frame_digest(f) for f in s.frames],
            }
            for s in bundle.streams
        ],
        "question": bundle.question,
    }


def build_prompt(
    streams: Sequence[tuple[str, Sequence[Frame]]],
    question: str,
    gate: Optional[str] = None,
    system_preamble: str = "",
) -> PromptBundle:
    """Assemble (kind, frames) pairs into a PromptBundle with verbatim descriptions."""
    if not streams:
        raise ValueError("prompt needs at least one stream")
    built = []
    for kind, frames in streams:
        if kind not in VIDEO_DESCRIPTIONS:
            raise ValueError(f"unknown stream kind {kind!r}")
        built.append(
            PromptStream(kind=kind, frames=tuple(frames), description=VIDEO_DESCRIPTIONS[kind])
        )
    return PromptBundle(
        streams=tuple(built), question=question, system_preamble=system_preamble, gate=gate
    )


def bundle_to_messages(bundle: PromptBundle) -> list[dict]:
    """Wire-format chat messages: descriptions, frame images, then the question."""
    from .clients import encode_frame_png

    content: list[dict] = []
    for stream in bundle.streams:
        content.append({"type": "text", "text": stream.description})
        for frame in stream.frames:
            content.append({"type": "image", "image": encode_frame_png(frame)})
    content.append({"type": "text", "text": bundle.question})
    messages = []
    if bundle.system_preamble:
        messages.append(
            {"role": "system", "content": [{"type": "text", "text": bundle.system_preamble}]}
        )
    messages.append({"role": "user", "content": content})
    return messages


def _redact_messages(messages: list[dict]) -> list[dict]:
    """Transcript-safe copy of messages: images replaced by their digests."""
    redacted = []
    for msg in messages:
        content = []
        for item in msg["content"]:
            if item["type"] == "image":
                digest = hashlib.sha256(item["image"].encode("ascii")).hexdigest()
                content.append({"type": "image", "sha256": digest})
            else:
                content.append(dict(item))
        redacted.append({"role": msg["role"], "content": content})
    return redacted


def _chat(mllm, stage: str, messages: list[dict], log: list[dict]) -> str:
    reply = mllm.chat(messages)
    log.append({"stage": stage, "messages": _redact_messages(messages), "response": reply})
    return reply


def gate_motion_type(query: Query, mllm, log: Optional[list] = None) -> str:
    """Resolve a query to object, camera, or both.

    An explicit task on the query decides directly. Otherwise the MLLM is
    asked for a single keyword; if its reply contains none of the three, a
    keyword scan of the question text decides (camera-ish words -> camera,
    anything else -> object).
    """
    if query.task != "auto":
        return TASK_TO_GATE[query.task]
    messages = [
        {
            "role": "user",
            "content": [{"type": "text", "text": GATE_PROMPT.format(question=query.text)}],
        }
    ]
    reply = _chat(mllm, "gate", messages, log if log is not None else [])
    lowered = reply.lower()
    for keyword in ("both", "camera", "object"):
        if re.search(rf"\b{keyword}\b", lowered):
            return keyword
    question = query.text.lower()
    if any(k in question for k in CAMERA_KEYWORDS):
        return "camera"
    return "object"


def _parse_category_list(reply: str) -> tuple[str, ...]:
    start, end = reply.find("["), reply.rfind("]")
    if start != -1 and end > start:
        raw = reply[start + 1 : end].split(",")
    elif "," in reply:
        raw = reply.split(",")
    else:
        return ()
    seen: dict[str, None] = {}
    for item in raw:
        name = item.strip().strip("'\"").strip()
        if name:
            seen.setdefault(name)
    return tuple(seen)


def refer_objects(
    sampled: SampledSequence, query: Query, mllm, log: Optional[list] = None
) -> ObjectReferral:
    """Ask the MLLM which object categories matter for this question.

    The reply is expected as a bracketed list; a bare comma-separated reply
    is accepted as a fallback. Anything else (or an empty list) is a failed
    referral, which the caller turns into a full-frame prompt.
    """
    prompt = REFERRAL_PROMPT.format(count=len(sampled), question=query.text)
    content: list[dict] = [{"type": "text", "text": prompt}]
    from .clients import encode_frame_png

    for frame in sampled.frames:
        content.append({"type": "image", "image": encode_frame_png(frame)})
    messages = [{"role": "user", "content": content}]
    reply = _chat(mllm, "refer", messages, log if log is not None else [])
    return ObjectReferral(categories=_parse_category_list(reply))


def question_text(query: Query) -> str:
    """The question as shown to the MLLM, options lettered A, B, ..."""
    if not query.options:
        return query.text
    lines = [f"{chr(ord('A') + i)}. {opt}" for i, opt in enumerate(query.options)]
    return query.text + "\n\nOptions:\n" + "\n".join(lines)


def parse_choice(reply: str, options: Sequence[str]) -> Optional[str]:
    """Map a free-text reply onto one of the lettered options.

    Tries a leading option letter first, then falls back to the longest
    option whose text appears in the reply. None if neither works.
    """
    if not options:
        return None
    m = re.match(r"\s*\(?([A-Za-z])(?:[).:\s\]]|$)", reply)
    if m:
        idx = ord(m.group(1).upper()) - ord("A")
        if 0 <= idx < len(options):
            return options[idx]
    lowered = reply.lower()
    best = None
    for opt in options:
        if opt.lower() in lowered and (best is None or len(opt) > len(best)):
            best = opt
    return best


def answer_object_motion(
    clip: Clip,
    sampled: SampledSequence,
    query: Query,
    clients: ServiceClients,
    cfg: PipelineConfig,
    gate: str = "object",
) -> AnswerRecord:
    """Object-motion path: refer, track, focus, spotlight, ask.

    When referral fails or nothing is detected, the prompt degrades to the
    original frames only and the fallback reason is recorded.
    """
    if gate not in ("object", "both"):
        raise ValueError(f"object-motion path needs gate object or both, got {gate!r}")
    log: list[dict] = []
    referral = refer_objects(sampled, query, clients.mllm, log)
    fallback = None
    lit_frames = None
    if referral.failed:
        fallback = "referral-failed"
    else:
        tracked = build_tracked_set(
            sampled, referral.categories, cfg.redetect, clients.detector, clients.tracker
        )
        if not tracked:
            fallback = "no-relevant-object"
        else:
            unions = build_frame_unions(tracked, sampled)
            regions = aggregate(
                unions, tracked_variance(tracked), cfg.aggregator, (clip.width, clip.height)
            )
            lit_frames = spotlight(sampled.frames, regions, cfg.aggregator.beta)

    if lit_frames is None:
        streams = [("original", sampled.frames)]
    else:
        streams = [("spotlight", lit_frames)]
        if cfg.include_original_with_spotlight:
            streams.append(("original", sampled.frames))
    bundle = build_prompt(streams, question_text(query), gate, cfg.system_preamble)
    reply = _chat(clients.mllm, "object-answer", bundle_to_messages(bundle), log)
    return AnswerRecord(
        gate=gate,
        r_obj=reply,
        categories=referral.categories,
        object_fallback=fallback,
        selected_option=parse_choice(reply, query.options),
        bundles=({"stage": "object-answer", **serialize_bundle(bundle)},),
        transcripts=tuple(log),
    )


def answer_camera_motion(
    clip: Clip,
    sampled: SampledSequence,
    query: Query,
    r_obj: Optional[str],
    clients: ServiceClients,
    cfg: PipelineConfig,
    gate: str = "camera",
) -> AnswerRecord:
    """Camera-motion path: blur, ask over blur + original streams.

    A prior object-motion answer, when given, is appended to the question
    as context; the linkage is recorded on the returned record.
    """
    if gate not in ("camera", "both"):
        raise ValueError(f"camera-motion path needs gate camera or both, got {gate!r}")
    log: list[dict] = []
    blurred = apply_motion_blur(clip, sampled, cfg.blur)
    question = question_text(query)
    if r_obj is not None:
        question = f"{question}\n\nContext from the object-motion analysis:\n{r_obj}"
    bundle = build_prompt(
        [("motion_blur", blurred.frames), ("original", sampled.frames)],
        question,
        gate,
        cfg.system_preamble,
    )
    reply = _chat(clients.mllm, "camera-answer", bundle_to_messages(bundle), log)
    return AnswerRecord(
        gate=gate,
        r_cam=reply,
        used_r_obj=r_obj is not None,
        selected_option=parse_choice(reply, query.options),
        bundles=({"stage": "camera-answer", **serialize_bundle(bundle)},),
        transcripts=tuple(log),
    )


def run_pipeline(
    clip: Clip, query: Query, clients: ServiceClients, cfg: PipelineConfig = PipelineConfig()
) -> AnswerRecord:
    """Sample, gate, and run the object and/or camera paths.

    With gate "both" the object path runs first and its answer feeds the
    camera prompt. For multiple-choice queries the recorded option comes
    from the object answer when present, else the camera answer.
    """
    count = min(cfg.frame_count, len(clip))
    sampled = sample(clip, SampleSpec.fixed_count(count))
    gate_log: list[dict] = []
    gate = gate_motion_type(query, clients.mllm, gate_log)

    obj_rec = cam_rec = None
    if gate in ("object", "both"):
        obj_rec = answer_object_motion(clip, sampled, query, clients, cfg, gate)
    if gate in ("camera", "both"):
        r_obj = obj_rec.r_obj if obj_rec else None
        cam_rec = answer_camera_motion(clip, sampled, query, r_obj, clients, cfg, gate)

    parts = [rec for rec in (obj_rec, cam_rec) if rec is not None]
    selected = next((rec.selected_option for rec in parts if rec.selected_option), None)
    return AnswerRecord(
        gate=gate,
        r_obj=obj_rec.r_obj if obj_rec else None,
        r_cam=cam_rec.r_cam if cam_rec else None,
        used_r_obj=bool(cam_rec and cam_rec.used_r_obj),
        categories=obj_rec.categories if obj_rec else (),
        object_fallback=obj_rec.object_fallback if obj_rec else None,
        selected_option=selected,
        bundles=tuple(b for rec in parts for b in rec.bundles),
        transcripts=tuple(gate_log) + tuple(t for rec in parts for t in rec.transcripts),
    )
